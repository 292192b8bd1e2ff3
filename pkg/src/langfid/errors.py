class TransportError(RuntimeError):
    """A remote backend (identifier or judge) could not be reached."""


class StatusError(TransportError):
    """The remote answered with a non-success status."""

    def __init__(self, status: int, body: str):
        self.status = status
        self.body = body
        super().__init__(f"HTTP {status}: {body[:200]}")


class MappingError(KeyError):
    """A backend emitted a label missing from its label map."""

    def __init__(self, label: str):
        self.label = label
        super().__init__(f"unmapped identifier label {label!r}")

    def __str__(self) -> str:
        return self.args[0]
