"""Caption language identification and the LF accuracy metric.

Three backend kinds share one contract (top-1 label plus confidence,
mapped to a :class:`LanguageTag` through ``label_map``):

``builtin_trigram``
    Naive-Bayes over character trigrams built from the small corpora in
    ``langfid/data``. Meant for hermetic tests, not research use.
``external_command``
    A long-lived subprocess; one text line on stdin, one
    ``label<TAB>confidence`` line back on stdout.
``http_endpoint``
    ``POST`` of the raw text; response body ``label confidence``.
"""

from __future__ import annotations

import logging
import math
import shlex
import subprocess
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import httpx

from .corpus import EvaluationSample, LanguageTag
from .errors import MappingError, TransportError

log = logging.getLogger(__name__)

BACKEND_KINDS = ("external_command", "http_endpoint", "builtin_trigram")
BUILTIN_LANGUAGES = ("de", "en", "es", "fr", "nl", "ru")


@dataclass(frozen=True)
class Identification:
    tag: LanguageTag
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def _trigrams(text: str) -> Counter:
    padded = " " + " ".join(text.lower().split()) + " "
    return Counter(padded[i : i + 3] for i in range(len(padded) - 2))


class TrigramModel:
    """Add-one smoothed character-trigram naive Bayes classifier."""

    def __init__(self, corpora: Mapping[str, str]):
        if not corpora:
            raise ValueError("at least one language corpus is required")
        self.profiles = {code: _trigrams(text) for code, text in corpora.items()}
        vocab = set().union(*self.profiles.values())
        self._vocab_size = len(vocab) + 1
        self._totals = {code: sum(p.values()) for code, p in self.profiles.items()}

    @classmethod
    def builtin(cls) -> TrigramModel:
        data = resources.files("langfid") / "data"
        return cls({code: (data / f"{code}.txt").read_text(encoding="utf-8") for code in BUILTIN_LANGUAGES})

    def log_likelihoods(self, text: str) -> dict[str, float]:
        grams = _trigrams(text)
        out = {}
        for code, prof in self.profiles.items():
            denom = math.log(self._totals[code] + self._vocab_size)
            out[code] = sum(k * (math.log(prof.get(g, 0) + 1) - denom) for g, k in grams.items())
        return out

    def classify(self, text: str) -> tuple[str, float]:
        """Top-1 code and its posterior under a uniform prior.

        Exact ties go to the lexicographically smallest code.
        """
        ll = self.log_likelihoods(text)
        best = min(ll, key=lambda c: (-ll[c], c))
        top = ll[best]
        z = sum(math.exp(v - top) for v in ll.values())
        return best, min(1.0, 1.0 / z)


_builtin_lock = threading.Lock()
_builtin_model: TrigramModel | None = None


def builtin_model() -> TrigramModel:
    global _builtin_model
    with _builtin_lock:
        if _builtin_model is None:
            _builtin_model = TrigramModel.builtin()
        return _builtin_model


def read_label_map(path: str | Path) -> dict[str, LanguageTag]:
    """Two whitespace-separated columns per line: backend label, language tag."""
    mapping: dict[str, LanguageTag] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'label tag', got {line!r}")
            mapping[parts[0]] = LanguageTag.parse(parts[1])
    return mapping


def _parse_label_line(line: str) -> tuple[str, float]:
    parts = line.split()
    if len(parts) != 2:
        raise TransportError(f"malformed identifier reply {line!r}")
    label, conf = parts
    try:
        confidence = float(conf)
    except ValueError as exc:
        raise TransportError(f"malformed confidence in identifier reply {line!r}") from exc
    return label, min(1.0, max(0.0, confidence))


class _CommandClient:
    def __init__(self, command: str):
        self.command = command
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    shlex.split(self.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    encoding="utf-8",
                    bufsize=1,
                )
            except OSError as exc:
                raise TransportError(f"cannot start identifier {self.command!r}: {exc}") from exc
        return self._proc

    def query(self, text: str) -> tuple[str, float]:
        line = " ".join(text.split())
        with self._lock:
            proc = self._ensure()
            try:
                proc.stdin.write(line + "\n")
                proc.stdin.flush()
                reply = proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"identifier {self.command!r} died: {exc}") from exc
        if not reply:
            raise TransportError(f"identifier {self.command!r} closed its output")
        return _parse_label_line(reply)

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
            self._proc = None


class _HttpClient:
    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self._client = httpx.Client(timeout=timeout)

    def query(self, text: str) -> tuple[str, float]:
        try:
            resp = self._client.post(self.url, content=text.encode("utf-8"),
                                     headers={"Content-Type": "text/plain; charset=utf-8"})
        except httpx.HTTPError as exc:
            raise TransportError(f"identifier endpoint {self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"identifier endpoint {self.url}: HTTP {resp.status_code}")
        return _parse_label_line(resp.text)

    def close(self) -> None:
        self._client.close()


@dataclass
class IdentifierBackend:
    kind: str = "builtin_trigram"
    location: str | None = None
    label_map: dict[str, LanguageTag] = field(default_factory=dict)
    _client: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}; choose from {BACKEND_KINDS}")
        if self.kind != "builtin_trigram" and not self.location:
            raise ValueError(f"backend {self.kind} needs a location")
        if self.kind == "builtin_trigram" and not self.label_map:
            self.label_map = {c: LanguageTag(c) for c in BUILTIN_LANGUAGES}

    def raw_label(self, text: str) -> tuple[str, float]:
        if self.kind == "builtin_trigram":
            return builtin_model().classify(text)
        if self._client is None:
            self._client = (
                _CommandClient(self.location) if self.kind == "external_command" else _HttpClient(self.location)
            )
        return self._client.query(text)

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None

    def __enter__(self) -> IdentifierBackend:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def identify(text: str, backend: IdentifierBackend) -> Identification:
    if not text.strip():
        raise ValueError("cannot identify empty text")
    label, confidence = backend.raw_label(text)
    try:
        tag = backend.label_map[label]
    except KeyError:
        raise MappingError(label) from None
    return Identification(tag, confidence)


def identify_all(
    texts: Sequence[str], backend: IdentifierBackend, parallelism: int = 1
) -> list[Identification]:
    """Identify many texts; output order follows input order."""
    if parallelism <= 1 or backend.kind == "builtin_trigram":
        return [identify(t, backend) for t in texts]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(lambda t: identify(t, backend), texts))


def language_fidelity(
    samples: Sequence[EvaluationSample], identifications: Sequence[Identification | LanguageTag]
) -> float:
    """Percentage of samples whose identified language equals the target language."""
    if len(samples) != len(identifications):
        raise ValueError(f"{len(samples)} samples but {len(identifications)} identifications")
    if not samples:
        raise ValueError("language_fidelity needs at least one sample")
    hits = 0
    for s, ident in zip(samples, identifications):
        tag = ident.tag if isinstance(ident, Identification) else ident
        hits += tag == s.target_language
    return 100.0 * hits / len(samples)
