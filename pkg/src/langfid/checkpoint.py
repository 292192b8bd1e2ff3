"""Reader/writer for the safetensors checkpoint layout.

File = 8-byte little-endian header length ``N`` | ``N`` bytes of JSON header |
raw data. The header maps every tensor name to ``dtype``, ``shape`` and
``data_offsets`` (``[begin, end)`` into the data section) and may carry a
``__metadata__`` string map. Only F16, BF16 and F32 are supported.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

DTYPE_WIDTH = {"f16": 2, "bf16": 2, "f32": 4}
_TO_FILE = {"f16": "F16", "bf16": "BF16", "f32": "F32"}
_FROM_FILE = {v: k for k, v in _TO_FILE.items()}
_MAX_HEADER = 100 * 1024 * 1024


class CheckpointFormatError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


# ------------------------------------------------------------------ dtypes

def bf16_to_f32(raw: np.ndarray) -> np.ndarray:
    return (raw.astype(np.uint32) << 16).view(np.float32)


def f32_to_bf16(x: np.ndarray) -> np.ndarray:
    """Round-to-nearest-even truncation of float32 to bfloat16 bit patterns."""
    bits = np.ascontiguousarray(x, dtype=np.float32).view(np.uint32)
    rounded = (bits + np.uint32(0x7FFF) + ((bits >> 16) & np.uint32(1))) >> 16
    nan = np.isnan(x)
    if nan.any():
        rounded = np.where(nan, (bits >> 16) | np.uint32(0x40), rounded)
    return rounded.astype(np.uint16)


def decode(data: bytes, dtype: str, shape: tuple[int, ...]) -> np.ndarray:
    """Raw little-endian buffer -> float32 array of ``shape``."""
    if dtype == "f32":
        arr = np.frombuffer(data, dtype="<f4").astype(np.float32)
    elif dtype == "f16":
        arr = np.frombuffer(data, dtype="<f2").astype(np.float32)
    elif dtype == "bf16":
        arr = bf16_to_f32(np.frombuffer(data, dtype="<u2"))
    else:
        raise ValueError(f"unsupported dtype {dtype!r}")
    return arr.reshape(shape)


def encode(arr: np.ndarray, dtype: str) -> bytes:
    arr = np.asarray(arr)
    if dtype == "f32":
        return arr.astype("<f4").tobytes()
    if dtype == "f16":
        return arr.astype("<f2").tobytes()
    if dtype == "bf16":
        return f32_to_bf16(arr.astype(np.float32)).astype("<u2").tobytes()
    raise ValueError(f"unsupported dtype {dtype!r}")


# ------------------------------------------------------------------ records

@dataclass(frozen=True)
class Tensor:
    name: str
    dtype: str
    shape: tuple[int, ...]
    data: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if self.dtype not in DTYPE_WIDTH:
            raise ValueError(f"tensor {self.name!r}: unsupported dtype {self.dtype!r}")
        object.__setattr__(self, "shape", tuple(int(d) for d in self.shape))
        if any(d < 0 for d in self.shape):
            raise ValueError(f"tensor {self.name!r}: negative dimension in {self.shape}")
        expected = self.numel * DTYPE_WIDTH[self.dtype]
        if len(self.data) != expected:
            raise ValueError(f"tensor {self.name!r}: buffer has {len(self.data)} bytes, expected {expected}")

    @property
    def numel(self) -> int:
        return math.prod(self.shape)

    @property
    def nbytes(self) -> int:
        return len(self.data)

    def to_array(self) -> np.ndarray:
        return decode(self.data, self.dtype, self.shape)

    @classmethod
    def from_array(cls, name: str, arr: np.ndarray, dtype: str = "f32") -> Tensor:
        arr = np.asarray(arr)
        return cls(name, dtype, arr.shape, encode(arr, dtype))


@dataclass
class Checkpoint:
    tensors: dict[str, Tensor] = field(default_factory=dict)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key, t in self.tensors.items():
            if key != t.name:
                raise ValueError(f"tensor stored under {key!r} is named {t.name!r}")
        self.tensors = dict(sorted(self.tensors.items()))

    @classmethod
    def of(cls, tensors: Iterable[Tensor], metadata: dict[str, str] | None = None) -> Checkpoint:
        out: dict[str, Tensor] = {}
        for t in tensors:
            if t.name in out:
                raise ValueError(f"duplicate tensor name {t.name!r}")
            out[t.name] = t
        return cls(out, dict(metadata or {}))

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.tensors[name] for name in sorted(self.tensors))

    def __len__(self) -> int:
        return len(self.tensors)

    def digest(self) -> str:
        return content_digest(iter(self))


def content_digest(tensors: Iterable[Tensor]) -> str:
    """SHA-256 over names, dtypes, shapes and data in name order (metadata excluded)."""
    h = hashlib.sha256()
    for t in sorted(tensors, key=lambda t: t.name):
        h.update(json.dumps([t.name, t.dtype, list(t.shape)]).encode())
        h.update(struct.pack("<Q", len(t.data)))
        h.update(t.data)
    return h.hexdigest()


# ------------------------------------------------------------------ header

@dataclass(frozen=True)
class TensorInfo:
    name: str
    dtype: str
    shape: tuple[int, ...]
    begin: int
    end: int

    @property
    def nbytes(self) -> int:
        return self.end - self.begin


@dataclass(frozen=True)
class Header:
    tensors: dict[str, TensorInfo]
    metadata: dict[str, str]
    data_start: int

    @property
    def data_size(self) -> int:
        return max((t.end for t in self.tensors.values()), default=0)


def read_header(fh: BinaryIO) -> Header:
    prefix = fh.read(8)
    if len(prefix) != 8:
        raise CheckpointFormatError("file shorter than the 8-byte header length", offset=len(prefix))
    (n,) = struct.unpack("<Q", prefix)
    if n > _MAX_HEADER:
        raise CheckpointFormatError(f"header length {n} is implausibly large", offset=0)
    raw = fh.read(n)
    if len(raw) != n:
        raise CheckpointFormatError(f"header truncated: expected {n} bytes, got {len(raw)}", offset=8 + len(raw))
    try:
        parsed = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise CheckpointFormatError("header is not UTF-8", offset=8 + exc.start) from exc
    except json.JSONDecodeError as exc:
        raise CheckpointFormatError(f"header is not valid JSON: {exc.msg}", offset=8 + exc.pos) from exc
    if not isinstance(parsed, dict):
        raise CheckpointFormatError("header must be a JSON object", offset=8)

    metadata = parsed.pop("__metadata__", None) or {}
    if not isinstance(metadata, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in metadata.items()
    ):
        raise CheckpointFormatError("__metadata__ must map strings to strings", offset=8)

    infos: dict[str, TensorInfo] = {}
    for name, entry in parsed.items():
        try:
            dtype = _FROM_FILE.get(entry["dtype"], entry["dtype"].lower())
            shape = tuple(int(d) for d in entry["shape"])
            begin, end = (int(x) for x in entry["data_offsets"])
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise CheckpointFormatError(f"bad header entry for tensor {name!r}", offset=8) from exc
        if dtype not in DTYPE_WIDTH:
            raise CheckpointFormatError(f"tensor {name!r}: unsupported dtype {entry['dtype']!r}", offset=8)
        if any(d < 0 for d in shape) or begin < 0 or end < begin:
            raise CheckpointFormatError(f"tensor {name!r}: invalid shape or offsets", offset=8)
        if end - begin != math.prod(shape) * DTYPE_WIDTH[dtype]:
            raise CheckpointFormatError(
                f"tensor {name!r}: extent {end - begin} bytes does not match shape {list(shape)} {dtype}",
                offset=8 + n + begin,
            )
        infos[name] = TensorInfo(name, dtype, shape, begin, end)

    cursor = 0
    for info in sorted(infos.values(), key=lambda t: (t.begin, t.end)):
        if info.begin < cursor:
            raise CheckpointFormatError(f"tensor {info.name!r} overlaps the previous tensor", offset=8 + n + info.begin)
        if info.begin > cursor:
            raise CheckpointFormatError(f"gap before tensor {info.name!r}", offset=8 + n + cursor)
        cursor = info.end
    return Header(dict(sorted(infos.items())), dict(metadata), 8 + n)


def iter_tensors(fh: BinaryIO, header: Header) -> Iterator[Tensor]:
    """Stream tensors in name order, one buffer at a time."""
    for info in header.tensors.values():
        fh.seek(header.data_start + info.begin)
        data = fh.read(info.nbytes)
        if len(data) != info.nbytes:
            raise CheckpointFormatError(
                f"data section truncated inside tensor {info.name!r}", offset=header.data_start + info.begin + len(data)
            )
        yield Tensor(info.name, info.dtype, info.shape, data)


def check_size(fh: BinaryIO, header: Header) -> None:
    end = fh.seek(0, 2)
    if end < header.data_start + header.data_size:
        raise CheckpointFormatError(
            f"data section truncated: {end - header.data_start} of {header.data_size} bytes present", offset=end
        )


def read_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as fh:
        header = read_header(fh)
        check_size(fh, header)
        return Checkpoint.of(iter_tensors(fh, header), header.metadata)


def _encode_header(specs: Iterable[tuple[str, str, tuple[int, ...], int]], metadata: dict[str, str]) -> bytes:
    entries: dict[str, object] = {}
    if metadata:
        entries["__metadata__"] = dict(metadata)
    offset = 0
    for name, dtype, shape, nbytes in specs:
        entries[name] = {"dtype": _TO_FILE[dtype], "shape": list(shape), "data_offsets": [offset, offset + nbytes]}
        offset += nbytes
    raw = json.dumps(entries, separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    raw += b" " * (-len(raw) % 8)
    return struct.pack("<Q", len(raw)) + raw


class CheckpointWriter:
    """Write a checkpoint whose tensor list is known up front, one tensor at a time.

    ``specs`` are ``(name, dtype, shape)`` in the order tensors will be written.
    """

    def __init__(self, path: str | Path, specs: Iterable[tuple[str, str, tuple[int, ...]]], metadata: dict[str, str]):
        self._expected = [
            (name, dtype, tuple(shape), math.prod(shape) * DTYPE_WIDTH[dtype]) for name, dtype, shape in specs
        ]
        if len({s[0] for s in self._expected}) != len(self._expected):
            raise ValueError("duplicate tensor names")
        self._fh = open(path, "wb")
        self._fh.write(_encode_header(self._expected, metadata))
        self._next = 0

    def write(self, tensor: Tensor) -> None:
        name, dtype, shape, _ = self._expected[self._next]
        if (tensor.name, tensor.dtype, tensor.shape) != (name, dtype, shape):
            raise ValueError(f"expected tensor {name!r} {dtype} {list(shape)}, got {tensor.name!r}")
        self._fh.write(tensor.data)
        self._next += 1

    def close(self) -> None:
        self._fh.close()
        if self._next != len(self._expected):
            raise ValueError(f"only {self._next} of {len(self._expected)} tensors written")

    def __enter__(self) -> CheckpointWriter:
        return self

    def __exit__(self, exc_type, *exc) -> None:
        if exc_type is None:
            self.close()
        else:
            self._fh.close()


def write_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    tensors = list(ckpt)
    with CheckpointWriter(path, [(t.name, t.dtype, t.shape) for t in tensors], ckpt.metadata) as w:
        for t in tensors:
            w.write(t)
