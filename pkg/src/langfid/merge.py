"""Two-parent checkpoint merging by linear or spherical interpolation.

``alpha`` is the weight on the *second* (backbone) checkpoint::

    lerp  = (1 - alpha) * w1 + alpha * w2
    slerp = sin((1 - alpha) * theta) / sin(theta) * w1 + sin(alpha * theta) / sin(theta) * w2

with ``theta`` the angle between the flattened tensors. Dot products and
norms accumulate in float64, the interpolation itself runs in float32
(or float64 when the caller passes float64 arrays), and merged tensors are
stored back in their source dtype. Tensors matching a preserve pattern are
copied byte-for-byte from the first (visually instructed) checkpoint.
"""

from __future__ import annotations

import fnmatch
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .checkpoint import (
    Checkpoint,
    CheckpointWriter,
    Tensor,
    check_size,
    content_digest,
    iter_tensors,
    read_header,
)

log = logging.getLogger(__name__)

METHODS = ("lerp", "slerp")
DEFAULT_PRESERVE = ("vision_tower.*", "mm_projector.*")


class MergeError(ValueError):
    pass


@dataclass(frozen=True)
class MergeSpec:
    method: str = "slerp"
    alpha: float = 0.5
    preserve_patterns: tuple[str, ...] = DEFAULT_PRESERVE
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown merge method {self.method!r}; choose from {METHODS}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "preserve_patterns", tuple(self.preserve_patterns))

    def preserves(self, name: str) -> bool:
        return any(fnmatch.fnmatchcase(name, p) for p in self.preserve_patterns)


# ------------------------------------------------------------------ arrays

def _work_dtype(a: np.ndarray, b: np.ndarray) -> np.dtype:
    return np.result_type(a.dtype, b.dtype, np.float32)


def lerp(a: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
    dt = _work_dtype(a, b)
    a, b = np.asarray(a, dtype=dt), np.asarray(b, dtype=dt)
    if a.shape != b.shape:
        raise MergeError(f"shape mismatch {a.shape} vs {b.shape}")
    al = dt.type(alpha)
    return (dt.type(1) - al) * a + al * b


def slerp(a: np.ndarray, b: np.ndarray, alpha: float, epsilon: float = 1e-6) -> np.ndarray:
    """Spherical interpolation over the flattened arrays; lerp when degenerate."""
    dt = _work_dtype(a, b)
    a, b = np.asarray(a, dtype=dt), np.asarray(b, dtype=dt)
    if a.shape != b.shape:
        raise MergeError(f"shape mismatch {a.shape} vs {b.shape}")
    a64, b64 = a.ravel().astype(np.float64), b.ravel().astype(np.float64)
    na, nb = np.linalg.norm(a64), np.linalg.norm(b64)
    if na < epsilon or nb < epsilon:
        return lerp(a, b, alpha)
    cos = float(np.clip(np.dot(a64, b64) / (na * nb), -1.0, 1.0))
    theta = np.arccos(cos)
    sin_theta = np.sin(theta)
    if sin_theta < epsilon:
        return lerp(a, b, alpha)
    c1 = np.sin((1.0 - alpha) * theta) / sin_theta
    c2 = np.sin(alpha * theta) / sin_theta
    return dt.type(c1) * a + dt.type(c2) * b


# ------------------------------------------------------------------ tensors

def _check_pair(w1: Tensor, w2: Tensor) -> None:
    if w1.shape != w2.shape:
        raise MergeError(f"tensor {w1.name!r}: shape {list(w1.shape)} vs {list(w2.shape)}")
    if w1.dtype != w2.dtype:
        raise MergeError(f"tensor {w1.name!r}: dtype {w1.dtype} vs {w2.dtype}")


def lerp_tensor(w1: Tensor, w2: Tensor, alpha: float) -> Tensor:
    _check_pair(w1, w2)
    return Tensor.from_array(w1.name, lerp(w1.to_array(), w2.to_array(), alpha), w1.dtype)


def slerp_tensor(w1: Tensor, w2: Tensor, alpha: float, epsilon: float = 1e-6) -> Tensor:
    _check_pair(w1, w2)
    return Tensor.from_array(w1.name, slerp(w1.to_array(), w2.to_array(), alpha, epsilon), w1.dtype)


def interpolate(w1: Tensor, w2: Tensor, spec: MergeSpec) -> Tensor:
    if spec.method == "lerp":
        return lerp_tensor(w1, w2, spec.alpha)
    return slerp_tensor(w1, w2, spec.alpha, spec.epsilon)


# ------------------------------------------------------------------ checkpoints

def _plan(instructed: dict, backbone: dict, spec: MergeSpec) -> None:
    """Validate names/shapes/dtypes; ``instructed``/``backbone`` map name -> (dtype, shape)."""
    missing = sorted(n for n in instructed if not spec.preserves(n) and n not in backbone)
    if missing:
        raise MergeError(f"backbone lacks {len(missing)} tensor(s) to interpolate: {', '.join(missing)}")
    for name, (dtype, shape) in instructed.items():
        if spec.preserves(name):
            continue
        b_dtype, b_shape = backbone[name]
        if tuple(shape) != tuple(b_shape):
            raise MergeError(f"tensor {name!r}: shape {list(shape)} vs {list(b_shape)}")
        if dtype != b_dtype:
            raise MergeError(f"tensor {name!r}: dtype {dtype} vs {b_dtype}")
    extra = sorted(set(backbone) - set(instructed))
    if extra:
        log.warning("ignoring %d backbone-only tensor(s): %s", len(extra), ", ".join(extra[:10]))


def _merge_metadata(base: dict[str, str], spec: MergeSpec, d1: str, d2: str) -> dict[str, str]:
    meta = dict(base)
    meta.update(
        {
            "merge.method": spec.method,
            "merge.alpha": repr(float(spec.alpha)),
            "merge.epsilon": repr(float(spec.epsilon)),
            "merge.preserve": ",".join(spec.preserve_patterns),
            "merge.instructed_digest": d1,
            "merge.backbone_digest": d2,
        }
    )
    return meta


def merge_checkpoints(instructed: Checkpoint, backbone: Checkpoint, spec: MergeSpec) -> Checkpoint:
    _plan(
        {t.name: (t.dtype, t.shape) for t in instructed},
        {t.name: (t.dtype, t.shape) for t in backbone},
        spec,
    )
    out = []
    for t in instructed:
        out.append(t if spec.preserves(t.name) else interpolate(t, backbone.tensors[t.name], spec))
    meta = _merge_metadata(instructed.metadata, spec, instructed.digest(), backbone.digest())
    return Checkpoint.of(out, meta)


@dataclass
class MergeSummary:
    interpolated: list[str] = field(default_factory=list)
    preserved: list[str] = field(default_factory=list)


def merge_files(
    instructed_path: str | Path, backbone_path: str | Path, out_path: str | Path, spec: MergeSpec
) -> MergeSummary:
    """Streaming merge: holds at most one tensor pair in memory."""
    summary = MergeSummary()
    with open(instructed_path, "rb") as f1, open(backbone_path, "rb") as f2:
        h1, h2 = read_header(f1), read_header(f2)
        check_size(f1, h1)
        check_size(f2, h2)
        _plan(
            {n: (i.dtype, i.shape) for n, i in h1.tensors.items()},
            {n: (i.dtype, i.shape) for n, i in h2.tensors.items()},
            spec,
        )
        d1 = content_digest(iter_tensors(f1, h1))
        d2 = content_digest(iter_tensors(f2, h2))
        specs = [(i.name, i.dtype, i.shape) for i in h1.tensors.values()]
        backbone_info = h2.tensors
        with CheckpointWriter(out_path, specs, _merge_metadata(h1.metadata, spec, d1, d2)) as writer:
            for t in iter_tensors(f1, h1):
                if spec.preserves(t.name):
                    writer.write(t)
                    summary.preserved.append(t.name)
                    continue
                info = backbone_info[t.name]
                f2.seek(h2.data_start + info.begin)
                other = Tensor(info.name, info.dtype, info.shape, f2.read(info.nbytes))
                writer.write(interpolate(t, other, spec))
                summary.interpolated.append(t.name)
    return summary


def canonical_specs(method: str, preserve: Sequence[str] = DEFAULT_PRESERVE) -> dict[str, MergeSpec]:
    """The 75-25 / 50-50 / 25-75 sweep, keyed like ``slerp_050``."""
    return {
        f"{method}_{int(round(a * 100)):03d}": MergeSpec(method, a, tuple(preserve)) for a in (0.25, 0.5, 0.75)
    }
