"""lerp/slerp sweep over alpha in {0.25, 0.5, 0.75} between two checkpoints.

With no checkpoints given, a pair of synthetic ones is generated first.

    python scripts/merge_sweep.py --out runs/merge
    python scripts/merge_sweep.py --instructed vlm.safetensors --backbone llm.safetensors --out runs/merge
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from langfid.checkpoint import Checkpoint, Tensor, read_checkpoint, write_checkpoint
from langfid.merge import DEFAULT_PRESERVE, canonical_specs, merge_files


def synthetic_pair(out: Path, seed: int) -> tuple[Path, Path]:
    rng = np.random.default_rng(seed)
    shapes = {"vision_tower.patch": (16, 8), "mm_projector.w": (8, 8), "model.layers.0.w": (32, 32), "model.embed": (64, 8)}
    paths = []
    for name in ("instructed", "backbone"):
        tensors = [Tensor.from_array(n, rng.standard_normal(s), "bf16") for n, s in shapes.items()]
        path = out / f"{name}.safetensors"
        write_checkpoint(Checkpoint.of(tensors, {"origin": name}), path)
        paths.append(path)
    return paths[0], paths[1]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instructed")
    ap.add_argument("--backbone")
    ap.add_argument("--out", default="runs/merge")
    ap.add_argument("--preserve", nargs="*", default=list(DEFAULT_PRESERVE))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.instructed and args.backbone:
        w1, w2 = Path(args.instructed), Path(args.backbone)
    else:
        w1, w2 = synthetic_pair(out, args.seed)

    base = read_checkpoint(w1)
    print("variant\tinterpolated\tpreserved\tmean_abs_shift")
    for method in ("lerp", "slerp"):
        for key, spec in canonical_specs(method, args.preserve).items():
            target = out / f"{key}.safetensors"
            summary = merge_files(w1, w2, target, spec)
            merged = read_checkpoint(target)
            shift = np.mean([
                np.abs(merged.tensors[n].to_array() - base.tensors[n].to_array()).mean() for n in summary.interpolated
            ]) if summary.interpolated else 0.0
            print(f"{key}\t{len(summary.interpolated)}\t{len(summary.preserved)}\t{shift:.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
