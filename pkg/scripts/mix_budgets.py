"""Text-only allocations per stage for every strategy and budget ratio.

Stage volumes default to an illustrative 5.5M-sample curriculum; pass a
``stage count`` file with --volumes to use real ones.
"""

from __future__ import annotations

import argparse
import sys

from langfid.mixer import BUDGET_RATIOS, STRATEGIES, StageVolume, plan_mix, read_volumes, scale_text_budget

ILLUSTRATIVE = [StageVolume("1", 550_000), StageVolume("1.5", 2_200_000),
                StageVolume("2", 2_000_000), StageVolume("2.5", 750_000)]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--volumes", help="file of 'stage count' lines")
    args = ap.parse_args()
    volumes = read_volumes(args.volumes) if args.volumes else ILLUSTRATIVE
    visual_total = sum(v.visual_count for v in volumes)

    print("strategy\tratio\ttext_total\t" + "\t".join(f"stage_{s}" for s in ("1.5", "2", "2.5")))
    for strategy in STRATEGIES:
        for ratio in BUDGET_RATIOS:
            plan = plan_mix(strategy, scale_text_budget(ratio, visual_total), volumes)
            cells = [str(plan.allocations.get(s, 0)) for s in ("1.5", "2", "2.5")]
            print(f"{strategy}\t{ratio:g}\t{plan.text_total}\t" + "\t".join(cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
