"""Text-only data budgets for the curriculum stages.

A text budget is split across the stages a strategy touches in proportion
to each stage's visual sample count. Rounding uses largest remainders so
the allocations always add up to the budget exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Iterable, Sequence

STAGES = ("1", "1.5", "2", "2.5")
STRATEGIES: dict[str, tuple[str, ...]] = {
    "TR-3S": ("1.5", "2", "2.5"),
    "TR-2S": ("2", "2.5"),
    "TR-1S": ("2.5",),
}
# ratios of the total visual volume explored for the text budget
BUDGET_RATIOS = (0.0125, 0.025, 0.05, 0.1)


@dataclass(frozen=True)
class StageVolume:
    stage_id: str
    visual_count: int

    def __post_init__(self) -> None:
        if self.stage_id not in STAGES:
            raise ValueError(f"unknown stage {self.stage_id!r}; choose from {STAGES}")
        if self.visual_count < 0:
            raise ValueError(f"stage {self.stage_id}: negative visual count")


@dataclass(frozen=True)
class MixPlan:
    strategy: str
    text_total: int
    allocations: dict[str, int]

    def __post_init__(self) -> None:
        if set(self.allocations) != set(STRATEGIES[self.strategy]):
            raise ValueError(f"{self.strategy} allocations must cover exactly {STRATEGIES[self.strategy]}")
        if sum(self.allocations.values()) != self.text_total:
            raise ValueError("allocations do not sum to text_total")

    def lines(self) -> list[str]:
        return [f"{stage}\t{self.allocations[stage]}" for stage in STRATEGIES[self.strategy]]


def scale_text_budget(ratio: float, visual_total: int) -> int:
    """``round(ratio * visual_total)`` rounding halves up, without float drift."""
    if ratio < 0:
        raise ValueError("ratio must be non-negative")
    if visual_total < 0:
        raise ValueError("visual_total must be non-negative")
    exact = Decimal(str(ratio)) * visual_total
    return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def largest_remainder(total: int, weights: Sequence[int]) -> list[int]:
    """Integer shares of ``total`` proportional to ``weights``; ties favour earlier entries."""
    wsum = sum(weights)
    if wsum <= 0:
        raise ValueError("weights must not all be zero")
    floors = [total * w // wsum for w in weights]
    remainders = [total * w % wsum for w in weights]
    leftover = total - sum(floors)
    for i in sorted(range(len(weights)), key=lambda i: (-remainders[i], i))[:leftover]:
        floors[i] += 1
    return floors


def plan_mix(strategy: str, text_total: int, volumes: Iterable[StageVolume]) -> MixPlan:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {tuple(STRATEGIES)}")
    if text_total < 0:
        raise ValueError("text_total must be non-negative")
    by_stage: dict[str, int] = {}
    for v in volumes:
        if v.stage_id in by_stage:
            raise ValueError(f"stage {v.stage_id} given twice")
        by_stage[v.stage_id] = v.visual_count
    stages = STRATEGIES[strategy]
    missing = [s for s in stages if s not in by_stage]
    if missing:
        raise ValueError(f"{strategy} needs visual volumes for stage(s) {', '.join(missing)}")
    weights = [by_stage[s] for s in stages]
    if not any(weights):
        raise ValueError(f"all visual volumes for {strategy} stages are zero")
    return MixPlan(strategy, text_total, dict(zip(stages, largest_remainder(text_total, weights))))


def interleave_manifest(
    visual_ids: Sequence[str], text_ids: Sequence[str], allocation: int, seed: int
) -> list[str]:
    """Seeded shuffle of all visual ids plus the first ``allocation`` text ids.

    Entries are prefixed ``V:`` or ``T:``.
    """
    if allocation < 0:
        raise ValueError("allocation must be non-negative")
    if allocation > len(text_ids):
        raise ValueError(f"allocation {allocation} exceeds the {len(text_ids)} available text ids")
    manifest = [f"V:{i}" for i in visual_ids] + [f"T:{i}" for i in text_ids[:allocation]]
    random.Random(seed).shuffle(manifest)
    return manifest


def write_lines(lines: Iterable[str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def read_volumes(path: str | Path) -> list[StageVolume]:
    """``stage_id<whitespace>visual_count`` per line; ``#`` starts a comment."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'stage count'")
            out.append(StageVolume(parts[0], int(parts[1])))
    return out
