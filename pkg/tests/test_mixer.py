from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from langfid.mixer import (
    STRATEGIES,
    MixPlan,
    StageVolume,
    interleave_manifest,
    plan_mix,
    scale_text_budget,
)

from oracles import brute_largest_remainder


def vols(*counts, stages=("1.5", "2", "2.5")):
    return [StageVolume(s, c) for s, c in zip(stages, counts)]


def test_scale_text_budget():
    assert scale_text_budget(0.05, 5_500_000) == 275_000
    assert scale_text_budget(0.0, 123) == 0
    assert scale_text_budget(0.0125, 5_500_000) == 68_750
    assert scale_text_budget(0.5, 3) == 2  # half rounds up
    with pytest.raises(ValueError):
        scale_text_budget(-0.1, 10)


def test_plan_examples():
    assert plan_mix("TR-3S", 300, vols(100, 100, 100)).allocations == {"1.5": 100, "2": 100, "2.5": 100}
    assert plan_mix("TR-1S", 315_496, vols(4, 5, 6)).allocations == {"2.5": 315_496}
    assert plan_mix("TR-3S", 10, vols(1, 1, 1)).allocations == {"1.5": 4, "2": 3, "2.5": 3}
    assert plan_mix("TR-2S", 7, vols(1, 1, 1)).allocations == {"2": 4, "2.5": 3}


def test_plan_errors():
    with pytest.raises(ValueError, match="2.5"):
        plan_mix("TR-3S", 10, vols(1, 1))
    with pytest.raises(ValueError, match="zero"):
        plan_mix("TR-2S", 10, vols(5, 0, 0))
    with pytest.raises(ValueError):
        plan_mix("TR-4S", 10, vols(1, 1, 1))
    with pytest.raises(ValueError):
        StageVolume("3", 1)
    with pytest.raises(ValueError):
        MixPlan("TR-1S", 5, {"2.5": 4})


def test_plan_lines():
    assert plan_mix("TR-3S", 10, vols(1, 1, 1)).lines() == ["1.5\t4", "2\t3", "2.5\t3"]


@st.composite
def mix_inputs(draw):
    strategy = draw(st.sampled_from(sorted(STRATEGIES)))
    stages = STRATEGIES[strategy]
    counts = draw(st.lists(st.integers(0, 10**6), min_size=len(stages), max_size=len(stages)))
    if not any(counts):
        counts[-1] = 1
    total = draw(st.integers(0, 10**6))
    return strategy, total, [StageVolume(s, c) for s, c in zip(stages, counts)]


@given(mix_inputs())
def test_plan_conservation_and_deviation(args):
    strategy, total, volumes = args
    plan = plan_mix(strategy, total, volumes)
    assert sum(plan.allocations.values()) == total
    vsum = sum(v.visual_count for v in volumes)
    for v in volumes:
        assert abs(plan.allocations[v.stage_id] - Fraction(total * v.visual_count, vsum)) < 1


@given(mix_inputs())
def test_plan_matches_enumeration_oracle(args):
    strategy, total, volumes = args
    expected = brute_largest_remainder(total, [v.visual_count for v in volumes], list(range(len(volumes))))
    assert list(plan_mix(strategy, total, volumes).allocations.values()) == expected


@given(mix_inputs(), st.integers(1, 1000))
def test_plan_scale_invariant(args, k):
    strategy, total, volumes = args
    scaled = [StageVolume(v.stage_id, v.visual_count * k) for v in volumes]
    assert plan_mix(strategy, total, scaled) == plan_mix(strategy, total, volumes)


def test_extra_stage_volumes_ignored():
    volumes = [StageVolume("1", 10**6)] + vols(1, 1, 1)
    assert plan_mix("TR-3S", 10, volumes).allocations == {"1.5": 4, "2": 3, "2.5": 3}


def test_interleave():
    v = [f"v{i}" for i in range(6)]
    t = [f"t{i}" for i in range(4)]
    only_visual = interleave_manifest(v, t, 0, seed=3)
    assert sorted(only_visual) == sorted(f"V:{i}" for i in v)
    assert interleave_manifest(v, t, 4, 7) == interleave_manifest(v, t, 4, 7)
    a, b = interleave_manifest(v, t, 4, 1), interleave_manifest(v, t, 4, 2)
    assert a != b and Counter(a) == Counter(b)
    assert "T:t3" not in interleave_manifest(v, t, 3, 1)
    with pytest.raises(ValueError):
        interleave_manifest(v, t, 5, 1)


@given(st.lists(st.text(min_size=1, max_size=5)), st.lists(st.text(min_size=1, max_size=5)), st.data())
def test_interleave_is_permutation(visual, text, data):
    k = data.draw(st.integers(0, len(text)))
    seed = data.draw(st.integers(0, 2**32))
    out = interleave_manifest(visual, text, k, seed)
    assert Counter(out) == Counter([f"V:{x}" for x in visual] + [f"T:{x}" for x in text[:k]])
