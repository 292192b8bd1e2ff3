import json

import pytest
from hypothesis import given, strategies as st

from langfid.corpus import (
    AggregatedVerdict,
    CorpusError,
    EvaluationSample,
    LanguageTag,
    SampleResult,
    load_results,
    load_samples,
    write_results,
)


def _write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


def test_language_tag_normalization():
    t = LanguageTag.parse("spa_Latn")
    assert t.code == "spa" and t.script == "Latn"
    assert LanguageTag.parse("RU-cyrl").script == "Cyrl"
    assert LanguageTag.parse("es") == LanguageTag.parse("es_Latn")
    assert LanguageTag("sr", "Latn") != LanguageTag("sr", "Cyrl")
    assert LanguageTag("es") != LanguageTag("en")
    assert len({LanguageTag("es"), LanguageTag("es", "Latn")}) == 1
    for bad in ("e", "english", "es_La", "1a", "es_Latn_x"):
        with pytest.raises(ValueError):
            LanguageTag.parse(bad)


def test_load_single_and_empty(tmp_path):
    p = tmp_path / "s.jsonl"
    _write_lines(p, [{"sample_id": "a", "target_language": "es", "prompt": "", "caption": "hola", "references": []}])
    samples = load_samples(p)
    assert len(samples) == 1 and samples[0].target_language == LanguageTag("es")
    empty = tmp_path / "e.jsonl"
    empty.write_text("")
    assert load_samples(empty) == []


def test_duplicate_and_malformed(tmp_path):
    rec = {"sample_id": "a", "target_language": "es", "caption": "hola"}
    p = tmp_path / "dup.jsonl"
    _write_lines(p, [rec, rec])
    with pytest.raises(CorpusError, match="'a'") as exc:
        load_samples(p)
    assert exc.value.line == 2

    p.write_text(json.dumps(rec) + "\n{not json\n")
    with pytest.raises(CorpusError, match="line 2"):
        load_samples(p)

    _write_lines(p, [dict(rec, caption="   ")])
    with pytest.raises(CorpusError, match="line 1"):
        load_samples(p)

    _write_lines(p, [dict(rec, references=["1", "2", "3", "4"])])
    with pytest.raises(CorpusError):
        load_samples(p)


def test_sample_order_preserved(tmp_path):
    ids = ["z", "a", "m", "b"]
    p = tmp_path / "s.jsonl"
    _write_lines(p, [{"sample_id": i, "target_language": "fr", "caption": "x"} for i in ids])
    assert [s.sample_id for s in load_samples(p)] == ids


def test_result_invariants():
    with pytest.raises(ValueError):
        SampleResult("a", identified_language=LanguageTag("es"))
    with pytest.raises(ValueError):
        SampleResult("a", chrf_score=101.0)
    with pytest.raises(ValueError):
        AggregatedVerdict(None, fully_in_language=True, unparseable=True)


RESULTS = [
    SampleResult("a", LanguageTag("es"), True, AggregatedVerdict(0.9, True, False), 55.5),
    SampleResult("b", LanguageTag("en"), False),
    SampleResult("c"),
]


@pytest.mark.parametrize("fmt", ["jsonl", "csv"])
def test_results_round_trip(tmp_path, fmt):
    p = tmp_path / f"r.{fmt}"
    write_results(RESULTS, p, fmt)
    assert load_results(p, fmt) == RESULTS


def test_empty_csv_has_header(tmp_path):
    p = tmp_path / "r.csv"
    write_results([], p, "csv")
    assert p.read_text().strip().split(",")[0] == "sample_id"
    assert len(p.read_text().splitlines()) == 1
    assert load_results(p) == []


def test_unwritable(tmp_path):
    with pytest.raises(OSError):
        write_results(RESULTS, tmp_path / "missing" / "r.jsonl")


tags = st.sampled_from(["es", "en", "de", "ru", "nl", "fr", "spa_Latn"]).map(LanguageTag.parse)
scores = st.floats(0, 1, allow_nan=False)
verdicts = st.one_of(
    st.none(),
    st.builds(AggregatedVerdict, st.one_of(st.none(), scores), st.booleans(), st.just(False)),
    st.just(AggregatedVerdict(None, False, True)),
)


@st.composite
def results(draw):
    n = draw(st.integers(0, 8))
    out = []
    for i in range(n):
        lang = draw(st.one_of(st.none(), tags))
        out.append(
            SampleResult(
                sample_id=f"s{i}",
                identified_language=lang,
                lf_correct=None if lang is None else draw(st.booleans()),
                aggregated_verdict=draw(verdicts),
                chrf_score=draw(st.one_of(st.none(), st.floats(0, 100, allow_nan=False))),
            )
        )
    return out


@given(results(), st.sampled_from(["jsonl", "csv"]))
def test_round_trip_property(tmp_path_factory, rs, fmt):
    p = tmp_path_factory.mktemp("rt") / f"r.{fmt}"
    write_results(rs, p, fmt)
    back = load_results(p, fmt)
    assert back == rs
    # script survives as well, not only tag equality
    assert [str(r.identified_language) for r in back] == [str(r.identified_language) for r in rs]


def test_sample_dict_round_trip():
    s = EvaluationSample("x", LanguageTag("ru"), "p", "Кот", ("Кошка",))
    assert EvaluationSample.from_dict(s.to_dict()) == s
