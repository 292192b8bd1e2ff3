import pytest
from hypothesis import given, settings, strategies as st

from langfid.chrf import (
    ChrfParams,
    chrf_pp,
    corpus_chrf,
    extract_char_ngrams,
    extract_word_ngrams,
    sentence_chrf,
)

from oracles import brute_chrf

# frozen from oracles.brute_chrf
CAT_SAT = 57.36276646203115
THREE_PAIRS = [
    ("the dog runs fast", ["a dog runs quickly", "the dog is fast"]),
    ("Кошка спит на диване.", ["Кошка спит."]),
    ("un chat noir", ["le chat noir dort"]),
]
THREE_PAIRS_MEAN = 58.14004983014229


def test_char_ngrams():
    assert extract_char_ngrams("abc", 2) == {"ab": 1, "bc": 1}
    assert extract_char_ngrams("a b", 2) == {"ab": 1}
    assert extract_char_ngrams("", 3) == {}
    assert extract_char_ngrams("aaaa", 2) == {"aa": 3}


def test_word_ngrams():
    assert extract_word_ngrams("the cat sat", 2) == {("the", "cat"): 1, ("cat", "sat"): 1}
    assert extract_word_ngrams("hi.", 1) == {("hi",): 1, (".",): 1}
    assert extract_word_ngrams("x", 2) == {}
    assert extract_word_ngrams('"quoted', 1) == {('"',): 1, ("quoted",): 1}


@given(st.text(max_size=40), st.integers(1, 6))
def test_profile_total_count(text, n):
    units = "".join(text.split())
    assert sum(extract_char_ngrams(text, n).values()) == max(0, len(units) - n + 1)


def test_identity_and_disjoint():
    assert chrf_pp("Un perro marrón corre.", ["Un perro marrón corre."]) == 100.0
    assert chrf_pp("a", ["a"]) == 100.0
    assert chrf_pp("abcd", ["wxyz"]) == 0.0


def test_golden_value():
    assert chrf_pp("cat sat", ["the cat sat"]) == pytest.approx(CAT_SAT, abs=1e-9)


def test_corpus():
    assert corpus_chrf([("hola", ["hola"])]) == 100.0
    assert corpus_chrf([("hola", ["hola"]), ("abcd", ["wxyz"])]) == 50.0
    assert corpus_chrf(THREE_PAIRS) == pytest.approx(THREE_PAIRS_MEAN, abs=1e-9)
    with pytest.raises(ValueError):
        corpus_chrf([])


def test_degenerate_inputs():
    s = sentence_chrf("   ", ["ref"])
    assert s.score == 0.0 and s.degenerate
    # empty reference among several is skipped
    assert chrf_pp("hola", ["", "hola"]) == 100.0
    with pytest.raises(ValueError):
        chrf_pp("hola", [])
    with pytest.raises(ValueError):
        chrf_pp("hola", [""])


def test_params_validation():
    with pytest.raises(ValueError):
        ChrfParams(char_order=0)
    with pytest.raises(ValueError):
        ChrfParams(beta=0)
    # chrF without the word extension
    assert chrf_pp("cat sat", ["the cat sat"], ChrfParams(word_order=0)) == pytest.approx(
        brute_chrf("cat sat", ["the cat sat"], word_order=0), abs=1e-9
    )


sentences = st.text(alphabet="abcdeабвгд .,!", min_size=1, max_size=30).filter(str.strip)


@settings(max_examples=200)
@given(sentences, st.lists(sentences, min_size=1, max_size=3))
def test_matches_oracle(hyp, refs):
    assert chrf_pp(hyp, refs) == pytest.approx(brute_chrf(hyp, refs), abs=1e-6)


@given(sentences, st.lists(sentences, min_size=1, max_size=3), sentences)
def test_bounds_and_monotone_in_references(hyp, refs, extra):
    base = chrf_pp(hyp, refs)
    assert 0.0 <= base <= 100.0
    assert chrf_pp(hyp, refs + [extra]) >= base
    assert chrf_pp(hyp, list(reversed(refs))) == base


@given(sentences)
def test_identity_property(x):
    assert chrf_pp(x, [x]) == 100.0


@given(st.lists(st.tuples(sentences, sentences), min_size=1, max_size=1), st.integers(1, 5))
def test_constant_corpus(pair, k):
    hyp, ref = pair[0]
    assert corpus_chrf([(hyp, [ref])] * k) == pytest.approx(chrf_pp(hyp, [ref]))
