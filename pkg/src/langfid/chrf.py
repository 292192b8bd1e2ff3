"""chrF++ : character n-gram F-score augmented with word n-grams.

Scores are per sentence. Each order contributes an F-beta value and the
sentence score is their uniform mean, times 100. Orders for which neither
side has any n-gram (short strings) are left out of the mean, so a caption
scored against itself is always 100. With several references the best
sentence score wins.

No Unicode normalization is applied; normalize upstream if needed.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Sequence

log = logging.getLogger(__name__)

# Same punctuation set as the reference chrF++ word tokenizer.
PUNCTUATION = frozenset("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")


@dataclass(frozen=True)
class ChrfParams:
    char_order: int = 6
    word_order: int = 2
    beta: float = 2.0

    def __post_init__(self) -> None:
        if self.char_order < 1:
            raise ValueError("char_order must be >= 1")
        if self.word_order < 0:
            raise ValueError("word_order must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class SentenceScore:
    score: float
    degenerate: bool = False


def _ngrams(units: Sequence[Hashable], n: int) -> Counter:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Counter(tuple(units[i : i + n]) for i in range(len(units) - n + 1))


def extract_char_ngrams(text: str, n: int) -> Counter:
    """Character n-gram counts with all whitespace removed.

    Keys are strings: ``extract_char_ngrams("abc", 2) == {"ab": 1, "bc": 1}``.
    """
    chars = "".join(text.split())
    if n < 1:
        raise ValueError("n must be >= 1")
    return Counter(chars[i : i + n] for i in range(len(chars) - n + 1))


def tokenize_words(text: str) -> list[str]:
    """Whitespace split, then peel one leading or trailing punctuation mark off each word."""
    tokens: list[str] = []
    for word in text.split():
        if len(word) == 1:
            tokens.append(word)
        elif word[-1] in PUNCTUATION:
            tokens.extend((word[:-1], word[-1]))
        elif word[0] in PUNCTUATION:
            tokens.extend((word[0], word[1:]))
        else:
            tokens.append(word)
    return tokens


def extract_word_ngrams(text: str, n: int) -> Counter:
    """Word n-gram counts keyed by token tuples."""
    return _ngrams(tokenize_words(text), n)


def _order_stats(hyp: str, ref: str, params: ChrfParams) -> list[tuple[int, int, int]]:
    """(hypothesis count, reference count, clipped matches) per order."""
    stats = []
    hyp_words, ref_words = tokenize_words(hyp), tokenize_words(ref)
    for n in range(1, params.char_order + 1):
        h, r = extract_char_ngrams(hyp, n), extract_char_ngrams(ref, n)
        stats.append((sum(h.values()), sum(r.values()), sum((h & r).values())))
    for n in range(1, params.word_order + 1):
        h, r = _ngrams(hyp_words, n), _ngrams(ref_words, n)
        stats.append((sum(h.values()), sum(r.values()), sum((h & r).values())))
    return stats


def _f_beta(hyp_count: int, ref_count: int, matches: int, beta: float) -> float:
    precision = matches / hyp_count if hyp_count else 0.0
    recall = matches / ref_count if ref_count else 0.0
    if precision == 0.0 and recall == 0.0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


def _single_reference(hyp: str, ref: str, params: ChrfParams) -> float:
    scores = [
        _f_beta(h, r, m, params.beta) for h, r, m in _order_stats(hyp, ref, params) if h or r
    ]
    if not scores:
        return 0.0
    return 100.0 * sum(scores) / len(scores)


def sentence_chrf(caption: str, references: Sequence[str], params: ChrfParams | None = None) -> SentenceScore:
    """Score one caption against up to N references (max over references)."""
    params = params or ChrfParams()
    if not references:
        raise ValueError("at least one reference is required")
    refs = [r for r in references if r.strip()]
    if not refs:
        raise ValueError("all references are empty")
    if not caption.strip():
        return SentenceScore(0.0, degenerate=True)
    best = max(_single_reference(caption, r, params) for r in refs)
    # guard against float drift just past the bounds
    return SentenceScore(min(100.0, max(0.0, best)))


def chrf_pp(caption: str, references: Sequence[str], params: ChrfParams | None = None) -> float:
    return sentence_chrf(caption, references, params).score


def corpus_chrf(
    pairs: Sequence[tuple[str, Sequence[str]]], params: ChrfParams | None = None
) -> float:
    """Macro-average of sentence scores over (caption, references) pairs."""
    if not pairs:
        raise ValueError("corpus_chrf needs at least one pair")
    total = 0.0
    for caption, refs in pairs:
        s = sentence_chrf(caption, refs, params)
        if s.degenerate:
            log.warning("empty caption scored as 0: %r", caption)
        total += s.score
    return total / len(pairs)
