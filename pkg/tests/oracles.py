"""Slow reference implementations used only by the test suite.

Nothing here imports from ``langfid``; each oracle re-derives its answer
by direct enumeration.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

ASCII_PUNCT = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~"


# ---------------------------------------------------------------- chrF++

def _strip_ws(s):
    out = []
    for ch in s:
        if not ch.isspace():
            out.append(ch)
    return out


def _words(s):
    toks = []
    cur = ""
    words = []
    for ch in s + " ":
        if ch.isspace():
            if cur:
                words.append(cur)
            cur = ""
        else:
            cur += ch
    for w in words:
        if len(w) > 1 and w[len(w) - 1] in ASCII_PUNCT:
            toks.append(w[: len(w) - 1])
            toks.append(w[len(w) - 1])
        elif len(w) > 1 and w[0] in ASCII_PUNCT:
            toks.append(w[0])
            toks.append(w[1:])
        else:
            toks.append(w)
    return toks


def _windows(units, n):
    res = []
    i = 0
    while i + n <= len(units):
        res.append(list(units[i : i + n]))
        i += 1
    return res


def _clipped_overlap(hyp_grams, ref_grams):
    # pair every hypothesis n-gram with an unused identical reference n-gram
    used = [False] * len(ref_grams)
    hits = 0
    for g in hyp_grams:
        for j, rg in enumerate(ref_grams):
            if not used[j] and rg == g:
                used[j] = True
                hits += 1
                break
    return hits


def brute_chrf_single(hyp, ref, char_order=6, word_order=2, beta=2.0):
    per_order = []
    hc, rc = _strip_ws(hyp), _strip_ws(ref)
    hw, rw = _words(hyp), _words(ref)
    jobs = [(hc, rc, n) for n in range(1, char_order + 1)]
    jobs += [(hw, rw, n) for n in range(1, word_order + 1)]
    for h_units, r_units, n in jobs:
        hg, rg = _windows(h_units, n), _windows(r_units, n)
        if len(hg) == 0 and len(rg) == 0:
            continue
        m = _clipped_overlap(hg, rg)
        p = m / len(hg) if len(hg) > 0 else 0.0
        r = m / len(rg) if len(rg) > 0 else 0.0
        if p + r == 0:
            per_order.append(0.0)
        else:
            per_order.append((1 + beta**2) * p * r / (beta**2 * p + r))
    if not per_order:
        return 0.0
    return 100 * sum(per_order) / len(per_order)


def brute_chrf(hyp, refs, **kw):
    if hyp.strip() == "":
        return 0.0
    return max(brute_chrf_single(hyp, r, **kw) for r in refs if r.strip() != "")


# ---------------------------------------------------- verdict aggregation

ABSENT = None


def brute_aggregate(bools, scores):
    """Majority vote with False fallback; mean of available scores."""
    t = sum(1 for b in bools if b is True)
    f = sum(1 for b in bools if b is False)
    if t + f == 0:
        fully, unparseable = False, True
    else:
        fully, unparseable = t > f, False
    avail = [s for s in scores if s is not None]
    mean = sum(avail) / len(avail) if avail else None
    return mean, fully, unparseable


def all_bool_patterns():
    return list(itertools.product([True, False, ABSENT], repeat=3))


def all_presence_patterns():
    return list(itertools.product([True, False], repeat=3))


# ---------------------------------------------------- largest remainder

def brute_largest_remainder(total, weights, order):
    """Try every floor/ceil rounding that conserves ``total``; keep the one that
    hands the extra units to the largest exact remainders, earliest ``order``
    winning ties."""
    wsum = sum(weights)
    exact = [Fraction(total * w, wsum) for w in weights]
    floors = [math.floor(e) for e in exact]
    need = total - sum(floors)

    def key(ups):
        return sorted((-(exact[i] - floors[i]), order[i]) for i in ups)

    best = min(itertools.combinations(range(len(weights)), need), key=key)
    return [floors[i] + (1 if i in best else 0) for i in range(len(weights))]
