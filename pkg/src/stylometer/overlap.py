"""Sentence-level BLEU and ROUGE-1/2/L over word tokens."""

import math
from collections import Counter
from dataclasses import dataclass

from .errors import EmptyInput

BLEU_EPSILON = 1e-9


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    reason: str = None


def _tokens(x):
    if isinstance(x, str):
        return x.split()
    return list(getattr(x, "tokens", x))


def ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _f1(p, r):
    if p == 0 or r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def bleu(candidate, reference, max_n: int = 4) -> float:
    """BLEU with uniform weights, clipped precisions and brevity penalty.

    Orders longer than the candidate are left out and the weights spread
    over the remaining ``min(max_n, len(candidate))`` orders. A zero
    precision is replaced by ``BLEU_EPSILON`` so short outputs do not
    collapse to exactly 0.
    """
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand or not ref:
        raise EmptyInput("BLEU needs non-empty candidate and reference")
    if not 1 <= max_n <= 4:
        raise ValueError("max_n must be in 1..4")

    orders = min(max_n, len(cand))
    log_sum = 0.0
    for n in range(1, orders + 1):
        c_counts = ngrams(cand, n)
        r_counts = ngrams(ref, n)
        clipped = sum(min(c, r_counts[g]) for g, c in c_counts.items())
        p = clipped / sum(c_counts.values())
        log_sum += math.log(p if p > 0 else BLEU_EPSILON) / orders
    bp = min(1.0, math.exp(1 - len(ref) / len(cand)))
    return math.exp(log_sum) * bp


def rouge_n(candidate, reference, n: int = 1) -> PRF:
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand or not ref:
        raise EmptyInput("ROUGE needs non-empty candidate and reference")
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(cand) < n or len(ref) < n:
        return PRF(0.0, 0.0, 0.0, reason="DegenerateN")
    c_counts, r_counts = ngrams(cand, n), ngrams(ref, n)
    overlap = sum((c_counts & r_counts).values())
    p = overlap / sum(c_counts.values())
    r = overlap / sum(r_counts.values())
    return PRF(p, r, _f1(p, r))


def lcs_length(a, b):
    # two-row DP, O(len(a) * len(b))
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(candidate, reference) -> PRF:
    cand, ref = _tokens(candidate), _tokens(reference)
    if not cand or not ref:
        raise EmptyInput("ROUGE-L needs non-empty candidate and reference")
    lcs = lcs_length(cand, ref)
    p, r = lcs / len(cand), lcs / len(ref)
    return PRF(p, r, _f1(p, r))


@dataclass(frozen=True)
class OverlapScores:
    bleu: float
    rouge1: PRF
    rouge2: PRF
    rougeL: PRF


def overlap_scores(candidate, reference, max_n=4) -> OverlapScores:
    return OverlapScores(
        bleu=bleu(candidate, reference, max_n),
        rouge1=rouge_n(candidate, reference, 1),
        rouge2=rouge_n(candidate, reference, 2),
        rougeL=rouge_l(candidate, reference),
    )
