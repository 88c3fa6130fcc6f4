import math
import random

import pytest
from hypothesis import given, strategies as st

from stylometer.errors import EmptyInput
from stylometer.overlap import bleu, lcs_length, overlap_scores, rouge_l, rouge_n

from oracles import bleu_bruteforce, lcs_recursive, rouge_n_bruteforce


def T(s):
    return s.split()


class TestBleu:
    def test_identity(self):
        assert bleu(T("the quick brown fox jumps"), T("the quick brown fox jumps")) == pytest.approx(1.0, abs=1e-12)

    def test_no_overlap_is_epsilon_dominated(self):
        assert bleu(T("a b c d"), T("w x y z")) < 1e-4

    def test_brevity_penalty_hand_value(self):
        expected = math.exp(1 - 3 / 2)
        assert bleu(T("the cat"), T("the cat sat"), max_n=2) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.6065, abs=1e-4)

    def test_clipping(self):
        # unigram precision is 1/4 under clipping, bigram precision 0 -> epsilon
        assert bleu(T("the the the the"), T("the cat"), max_n=1) == pytest.approx(0.25, abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            bleu([], T("a"))
        with pytest.raises(EmptyInput):
            bleu(T("a"), [])

    def test_bad_order(self):
        with pytest.raises(ValueError):
            bleu(T("a"), T("a"), max_n=5)

    def test_matches_bruteforce(self):
        rng = random.Random(11)
        vocab = list("abcdef")
        for _ in range(100):
            c = [rng.choice(vocab) for _ in range(rng.randint(1, 15))]
            r = [rng.choice(vocab) for _ in range(rng.randint(1, 15))]
            for n in (1, 2, 4):
                assert bleu(c, r, n) == pytest.approx(bleu_bruteforce(c, r, n), abs=1e-12)


class TestRouge:
    def test_identity(self):
        r = rouge_n(T("a b c"), T("a b c"), 2)
        assert (r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0)
        assert rouge_l(T("a b c"), T("a b c")).f1 == 1.0

    def test_disjoint(self):
        r = rouge_n(T("a b"), T("c d"), 1)
        assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)
        assert rouge_l(T("a b"), T("c d")).f1 == 0.0

    def test_unigram_hand(self):
        r = rouge_n(T("a b c"), T("a b d"), 1)
        assert r.precision == pytest.approx(2 / 3)
        assert r.recall == pytest.approx(2 / 3)
        assert r.f1 == pytest.approx(2 / 3)

    def test_rouge_l_hand(self):
        r = rouge_l(T("the cat sat"), T("the dog sat"))
        assert lcs_length(T("the cat sat"), T("the dog sat")) == 2
        assert r.precision == pytest.approx(2 / 3) and r.recall == pytest.approx(2 / 3)
        assert r.f1 == pytest.approx(2 / 3)

    def test_degenerate_n(self):
        r = rouge_n(T("a"), T("a b c"), 2)
        assert r.reason == "DegenerateN"
        assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)

    def test_clipped_intersection(self):
        r = rouge_n(T("the the the the"), T("the cat"), 1)
        assert r.precision == pytest.approx(0.25)
        assert r.recall == pytest.approx(0.5)

    def test_empty(self):
        with pytest.raises(EmptyInput):
            rouge_n([], T("a"), 1)
        with pytest.raises(EmptyInput):
            rouge_l(T("a"), [])

    def test_matches_oracles(self):
        rng = random.Random(5)
        vocab = list("abcde")
        for _ in range(100):
            c = [rng.choice(vocab) for _ in range(rng.randint(1, 12))]
            r = [rng.choice(vocab) for _ in range(rng.randint(1, 12))]
            assert lcs_length(c, r) == lcs_recursive(c, r)
            for n in (1, 2):
                got = rouge_n(c, r, n)
                p, rec, f = rouge_n_bruteforce(c, r, n)
                assert (got.precision, got.recall) == pytest.approx((p, rec), abs=1e-12)
                assert got.f1 == pytest.approx(f, abs=1e-12)


tokens = st.lists(st.sampled_from(list("abcdxyz")), min_size=1, max_size=15)


@given(tokens)
def test_self_overlap_is_one(toks):
    s = overlap_scores(toks, toks)
    assert s.bleu == pytest.approx(1.0, abs=1e-12)
    assert s.rouge1.f1 == 1.0
    assert s.rougeL.f1 == 1.0
    if len(toks) >= 2:
        assert s.rouge2.f1 == 1.0


@given(tokens, tokens)
def test_bounds_and_f1_zero_rule(a, b):
    s = overlap_scores(a, b)
    assert 0.0 <= s.bleu <= 1.0
    for prf in (s.rouge1, s.rouge2, s.rougeL):
        assert 0.0 <= prf.precision <= 1.0 and 0.0 <= prf.recall <= 1.0 and 0.0 <= prf.f1 <= 1.0
        if prf.precision == 0 or prf.recall == 0:
            assert prf.f1 == 0.0
