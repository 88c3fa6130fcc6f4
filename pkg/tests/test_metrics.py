import math

import pytest
from hypothesis import given, settings, strategies as st

from stylometer.corpus import TextSample
from stylometer.errors import CheckerUnavailable, EmptyInput, TooFewSentences, ZeroVector
from stylometer.lm_scoring import UniformScorer, sentence_perplexities, train_ngram
from stylometer.metrics import (
    HashEmbedder,
    HttpEmbedder,
    LanguageToolChecker,
    MetricVector,
    RuleChecker,
    burstiness_len_cv,
    burstiness_pp_var,
    compute_metric_vector,
    cosine,
    grammar_error_rate,
    semantic_coherence,
    ttr,
)
from stylometer.overlap import bleu, rouge_l, rouge_n
from stylometer.segmentation import split_sentences, tokenize

from helpers import MockServer


class FixedEmbedder:
    name = "fixed"

    def __init__(self, table):
        self.table = table

    def embed(self, text):
        return self.table[text]


class FlagAll:
    name = "flag-all"

    def __init__(self, flagged=None):
        self.flagged = flagged

    def check(self, sentence):
        return self.flagged is None or sentence in self.flagged


class TestBurstiness:
    def test_pp_var_constant(self):
        assert burstiness_pp_var([10, 10, 10]) == 0

    def test_pp_var_hand(self):
        assert burstiness_pp_var([10, 20]) == 25

    def test_pp_var_too_few(self):
        with pytest.raises(TooFewSentences):
            burstiness_pp_var([12])

    def test_len_cv_equal(self):
        assert burstiness_len_cv(split_sentences("One two three. Four five six.")) == 0

    def test_len_cv_hand(self):
        sl = split_sentences("A b c d. E f g h i j k l.")
        assert sl.lengths == [4, 8]
        assert burstiness_len_cv(sl) == 1 / 3

    def test_len_cv_single(self):
        with pytest.raises(TooFewSentences):
            burstiness_len_cv(split_sentences("Only one sentence here."))

    @given(st.lists(st.integers(min_value=1, max_value=40), min_size=2, max_size=12))
    def test_len_cv_duplication_invariant(self, lengths):
        assert burstiness_len_cv(lengths * 2) == pytest.approx(burstiness_len_cv(lengths), rel=1e-12, abs=1e-15)

    @given(st.lists(st.integers(min_value=1, max_value=40), min_size=2, max_size=12))
    def test_len_cv_matches_population_formula(self, lengths):
        mean = sum(lengths) / len(lengths)
        sd = math.sqrt(sum((x - mean) ** 2 for x in lengths) / len(lengths))
        assert burstiness_len_cv(lengths) == pytest.approx(sd / mean, rel=1e-12, abs=1e-15)


class TestTTR:
    def test_hand_cases(self):
        assert ttr(["a", "a", "a"]) == 1 / 3
        assert ttr(["the", "cat", "sat"]) == 1.0
        assert ttr(["a", "b", "a", "c"]) == 0.75
        assert ttr(tokenize("a a a")) == 1 / 3

    def test_empty(self):
        with pytest.raises(EmptyInput):
            ttr([])

    @given(st.lists(st.sampled_from(list("abcdefgh")), min_size=1, max_size=30))
    def test_bounds_and_all_distinct(self, toks):
        v = ttr(toks)
        assert 0 < v <= 1
        assert (v == 1) == (len(set(toks)) == len(toks))


class TestGrammar:
    def test_nothing_flagged(self):
        sl = split_sentences("A b. C d. E f.")
        assert grammar_error_rate(sl, FlagAll(flagged=set())) == 0.0

    def test_one_of_four(self):
        sl = split_sentences("A b. C d. E f. G h.")
        assert grammar_error_rate(sl, FlagAll(flagged={"C d."})) == 0.25

    def test_rule_checker_doubled_word(self):
        sl = split_sentences("The the cat sat. The dog ran.")
        assert grammar_error_rate(sl, RuleChecker()) == 0.5

    def test_rule_checker_rules(self):
        rc = RuleChecker()
        assert rc.violations("All is well.") == []
        assert rc.violations("the start is lowercase.") == ["LOWERCASE_START"]
        assert rc.violations("Unclosed (paren here.") == ["UNMATCHED_BRACKET"]
        assert rc.violations("Wrong ] order [ here.") == ["UNMATCHED_BRACKET"]
        assert rc.violations("Nested ([ok]) fine.") == []
        assert rc.violations("3 items were found.") == []

    def test_empty(self):
        with pytest.raises(EmptyInput):
            grammar_error_rate(split_sentences(""), RuleChecker())

    def test_languagetool_overlap_mapping(self):
        text = "This are wrong. This is fine. Also bad bad."
        sl = split_sentences(text)
        # matches at "are" (offset 5) and the second "bad" (offset 39)
        body = {"matches": [{"offset": 5, "length": 3}, {"offset": text.rindex("bad"), "length": 3}]}
        with MockServer({"/v2/check": lambda r: (200, body)}) as srv:
            lt = LanguageToolChecker(srv.url)
            assert grammar_error_rate(sl, lt) == pytest.approx(2 / 3)
            form = srv.requests[0]["form"]
            assert form == {"text": text, "language": "en-US"}

    def test_languagetool_unavailable(self):
        with MockServer({"/v2/check": lambda r: (500, {})}) as srv:
            with pytest.raises(CheckerUnavailable):
                grammar_error_rate(split_sentences("A b."), LanguageToolChecker(srv.url))


class TestCoherence:
    def test_identical_sentences(self):
        sl = split_sentences("Same words here. Same words here. Same words here.")
        assert semantic_coherence(sl, HashEmbedder()) == pytest.approx(1.0, abs=1e-12)

    def test_hand_vectors(self):
        e = FixedEmbedder({"One.": [1.0, 0.0], "Two.": [0.6, 0.8]})
        assert semantic_coherence(split_sentences("One. Two."), e) == pytest.approx(0.6, abs=1e-12)

    def test_single_sentence(self):
        with pytest.raises(TooFewSentences):
            semantic_coherence(split_sentences("Only one."), HashEmbedder())

    def test_zero_vector(self):
        e = FixedEmbedder({"One.": [1.0, 0.0], "Two.": [0.0, 0.0]})
        with pytest.raises(ZeroVector):
            semantic_coherence(split_sentences("One. Two."), e)

    def test_orthogonal_is_zero(self):
        e = FixedEmbedder({"A.": [1.0, 0.0, 0.0], "B.": [0.0, 2.0, 0.0], "C.": [0.0, 0.0, 3.0]})
        assert abs(semantic_coherence(split_sentences("A. B. C."), e)) <= 1e-12

    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
           st.lists(st.floats(-10, 10), min_size=3, max_size=3),
           st.floats(0.01, 100), st.floats(0.01, 100))
    def test_cosine_scale_invariance(self, u, v, a, b):
        if math.sqrt(sum(x * x for x in u)) < 1e-3 or math.sqrt(sum(x * x for x in v)) < 1e-3:
            return
        assert cosine([a * x for x in u], [b * x for x in v]) == pytest.approx(cosine(u, v), abs=1e-12)

    def test_hash_embedder_deterministic_and_fixed_dim(self):
        e1, e2 = HashEmbedder(64), HashEmbedder(64)
        assert e1.embed("Hello world") == e2.embed("Hello world")
        assert len(e1.embed("x")) == len(e1.embed("a much longer sentence here")) == 64

    def test_http_embedder(self):
        def embed(req):
            return 200, {"vectors": [[1.0, float(len(t))] for t in req["json"]["texts"]]}

        with MockServer({"/embed": embed}) as srv:
            e = HttpEmbedder(srv.url)
            val = semantic_coherence(split_sentences("Ab. Abcd."), e)
            assert srv.requests[0]["json"] == {"texts": ["Ab.", "Abcd."]}
            assert val == pytest.approx(cosine([1, 3], [1, 5]))


class TestMetricVector:
    def test_single_sentence_sample(self):
        s = TextSample("x", "human", "source", "Just one sentence here.")
        mv = compute_metric_vector(s, UniformScorer(10), HashEmbedder(), RuleChecker())
        assert mv.burstiness_len_cv is None and mv.absent["burstiness_len_cv"] == "TooFewSentences"
        assert mv.burstiness_pp_var is None and mv.absent["burstiness_pp_var"] == "TooFewSentences"
        assert mv.semantic_coherence is None
        assert mv.perplexity == pytest.approx(10)
        assert mv.ttr == 1.0
        assert mv.grammar_error_rate == 0.0
        assert mv.bleu is None and mv.absent["bleu"] == "NoReference"

    def test_reference_gives_overlap(self):
        s = TextSample("y", "llama", "rephrase", "The cat sat. It slept.", reference="The cat sat down. It slept well.")
        mv = compute_metric_vector(s, UniformScorer(10), HashEmbedder(), RuleChecker())
        for name in ("bleu", "rouge1_f1", "rouge2_f1", "rougeL_f1"):
            assert getattr(mv, name) is not None

    def test_equals_composition(self):
        text = "The the model reads text. it predicts tokens one by one! Results vary (a lot."
        ref = "The model reads text and predicts tokens. Results vary a lot."
        corpus = [tokenize("the model reads text and predicts tokens results vary a lot")]
        scorer = train_ngram(corpus, n=2, k=0.5)
        emb, chk = HashEmbedder(32), RuleChecker()
        s = TextSample("z", "llada", "rephrase", text, reference=ref)
        mv = compute_metric_vector(s, scorer, emb, chk)

        sl = split_sentences(text)
        toks = tokenize(text)
        pps = sentence_perplexities(scorer, sl)
        expected = MetricVector(
            perplexity=pps.document_pp,
            sentence_pp_mean=sum(pps.sentence_pps) / len(pps.sentence_pps),
            burstiness_pp_var=burstiness_pp_var(pps.sentence_pps),
            burstiness_len_cv=burstiness_len_cv(sl),
            ttr=ttr(toks),
            grammar_error_rate=grammar_error_rate(sl, chk),
            semantic_coherence=semantic_coherence(sl, emb),
            bleu=bleu(toks, tokenize(ref)),
            rouge1_f1=rouge_n(toks, tokenize(ref), 1).f1,
            rouge2_f1=rouge_n(toks, tokenize(ref), 2).f1,
            rougeL_f1=rouge_l(toks, tokenize(ref)).f1,
        )
        assert mv.values() == expected.values()
        assert mv.grammar_error_rate == 1.0  # doubled word, lowercase start, open bracket
        assert mv.absent == {}

    def test_checker_unavailable_marks_absent(self):
        with MockServer({"/v2/check": lambda r: (503, {})}) as srv:
            s = TextSample("q", "human", "source", "One two. Three four.")
            mv = compute_metric_vector(s, UniformScorer(5), HashEmbedder(), LanguageToolChecker(srv.url))
        assert mv.grammar_error_rate is None
        assert mv.absent["grammar_error_rate"] == "CheckerUnavailable"

    def test_empty_text(self):
        with pytest.raises(EmptyInput):
            compute_metric_vector(TextSample("e", "human", "source", "  "), UniformScorer(5), HashEmbedder(), RuleChecker())

    @given(st.lists(st.sampled_from(["Alpha beta.", "Gamma delta epsilon!", "Zeta eta theta iota?", "kappa lambda."]),
                    min_size=1, max_size=6))
    @settings(max_examples=50)
    def test_bounds(self, parts):
        s = TextSample("b", "human", "source", " ".join(parts))
        mv = compute_metric_vector(s, UniformScorer(7), HashEmbedder(), RuleChecker())
        assert mv.perplexity >= 1
        assert 0 <= mv.ttr <= 1
        assert 0 <= mv.grammar_error_rate <= 1
        if mv.semantic_coherence is not None:
            assert -1 <= mv.semantic_coherence <= 1
        if mv.burstiness_len_cv is not None:
            assert mv.burstiness_len_cv >= 0
            assert mv.burstiness_pp_var == pytest.approx(0, abs=1e-9)
