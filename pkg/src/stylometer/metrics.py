"""Per-sample stylometric metrics and the capabilities they depend on.

Metrics that cannot be computed for a sample are reported as absent with a
reason code, never as zero.
"""

import hashlib
import math
import os
import statistics
from dataclasses import dataclass, field, fields
from typing import Optional, Protocol

import requests

from . import overlap
from .errors import (
    CheckerUnavailable,
    EmbedderUnavailable,
    EmptyInput,
    ScorerUnavailable,
    TooFewSentences,
    ZeroVector,
)
from .lm_scoring import LmScorer, sentence_perplexities
from .segmentation import SentenceList, split_sentences, tokenize

GRAMMAR_URL_ENV = "STYLOMETER_GRAMMAR_URL"
EMBED_URL_ENV = "STYLOMETER_EMBED_URL"


def burstiness_pp_var(sentence_pps) -> float:
    """Population variance of sentence-level perplexities."""
    if len(sentence_pps) < 2:
        raise TooFewSentences(f"need >= 2 sentences, got {len(sentence_pps)}")
    return float(statistics.pvariance(sentence_pps))


def burstiness_len_cv(sentences: SentenceList) -> float:
    """Coefficient of variation (population std / mean) of sentence token counts."""
    lengths = sentences.lengths if isinstance(sentences, SentenceList) else list(sentences)
    if len(lengths) < 2:
        raise TooFewSentences(f"need >= 2 sentences, got {len(lengths)}")
    mean = statistics.fmean(lengths)
    if mean == 0:
        raise EmptyInput("sentences contain no tokens")
    return float(statistics.pstdev(lengths)) / mean


def ttr(tokens) -> float:
    toks = list(getattr(tokens, "tokens", tokens))
    if not toks:
        raise EmptyInput("type-token ratio of an empty sequence")
    return len(set(toks)) / len(toks)


# --- grammar checking -------------------------------------------------------


class GrammarChecker(Protocol):
    name: str

    def check(self, sentence: str) -> bool:
        ...


def sentence_flags(sentences: SentenceList, checker) -> list:
    batch = getattr(checker, "flag_sentences", None)
    if batch is not None:
        return list(batch(sentences))
    return [bool(checker.check(s.text)) for s in sentences]


_BRACKETS = {")": "(", "]": "[", "}": "{"}


class RuleChecker:
    """Tiny offline checker: doubled words, lowercase sentence start, unbalanced brackets."""

    name = "rules-v1"

    def violations(self, sentence: str) -> list:
        found = []
        toks = tokenize(sentence).tokens
        if any(a == b for a, b in zip(toks, toks[1:])):
            found.append("DOUBLED_WORD")
        first = next((ch for ch in sentence if ch.isalnum()), "")
        if first.isalpha() and first.islower():
            found.append("LOWERCASE_START")
        stack = []
        for ch in sentence:
            if ch in "([{":
                stack.append(ch)
            elif ch in _BRACKETS:
                if not stack or stack.pop() != _BRACKETS[ch]:
                    found.append("UNMATCHED_BRACKET")
                    break
        else:
            if stack:
                found.append("UNMATCHED_BRACKET")
        return found

    def check(self, sentence: str) -> bool:
        return bool(self.violations(sentence))


class LanguageToolChecker:
    """LanguageTool-compatible ``POST /v2/check`` client.

    ``flag_sentences`` checks the whole document in one request and flags a
    sentence when any match overlaps its character span.
    """

    def __init__(self, url, language="en-US", timeout=60.0, session=None):
        url = url.rstrip("/")
        self.url = url if url.endswith("/v2/check") else url + "/v2/check"
        self.language = language
        self.timeout = timeout
        self.session = session or requests.Session()
        self.name = f"languagetool:{self.url}"

    @classmethod
    def from_env(cls):
        url = os.environ.get(GRAMMAR_URL_ENV)
        return cls(url) if url else None

    def matches(self, text):
        try:
            resp = self.session.post(
                self.url, data={"text": text, "language": self.language}, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise CheckerUnavailable(f"{self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise CheckerUnavailable(f"{self.url}: HTTP {resp.status_code}")
        try:
            return [(int(m["offset"]), int(m["length"])) for m in resp.json()["matches"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise CheckerUnavailable(f"{self.url}: malformed response: {exc}") from exc

    def check(self, sentence: str) -> bool:
        return bool(self.matches(sentence))

    def flag_sentences(self, sentences: SentenceList) -> list:
        spans = self.matches(sentences.text)
        flags = []
        for s in sentences:
            hit = False
            for off, length in spans:
                end = off + max(length, 1)
                if off < s.end and end > s.start:
                    hit = True
                    break
            flags.append(hit)
        return flags


def grammar_error_rate(sentences: SentenceList, checker) -> float:
    """Fraction of sentences with at least one flagged error."""
    if len(sentences) == 0:
        raise EmptyInput("no sentences to check")
    flags = sentence_flags(sentences, checker)
    return sum(flags) / len(flags)


# --- embeddings / coherence ---------------------------------------------------


class Embedder(Protocol):
    name: str

    def embed(self, text: str) -> list:
        ...


class HashEmbedder:
    """Deterministic hashed bag-of-words, L2-normalized.

    Uses blake2b so vectors are stable across processes (``hash()`` is salted).
    Unsigned counts, so a text with at least one token never maps to zero.
    """

    def __init__(self, dim: int = 256):
        self.dim = dim
        self.name = f"hash-bow-{dim}"

    def _bucket(self, token):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dim

    def embed(self, text: str) -> list:
        vec = [0.0] * self.dim
        for tok in tokenize(text).tokens:
            vec[self._bucket(tok)] += 1.0
        norm = math.sqrt(math.fsum(v * v for v in vec))
        if norm == 0:
            return vec
        return [v / norm for v in vec]


class HttpEmbedder:
    """Client for ``POST /embed {"texts": [...]}`` -> ``{"vectors": [...]}``."""

    def __init__(self, url, timeout=60.0, session=None):
        url = url.rstrip("/")
        self.url = url if url.endswith("/embed") else url + "/embed"
        self.timeout = timeout
        self.session = session or requests.Session()
        self.name = f"http:{self.url}"

    @classmethod
    def from_env(cls):
        url = os.environ.get(EMBED_URL_ENV)
        return cls(url) if url else None

    def embed_many(self, texts):
        texts = list(texts)
        try:
            resp = self.session.post(self.url, json={"texts": texts}, timeout=self.timeout)
        except requests.RequestException as exc:
            raise EmbedderUnavailable(f"{self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise EmbedderUnavailable(f"{self.url}: HTTP {resp.status_code}")
        try:
            vectors = [[float(x) for x in v] for v in resp.json()["vectors"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise EmbedderUnavailable(f"{self.url}: malformed response: {exc}") from exc
        if len(vectors) != len(texts):
            raise EmbedderUnavailable(f"{self.url}: asked for {len(texts)} vectors, got {len(vectors)}")
        return vectors

    def embed(self, text):
        return self.embed_many([text])[0]


def cosine(u, v) -> float:
    if len(u) != len(v):
        raise ValueError("embedding dimensions differ")
    nu = math.sqrt(math.fsum(x * x for x in u))
    nv = math.sqrt(math.fsum(x * x for x in v))
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine similarity with a zero-norm embedding")
    c = math.fsum(x * y for x, y in zip(u, v)) / (nu * nv)
    return max(-1.0, min(1.0, c))


def semantic_coherence(sentences, embedder) -> float:
    """Mean cosine similarity of adjacent sentence embeddings."""
    texts = sentences.texts if isinstance(sentences, SentenceList) else list(sentences)
    if len(texts) < 2:
        raise TooFewSentences(f"need >= 2 sentences, got {len(texts)}")
    many = getattr(embedder, "embed_many", None)
    vectors = many(texts) if many is not None else [embedder.embed(t) for t in texts]
    sims = [cosine(a, b) for a, b in zip(vectors, vectors[1:])]
    return math.fsum(sims) / len(sims)


# --- aggregation ------------------------------------------------------------------


@dataclass
class MetricVector:
    perplexity: Optional[float] = None
    sentence_pp_mean: Optional[float] = None
    burstiness_pp_var: Optional[float] = None
    burstiness_len_cv: Optional[float] = None
    ttr: Optional[float] = None
    grammar_error_rate: Optional[float] = None
    semantic_coherence: Optional[float] = None
    bleu: Optional[float] = None
    rouge1_f1: Optional[float] = None
    rouge2_f1: Optional[float] = None
    rougeL_f1: Optional[float] = None
    absent: dict = field(default_factory=dict)

    @classmethod
    def metric_names(cls):
        return [f.name for f in fields(cls) if f.name != "absent"]

    def values(self) -> dict:
        """Present metrics only, in declaration order."""
        out = {}
        for name in self.metric_names():
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        return out

    def get(self, name):
        return getattr(self, name)

    @classmethod
    def from_dict(cls, values, absent=None):
        unknown = set(values) - set(cls.metric_names())
        if unknown:
            raise KeyError(f"unknown metrics: {sorted(unknown)}")
        return cls(**values, absent=dict(absent or {}))


OVERLAP_FIELDS = ("bleu", "rouge1_f1", "rouge2_f1", "rougeL_f1")


def _attempt(mv, names, fn):
    try:
        result = fn()
    except (TooFewSentences, EmptyInput, ZeroVector, ScorerUnavailable, CheckerUnavailable, EmbedderUnavailable) as exc:
        for name in names:
            mv.absent[name] = type(exc).__name__
        return None
    return result


def compute_metric_vector(sample, scorer: LmScorer, embedder, checker, conditioned: bool = False) -> MetricVector:
    """Every metric computable for ``sample``; the rest go to ``absent``."""
    text = sample.text
    if not text or not text.strip():
        raise EmptyInput(f"sample {getattr(sample, 'id', '?')} has empty text")
    tokens = tokenize(text)
    if len(tokens) == 0:
        raise EmptyInput(f"sample {getattr(sample, 'id', '?')} has no word tokens")
    sentences = split_sentences(text)
    mv = MetricVector()

    mv.ttr = ttr(tokens)
    pps = _attempt(
        mv,
        ("perplexity", "sentence_pp_mean", "burstiness_pp_var"),
        lambda: sentence_perplexities(scorer, sentences, conditioned=conditioned),
    )
    if pps is not None:
        mv.perplexity = pps.document_pp
        mv.sentence_pp_mean = pps.mean_sentence_pp
        mv.burstiness_pp_var = _attempt(mv, ("burstiness_pp_var",), lambda: burstiness_pp_var(pps.sentence_pps))
    mv.burstiness_len_cv = _attempt(mv, ("burstiness_len_cv",), lambda: burstiness_len_cv(sentences))
    mv.grammar_error_rate = _attempt(mv, ("grammar_error_rate",), lambda: grammar_error_rate(sentences, checker))
    mv.semantic_coherence = _attempt(mv, ("semantic_coherence",), lambda: semantic_coherence(sentences, embedder))

    reference = getattr(sample, "reference", None)
    if reference:
        ref_tokens = tokenize(reference)
        scores = _attempt(mv, OVERLAP_FIELDS, lambda: overlap.overlap_scores(tokens, ref_tokens))
        if scores is not None:
            mv.bleu = scores.bleu
            mv.rouge1_f1 = scores.rouge1.f1
            mv.rouge2_f1 = scores.rouge2.f1
            mv.rougeL_f1 = scores.rougeL.f1
    else:
        for name in OVERLAP_FIELDS:
            mv.absent[name] = "NoReference"
    return mv
