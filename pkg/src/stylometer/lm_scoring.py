"""Autoregressive scoring contract and perplexity.

A scorer returns one natural-log probability per token, each conditioned on
the tokens before it. Two scorers ship in-process (uniform and add-k n-gram);
``HttpScorer`` talks to a remote GPT-2-class model over JSON.
"""

import math
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Protocol

import requests

from .errors import EmptyCorpus, EmptyInput, ScorerUnavailable
from .segmentation import SentenceList, TokenSequence, tokenize

BOS = "<s>"
UNK = "<unk>"

SCORER_URL_ENV = "STYLOMETER_SCORER_URL"


class LmScorer(Protocol):
    name: str

    def logprobs(self, tokens: TokenSequence) -> list:
        ...


def _token_list(tokens):
    return list(getattr(tokens, "tokens", tokens))


class UniformScorer:
    """Every token gets probability 1/V regardless of context."""

    def __init__(self, vocab_size: int):
        if vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        self.vocab_size = vocab_size
        self.name = f"uniform-{vocab_size}"

    def logprobs(self, tokens):
        lp = -math.log(self.vocab_size)
        return [lp] * len(_token_list(tokens))


@dataclass(frozen=True)
class NGramModel:
    """Add-k smoothed n-gram model with begin-of-text padding.

    ``P(w | ctx) = (c(ctx, w) + k) / (c(ctx) + k V)`` where V counts the
    training vocabulary plus the unknown symbol. Tokens outside the
    vocabulary (in the target or the context) are mapped to ``<unk>``.
    """

    n: int
    k: float
    vocab: frozenset
    ngram_counts: dict = field(repr=False)
    context_counts: dict = field(repr=False)

    @property
    def vocab_size(self):
        return len(self.vocab)

    @property
    def name(self):
        return f"ngram-n{self.n}-k{self.k:g}-v{self.vocab_size}"

    def _map(self, tok):
        return tok if tok in self.vocab else UNK

    def prob(self, token, context=()):
        width = self.n - 1
        ctx = ()
        if width:
            padded = (BOS,) * width + tuple(context)
            ctx = tuple(t if t == BOS else self._map(t) for t in padded[-width:])
        c = self.ngram_counts.get(ctx, {}).get(self._map(token), 0)
        total = self.context_counts.get(ctx, 0)
        return (c + self.k) / (total + self.k * self.vocab_size)

    def distribution(self, context=()):
        return {w: self.prob(w, context) for w in sorted(self.vocab)}

    def logprobs(self, tokens, context=()):
        """Log-probabilities of ``tokens``; ``context`` precedes them (default: begin of text)."""
        width = self.n - 1
        history = list(context)
        out = []
        for tok in _token_list(tokens):
            ctx = history[max(0, len(history) - width):] if width else ()
            out.append(math.log(self.prob(tok, ctx)))
            history.append(tok)
        return out


def train_ngram(corpus, n: int = 2, k: float = 1.0) -> NGramModel:
    """Count order-``n`` events over ``corpus`` (token sequences or token lists)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not k > 0:
        raise ValueError("k must be > 0")
    docs = [_token_list(doc) for doc in corpus]
    if not docs or not any(docs):
        raise EmptyCorpus("cannot train an n-gram model on an empty corpus")

    vocab = {tok for doc in docs for tok in doc}
    vocab.add(UNK)
    ngrams = defaultdict(Counter)
    contexts = Counter()
    for doc in docs:
        padded = [BOS] * (n - 1) + doc
        for i in range(n - 1, len(padded)):
            ctx = tuple(padded[i - n + 1:i])
            ngrams[ctx][padded[i]] += 1
            contexts[ctx] += 1
    return NGramModel(
        n=n,
        k=float(k),
        vocab=frozenset(vocab),
        ngram_counts={c: dict(v) for c, v in ngrams.items()},
        context_counts=dict(contexts),
    )


class HttpScorer:
    """Client for ``POST /score`` returning the remote model's own tokens and log-probs.

    The remote side tokenizes raw text itself, so the returned list follows
    its subword tokens rather than ours.
    """

    def __init__(self, url, timeout=60.0, session=None):
        url = url.rstrip("/")
        self.url = url if url.endswith("/score") else url + "/score"
        self.timeout = timeout
        self.session = session or requests.Session()
        self.name = f"http:{self.url}"

    @classmethod
    def from_env(cls):
        url = os.environ.get(SCORER_URL_ENV)
        return cls(url) if url else None

    def score_text(self, text):
        try:
            resp = self.session.post(self.url, json={"text": text}, timeout=self.timeout)
        except requests.RequestException as exc:
            raise ScorerUnavailable(f"{self.url}: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerUnavailable(f"{self.url}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            toks = list(body["tokens"])
            lps = [float(x) for x in body["logprobs"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise ScorerUnavailable(f"{self.url}: malformed response: {exc}") from exc
        if len(toks) != len(lps):
            raise ScorerUnavailable(f"{self.url}: {len(toks)} tokens but {len(lps)} logprobs")
        if any(lp > 0 or math.isnan(lp) for lp in lps):
            raise ScorerUnavailable(f"{self.url}: log-probabilities must be <= 0")
        return toks, lps

    def logprobs(self, tokens):
        text = tokens.text if isinstance(tokens, TokenSequence) else " ".join(tokens)
        return self.score_text(text)[1]


def perplexity_from_logprobs(logprobs) -> float:
    if len(logprobs) == 0:
        raise EmptyInput("perplexity of an empty token sequence is undefined")
    return math.exp(-math.fsum(logprobs) / len(logprobs))


def perplexity(scorer: LmScorer, tokens) -> float:
    """exp of the mean negative log-probability the scorer assigns."""
    if isinstance(tokens, str):
        tokens = tokenize(tokens)
    if len(tokens) == 0:
        raise EmptyInput("perplexity of an empty token sequence is undefined")
    return perplexity_from_logprobs(scorer.logprobs(tokens))


@dataclass(frozen=True)
class PerplexityResult:
    document_pp: float
    sentence_pps: list

    @property
    def mean_sentence_pp(self):
        return math.fsum(self.sentence_pps) / len(self.sentence_pps)


def sentence_perplexities(scorer: LmScorer, sentences: SentenceList, conditioned: bool = False) -> PerplexityResult:
    """Per-sentence perplexities plus the document perplexity.

    By default each sentence is scored from an empty context. With
    ``conditioned=True`` the document is scored once and the per-token
    log-probs are sliced by sentence, which requires a word-level scorer.
    """
    if len(sentences) == 0:
        raise EmptyInput("no sentences to score")
    doc_tokens = tokenize(sentences.text)
    doc_lps = scorer.logprobs(doc_tokens)
    document_pp = perplexity_from_logprobs(doc_lps)

    if conditioned:
        if len(doc_lps) != len(doc_tokens):
            raise ValueError("conditioned mode needs a scorer aligned with word tokens")
        pps, pos = [], 0
        for s in sentences:
            n = len(s.tokens)
            pps.append(perplexity_from_logprobs(doc_lps[pos:pos + n]))
            pos += n
    else:
        pps = [perplexity(scorer, s.tokens) for s in sentences]
    return PerplexityResult(document_pp, pps)
