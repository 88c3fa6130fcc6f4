"""Stylometric analysis and AI-text detector proxies."""

__version__ = "0.1.0"

from .segmentation import tokenize, split_sentences  # noqa: E402
from .lm_scoring import UniformScorer, NGramModel, HttpScorer, train_ngram, perplexity, sentence_perplexities  # noqa: E402
from .metrics import (  # noqa: E402
    MetricVector,
    HashEmbedder,
    RuleChecker,
    burstiness_pp_var,
    burstiness_len_cv,
    ttr,
    grammar_error_rate,
    semantic_coherence,
    compute_metric_vector,
)
from .overlap import bleu, rouge_n, rouge_l  # noqa: E402
from .stats import descriptive, mann_whitney_u, compare_groups  # noqa: E402
