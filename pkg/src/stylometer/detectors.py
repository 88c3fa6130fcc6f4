"""Detector proxies: perturbation discrepancy and a perplexity/burstiness logistic classifier."""

import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Protocol

import numpy as np

from .errors import (
    DegenerateLabels,
    DimensionMismatch,
    EmptyInput,
    ModelUnreadable,
    NonFiniteFeature,
    TooFewSentences,
)
from .lm_scoring import sentence_perplexities
from .metrics import burstiness_len_cv
from .segmentation import split_sentences, tokenize

HUMAN = "human"
AI = "ai"

GPTZERO_FEATURES = ("sentence_pp_mean", "burstiness_len_cv")


@dataclass(frozen=True)
class DetectorVerdict:
    score: float
    label: str
    threshold: float
    detector_name: str

    def to_dict(self):
        return {
            "detector": self.detector_name,
            "score": self.score,
            "label": self.label,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["score"]), d["label"], float(d["threshold"]), d["detector"])


def label_for(score, threshold):
    # ties go to human: a detector should not accuse on a boundary score
    return AI if score > threshold else HUMAN


# --- perturbation ---------------------------------------------------------------


class Perturber(Protocol):
    def perturb(self, text: str, seed: int) -> str:
        ...


class IdentityPerturber:
    def perturb(self, text, seed):
        return text


@lru_cache(maxsize=None)
def default_synonyms():
    data = resources.files("stylometer").joinpath("data/synonyms.json")
    return json.loads(data.read_text(encoding="utf-8"))


def n_positions(rho, n):
    # guard against 0.15 * 20 == 3.0000000000000004 rounding up to 4
    return min(n, max(0, math.ceil(rho * n - 1e-9)))


def _core(word):
    m = tokenize(word)
    return m.tokens[0] if len(m) == 1 else None


def perturb_baseline(text: str, seed: int, rho: float = 0.15, synonyms=None) -> str:
    """Seeded synonym-replace/drop perturbation over whitespace-separated words.

    Algorithm, with ``rng = random.Random(seed)``:

    1. ``m = ceil(rho * N)`` over the N whitespace words; if ``m == 0`` the
       input is returned unchanged.
    2. ``positions = sorted(rng.sample(range(N), m))``.
    3. For each position in ascending order: if the word's single lowercased
       token has synonyms, replace it with ``alts[rng.randrange(len(alts))]``
       (keeping surrounding punctuation and an initial capital); otherwise drop it.
    4. Join the surviving words with single spaces.
    """
    if not text or not text.strip():
        raise EmptyInput("cannot perturb empty text")
    if synonyms is None:
        synonyms = default_synonyms()
    words = text.split()
    m = n_positions(rho, len(words))
    if m == 0:
        return text
    rng = random.Random(seed)
    positions = sorted(rng.sample(range(len(words)), m))
    out = list(words)
    for i in positions:
        word = words[i]
        core = _core(word)
        alts = synonyms.get(core) if core else None
        if not alts:
            out[i] = None
            continue
        choice = alts[rng.randrange(len(alts))]
        lo = word.lower().find(core)
        original = word[lo:lo + len(core)]
        if original[:1].isupper():
            choice = choice[:1].upper() + choice[1:]
        out[i] = word[:lo] + choice + word[lo + len(core):]
    return " ".join(w for w in out if w is not None)


class SynonymPerturber:
    def __init__(self, rho: float = 0.15, synonyms=None):
        if not 0 < rho < 1:
            raise ValueError("rho must be in (0, 1)")
        self.rho = rho
        self.synonyms = synonyms

    def perturb(self, text, seed):
        return perturb_baseline(text, seed, self.rho, self.synonyms)


# --- DetectGPT ------------------------------------------------------------------


@dataclass(frozen=True)
class DetectGptConfig:
    k: int = 10
    rho: float = 0.15
    threshold: float = 0.0
    base_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("DetectGPT needs at least one perturbation (k >= 1)")


def text_logprob(scorer, text) -> float:
    """Total log-probability of ``text`` under ``scorer`` (empty text scores 0)."""
    toks = tokenize(text)
    if len(toks) == 0:
        return 0.0
    return math.fsum(scorer.logprobs(toks))


def detect_gpt_score(scorer, perturber, text: str, config: DetectGptConfig = None, jobs: int = 1) -> DetectorVerdict:
    """``log P(x)`` minus the mean log-probability of K perturbations seeded ``base_seed + i``."""
    config = config or DetectGptConfig()
    if config.k < 1:
        raise ValueError("k must be >= 1")
    if not text or not text.strip():
        raise EmptyInput("cannot score empty text")
    original = text_logprob(scorer, text)

    def one(i):
        return text_logprob(scorer, perturber.perturb(text, config.base_seed + i))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            perturbed = list(pool.map(one, range(config.k)))
    else:
        perturbed = [one(i) for i in range(config.k)]
    # mean of differences rather than difference of means: exactly 0 for identical texts
    score = math.fsum(original - lp for lp in perturbed) / config.k
    return DetectorVerdict(score, label_for(score, config.threshold), config.threshold, "detectgpt")


# --- GPTZero-style classifier ---------------------------------------------------------


def gptzero_features(sample, scorer) -> list:
    """``[mean sentence perplexity, sentence-length CV]`` for one sample."""
    text = getattr(sample, "text", sample)
    sentences = split_sentences(text)
    if len(sentences) < 2:
        raise TooFewSentences(f"need >= 2 sentences, got {len(sentences)}")
    pps = sentence_perplexities(scorer, sentences)
    return [pps.mean_sentence_pp, burstiness_len_cv(sentences)]


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(params, X, y):
    """Mean cross-entropy; ``params`` is ``[w..., b]`` and ``X`` is already standardized."""
    w, b = params[:-1], params[-1]
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def logistic_gradient(params, X, y):
    w, b = params[:-1], params[-1]
    r = sigmoid(X @ w + b) - y
    return np.concatenate([X.T @ r / len(y), [np.mean(r)]])


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray
    feature_names: tuple = GPTZERO_FEATURES
    iterations: int = 0
    loss_history: list = field(default_factory=list, repr=False)

    def standardize(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.weights):
            raise DimensionMismatch(f"expected {len(self.weights)} features, got {X.shape[1]}")
        return sigmoid(self.standardize(X) @ self.weights + self.bias)

    def to_dict(self):
        return {
            "feature_names": list(self.feature_names),
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "mean": [float(m) for m in self.mean],
            "std": [float(s) for s in self.std],
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d):
        try:
            model = cls(
                weights=np.array(d["weights"], dtype=float),
                bias=float(d["bias"]),
                mean=np.array(d["mean"], dtype=float),
                std=np.array(d["std"], dtype=float),
                feature_names=tuple(d.get("feature_names", GPTZERO_FEATURES)),
                iterations=int(d.get("iterations", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelUnreadable(f"bad model file: {exc}") from exc
        n = len(model.weights)
        if not (len(model.mean) == len(model.std) == len(model.feature_names) == n):
            raise ModelUnreadable("model vectors have inconsistent lengths")
        if np.any(model.std <= 0):
            raise ModelUnreadable("standardization stds must be > 0")
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as f:
                d = json.load(f)
        except (OSError, ValueError) as exc:
            raise ModelUnreadable(f"{path}: {exc}") from exc
        return cls.from_dict(d)


def train_logistic(features, labels, learning_rate=0.1, max_iters=1000, tolerance=1e-6,
                   feature_names=GPTZERO_FEATURES) -> LogisticModel:
    """Full-batch gradient descent from zero weights on standardized features.

    Stops after ``max_iters`` updates or once the gradient's max-norm drops
    below ``tolerance``. A constant feature column gets std 1 so it
    standardizes to zero instead of dividing by zero.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise DimensionMismatch("features must be an (n, d) matrix matching labels")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("features contain NaN or infinity")
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("labels must be 0 or 1")
    if len(np.unique(y)) < 2:
        raise DegenerateLabels("training needs at least one example of each class")
    if len(feature_names) != X.shape[1]:
        feature_names = tuple(f"f{i}" for i in range(X.shape[1]))

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0] = 1.0
    Z = (X - mean) / std

    params = np.zeros(X.shape[1] + 1)
    history = [logistic_loss(params, Z, y)]
    it = 0
    while it < max_iters:
        grad = logistic_gradient(params, Z, y)
        if np.max(np.abs(grad)) < tolerance:
            break
        params = params - learning_rate * grad
        it += 1
        history.append(logistic_loss(params, Z, y))
    return LogisticModel(params[:-1].copy(), float(params[-1]), mean, std,
                         tuple(feature_names), it, history)


def classify(model: LogisticModel, features, threshold: float = 0.5) -> DetectorVerdict:
    f = np.asarray(features, dtype=float)
    if f.ndim != 1 or len(f) != len(model.weights):
        raise DimensionMismatch(f"expected {len(model.weights)} features, got {f.size}")
    p = float(model.predict_proba(f)[0])
    return DetectorVerdict(p, label_for(p, threshold), threshold, "gptzero")


def load_detector_config(path):
    """Read ``{"detectgpt": {...}, "gptzero": {...}}``; missing sections take defaults."""
    with open(path, encoding="utf-8") as f:
        raw = json.load(f)
    dg = raw.get("detectgpt", {})
    base = DetectGptConfig()
    detectgpt = DetectGptConfig(
        k=int(dg.get("k", base.k)),
        rho=float(dg.get("rho", base.rho)),
        threshold=float(dg.get("threshold", base.threshold)),
        base_seed=int(dg.get("base_seed", base.base_seed)),
    )
    gz_threshold = float(raw.get("gptzero", {}).get("threshold", 0.5))
    return detectgpt, gz_threshold
