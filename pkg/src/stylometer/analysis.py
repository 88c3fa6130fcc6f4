"""Per-sample analysis: metric vectors and optional detector scores for a corpus."""

import logging
from concurrent.futures import ThreadPoolExecutor

from . import __version__
from .corpus import HUMAN, ResultRecord
from .detectors import DetectGptConfig, SynonymPerturber, detect_gpt_score
from .errors import EndpointError, StylometerError
from .lm_scoring import train_ngram
from .metrics import compute_metric_vector
from .segmentation import tokenize

log = logging.getLogger(__name__)

ENDPOINT_REASONS = {"ScorerUnavailable", "CheckerUnavailable", "EmbedderUnavailable"}


def builtin_scorer(samples, n=2, k=1.0, training_texts=None):
    """Add-k n-gram trained on ``training_texts``, else on the human originals, else on everything."""
    if training_texts is None:
        texts = [s.text for s in samples if s.origin == HUMAN and s.text.strip()]
        if not texts:
            texts = [s.text for s in samples if s.text.strip()]
    else:
        texts = list(training_texts)
    return train_ngram([tokenize(t) for t in texts], n=n, k=k)


def analyze_sample(sample, scorer, embedder, checker, detectgpt=None, perturber=None, conditioned=False):
    mv = compute_metric_vector(sample, scorer, embedder, checker, conditioned=conditioned)
    verdicts = []
    if detectgpt is not None:
        perturber = perturber or SynonymPerturber(detectgpt.rho)
        try:
            verdicts.append(detect_gpt_score(scorer, perturber, sample.text, detectgpt).to_dict())
        except EndpointError as exc:
            mv.absent["detectgpt"] = type(exc).__name__
    return ResultRecord(
        id=sample.id,
        origin=sample.origin,
        task=sample.task,
        metrics=mv.values(),
        absent=mv.absent,
        verdicts=verdicts,
        version=__version__,
        scorer=getattr(scorer, "name", type(scorer).__name__),
    )


def analyze_samples(samples, scorer, embedder, checker, detectgpt: DetectGptConfig = None,
                    jobs=1, conditioned=False, progress_every=50):
    """Analyze every sample; returns ``(records, failures)`` both in input order.

    A sample that cannot be analyzed at all (e.g. empty text) becomes a
    failure entry naming it; the run continues.
    """
    samples = list(samples)

    def run(sample):
        try:
            return analyze_sample(sample, scorer, embedder, checker, detectgpt, conditioned=conditioned), None
        except StylometerError as exc:
            return None, {"id": sample.id, "error": type(exc).__name__, "message": str(exc)}

    results = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for i, res in enumerate(pool.map(run, samples), start=1):
                results.append(res)
                if progress_every and i % progress_every == 0:
                    log.info("analyzed %d/%d samples", i, len(samples))
    else:
        for i, s in enumerate(samples, start=1):
            results.append(run(s))
            if progress_every and i % progress_every == 0:
                log.info("analyzed %d/%d samples", i, len(samples))
    records = [r for r, _ in results if r is not None]
    failures = [f for _, f in results if f is not None]
    log.info("analyzed %d samples, %d failed", len(records), len(failures))
    return records, failures


def all_endpoints_failed(records):
    """True when every record lost every endpoint-backed metric it attempted."""
    if not records:
        return False
    for r in records:
        reasons = set(r.absent.values())
        if not reasons & ENDPOINT_REASONS:
            return False
        if r.metrics.get("perplexity") is not None:
            return False
    return True
