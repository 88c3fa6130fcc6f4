"""Corpus data model, ingestion, generation harness and JSONL persistence."""

import csv
import hashlib
import json
import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import requests

from .errors import (
    CorpusUnreadable,
    EmptyCompletion,
    EndpointError,
    EndpointUnavailable,
    MissingColumn,
    MissingField,
    NotEnoughSamples,
    SchemaViolation,
)

log = logging.getLogger(__name__)

HUMAN = "human"
TASKS = ("rephrase", "generation")
SOURCE = "source"

PROMPT_TEMPLATES = {
    "rephrase": "Rephrase: {text}",
    "generation": "Write an article abstract about: {title}",
}

SAMPLE_KEYS = ("id", "origin", "task", "text", "reference", "title", "meta")
REQUIRED_SAMPLE_KEYS = ("id", "origin", "task", "text")


def normalize_ws(s):
    return " ".join(s.split())


def content_id(*parts):
    h = hashlib.sha256("\x1f".join(parts).encode("utf-8"))
    return h.hexdigest()[:16]


@dataclass
class TextSample:
    id: str
    origin: str
    task: str
    text: str
    reference: Optional[str] = None
    title: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task == "rephrase" and self.reference is None:
            raise SchemaViolation(f"sample {self.id}: rephrase samples need a reference")
        if self.origin == HUMAN and self.task != SOURCE:
            raise SchemaViolation(f"sample {self.id}: human samples must have task 'source'")

    def to_dict(self):
        d = {"id": self.id, "origin": self.origin, "task": self.task, "text": self.text}
        if self.reference is not None:
            d["reference"] = self.reference
        if self.title is not None:
            d["title"] = self.title
        d["meta"] = self.meta
        return d


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 0.0
    top_p: float = 1.0
    max_new_tokens: int = 128
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")

    def to_dict(self):
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_new_tokens": self.max_new_tokens,
            "extra": dict(self.extra),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            temperature=float(d.get("temperature", 0.0)),
            top_p=float(d.get("top_p", 1.0)),
            max_new_tokens=int(d.get("max_new_tokens", 128)),
            extra=dict(d.get("extra", {})),
        )


# The decoding settings used for the two model families.
LLAMA_CONFIG = GenerationConfig(0.0, 1.0, 128, {"do_sample": False})
LLADA_CONFIG = GenerationConfig(
    0.0, 1.0, 128,
    {"steps": 128, "gen_length": 128, "block_length": 32, "cfg_scale": 0.0, "remasking": "low_confidence"},
)


# --- ingestion ------------------------------------------------------------------------


def ingest_csv(path, malformed=None) -> list:
    """One human ``source`` sample per row of a ``titles,summaries,terms`` CSV.

    Rows with the wrong number of fields or an empty abstract are skipped
    with a warning; ``(row_index, reason)`` pairs are appended to
    ``malformed`` when a list is passed. Row indices are 1-based data rows.
    Duplicate title+abstract pairs keep the first occurrence.
    """
    if malformed is None:
        malformed = []
    try:
        f = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CorpusUnreadable(f"{path}: {exc}") from exc
    samples, seen = [], set()
    with f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, no header row") from None
        header = [h.strip() for h in header]
        for col in ("titles", "summaries", "terms"):
            if col not in header:
                raise MissingColumn(f"{path}: missing column {col!r}")
        idx = {c: header.index(c) for c in ("titles", "summaries", "terms")}
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                malformed.append((row_no, f"expected {len(header)} fields, got {len(row)}"))
                log.warning("%s: row %d skipped: field count %d", path, row_no, len(row))
                continue
            title = normalize_ws(row[idx["titles"]])
            abstract = normalize_ws(row[idx["summaries"]])
            if not abstract:
                malformed.append((row_no, "empty abstract"))
                log.warning("%s: row %d skipped: empty abstract", path, row_no)
                continue
            sid = content_id(title, abstract)
            if sid in seen:
                malformed.append((row_no, "duplicate"))
                log.warning("%s: row %d skipped: duplicate of an earlier row", path, row_no)
                continue
            seen.add(sid)
            samples.append(TextSample(
                id=sid, origin=HUMAN, task=SOURCE, text=abstract, title=title or None,
                meta={"terms": row[idx["terms"]].strip(), "row": row_no},
            ))
    if malformed:
        log.warning("%s: %d malformed row(s) skipped", path, len(malformed))
    return samples


def sample_corpus(samples, n: int, seed: int) -> list:
    """Seeded uniform sample without replacement.

    Input is first sorted by id so the result does not depend on input
    order; then ``random.Random(seed).sample(sorted_samples, n)``; the
    selection is returned sorted by id.
    """
    if n > len(samples):
        raise NotEnoughSamples(f"asked for {n} samples, only {len(samples)} available")
    if n < 0:
        raise ValueError("n must be >= 0")
    pool = sorted(samples, key=lambda s: s.id)
    chosen = random.Random(seed).sample(pool, n)
    return sorted(chosen, key=lambda s: s.id)


def build_prompt(sample, task: str) -> str:
    if task == "rephrase":
        if not sample.text:
            raise MissingField(f"sample {sample.id}: rephrase needs the abstract text")
        return PROMPT_TEMPLATES["rephrase"].format(text=sample.text)
    if task == "generation":
        if not sample.title:
            raise MissingField(f"sample {sample.id}: generation needs a title")
        return PROMPT_TEMPLATES["generation"].format(title=sample.title)
    raise ValueError(f"unknown task {task!r}")


# --- generation -----------------------------------------------------------------------


@dataclass(frozen=True)
class Completion:
    text: str
    latency_s: float
    attempts: int


class CompletionClient:
    """OpenAI-compatible ``POST /v1/chat/completions`` client with retries.

    Diffusion-specific decoder settings travel verbatim in an ``extra``
    object. Server errors (5xx) and connection failures are retried with
    exponential backoff; client errors (4xx) are not.
    """

    def __init__(self, url, model=None, attempts=3, backoff=0.5, timeout=120.0, session=None, sleep=time.sleep):
        url = url.rstrip("/")
        self.url = url if url.endswith("/chat/completions") else url + "/v1/chat/completions"
        self.model = model
        self.attempts = attempts
        self.backoff = backoff
        self.timeout = timeout
        self.session = session or requests.Session()
        self.sleep = sleep

    def request_body(self, prompt, config: GenerationConfig):
        body = {
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
            "top_p": config.top_p,
            "max_tokens": config.max_new_tokens,
        }
        if self.model:
            body["model"] = self.model
        if config.extra:
            body["extra"] = dict(config.extra)
        return body

    def complete(self, prompt, config: GenerationConfig) -> Completion:
        body = self.request_body(prompt, config)
        last = None
        t0 = time.perf_counter()
        for attempt in range(1, self.attempts + 1):
            try:
                resp = self.session.post(self.url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last = str(exc)
            else:
                if resp.status_code == 200:
                    text = _completion_text(resp)
                    if not text.strip():
                        raise EmptyCompletion(f"{self.url}: empty completion")
                    return Completion(text, time.perf_counter() - t0, attempt)
                if resp.status_code < 500:
                    log.error("%s: HTTP %d: %s", self.url, resp.status_code, resp.text[:500])
                    raise EndpointError(f"{self.url}: HTTP {resp.status_code}")
                last = f"HTTP {resp.status_code}"
                log.warning("%s: attempt %d failed: %s %s", self.url, attempt, last, resp.text[:200])
            if attempt < self.attempts:
                self.sleep(self.backoff * 2 ** (attempt - 1))
        raise EndpointUnavailable(f"{self.url}: gave up after {self.attempts} attempts ({last})")


def _completion_text(resp):
    try:
        body = resp.json()
        choice = body["choices"][0]
        if "message" in choice:
            return choice["message"]["content"] or ""
        return choice.get("text", "") or ""
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise EndpointError(f"malformed completion response: {exc}") from exc


def generate(endpoint, prompt, config: GenerationConfig) -> str:
    """Single completion; ``endpoint`` is a URL or a ``CompletionClient``."""
    client = endpoint if isinstance(endpoint, CompletionClient) else CompletionClient(endpoint)
    return client.complete(prompt, config).text


def generate_corpus(sources, clients: dict, tasks=TASKS, configs=None, jobs=1, record_latency=True) -> list:
    """Run every (source, task, model) prompt and return the generated samples.

    ``clients`` maps a model label to a ``CompletionClient``; ``configs``
    maps labels to a ``GenerationConfig`` (default: the zero-temperature
    config). Output is sorted by sample id regardless of ``jobs``.
    """
    configs = configs or {}
    jobs_list = [(s, task, label) for s in sources for task in tasks for label in sorted(clients)]

    def run(job):
        src, task, label = job
        cfg = configs.get(label, GenerationConfig())
        prompt = build_prompt(src, task)
        c = clients[label].complete(prompt, cfg)
        meta = {"source_id": src.id, "prompt": prompt, "generation_config": cfg.to_dict(), "attempts": c.attempts}
        if record_latency:
            meta["latency_s"] = round(c.latency_s, 6)
        return TextSample(
            id=content_id(src.id, task, label),
            origin=label,
            task=task,
            text=c.text.strip(),
            reference=src.text if task == "rephrase" else None,
            title=src.title,
            meta=meta,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(run, jobs_list))
    else:
        out = [run(j) for j in jobs_list]
    return sorted(out, key=lambda s: s.id)


# --- persistence -----------------------------------------------------------------------


def _dumps(obj):
    return json.dumps(obj, ensure_ascii=False, sort_keys=False, separators=(", ", ": "))


def _sorted_meta(meta):
    return json.loads(json.dumps(meta, sort_keys=True, ensure_ascii=False))


def save_samples(samples, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in samples:
            d = s.to_dict()
            d["meta"] = _sorted_meta(d["meta"])
            f.write(_dumps(d) + "\n")


def load_samples(path) -> list:
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise CorpusUnreadable(f"{path}: {exc}") from exc
    samples, seen = [], set()
    with f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except ValueError as exc:
                raise SchemaViolation(f"invalid JSON ({exc})", line_no) from exc
            if not isinstance(d, dict):
                raise SchemaViolation("expected a JSON object", line_no)
            unknown = set(d) - set(SAMPLE_KEYS)
            if unknown:
                raise SchemaViolation(f"unknown key(s) {sorted(unknown)}", line_no)
            missing = [k for k in REQUIRED_SAMPLE_KEYS if k not in d]
            if missing:
                raise SchemaViolation(f"missing key(s) {missing}", line_no)
            for k in ("id", "origin", "task", "text"):
                if not isinstance(d[k], str):
                    raise SchemaViolation(f"{k!r} must be a string", line_no)
            if not isinstance(d.get("meta", {}), dict):
                raise SchemaViolation("'meta' must be an object", line_no)
            if d["id"] in seen:
                raise SchemaViolation(f"duplicate id {d['id']!r}", line_no)
            seen.add(d["id"])
            try:
                samples.append(TextSample(
                    id=d["id"], origin=d["origin"], task=d["task"], text=d["text"],
                    reference=d.get("reference"), title=d.get("title"), meta=d.get("meta", {}),
                ))
            except SchemaViolation as exc:
                raise SchemaViolation(str(exc), line_no) from exc
    return samples


@dataclass
class ResultRecord:
    id: str
    origin: str
    task: str
    metrics: dict
    absent: dict
    verdicts: list
    version: str
    scorer: str

    def to_dict(self):
        return {
            "id": self.id,
            "origin": self.origin,
            "task": self.task,
            "metrics": self.metrics,
            "absent": dict(sorted(self.absent.items())),
            "verdicts": self.verdicts,
            "version": self.version,
            "scorer": self.scorer,
        }


RESULT_KEYS = ("id", "origin", "task", "metrics", "absent", "verdicts", "version", "scorer")


def save_results(records, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(_dumps(r.to_dict()) + "\n")


def load_results(path) -> list:
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise CorpusUnreadable(f"{path}: {exc}") from exc
    out = []
    with f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except ValueError as exc:
                raise SchemaViolation(f"invalid JSON ({exc})", line_no) from exc
            missing = [k for k in ("id", "metrics", "verdicts", "version", "scorer") if k not in d]
            if missing:
                raise SchemaViolation(f"missing key(s) {missing}", line_no)
            out.append(ResultRecord(
                id=d["id"], origin=d.get("origin"), task=d.get("task"), metrics=d["metrics"],
                absent=d.get("absent", {}), verdicts=d["verdicts"], version=d["version"], scorer=d["scorer"],
            ))
    return out
