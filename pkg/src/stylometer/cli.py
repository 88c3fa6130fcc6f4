"""Command-line entry point: ``stylometer <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 endpoint error.
"""

import argparse
import json
import logging
import os
import sys

from . import __version__
from .analysis import all_endpoints_failed, analyze_samples, builtin_scorer
from .corpus import (
    TASKS,
    CompletionClient,
    GenerationConfig,
    LLADA_CONFIG,
    LLAMA_CONFIG,
    generate_corpus,
    ingest_csv,
    load_results,
    load_samples,
    sample_corpus,
    save_results,
    save_samples,
)
from .detectors import (
    DetectGptConfig,
    GPTZERO_FEATURES,
    LogisticModel,
    load_detector_config,
    train_logistic,
)
from .errors import (
    AllEndpointsFailed,
    DegenerateLabels,
    MissingLabels,
    StylometerError,
    UsageError,
)
from .lm_scoring import SCORER_URL_ENV, HttpScorer, UniformScorer
from .metrics import EMBED_URL_ENV, GRAMMAR_URL_ENV, HashEmbedder, HttpEmbedder, LanguageToolChecker, RuleChecker
from .report import build_report, detect_records, emit_boxplots

log = logging.getLogger("stylometer")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


# --- subcommands -------------------------------------------------------------------


def cmd_ingest(args):
    malformed = []
    samples = ingest_csv(args.csv, malformed)
    save_samples(samples, args.out)
    print(f"ingested {len(samples)} samples, skipped {len(malformed)} row(s) -> {args.out}", file=sys.stderr)
    return 0


def cmd_sample(args):
    samples = load_samples(args.corpus)
    chosen = sample_corpus(samples, args.n, args.seed)
    save_samples(chosen, args.out)
    print(f"sampled {len(chosen)} of {len(samples)} -> {args.out}", file=sys.stderr)
    return 0


def _parse_model_urls(pairs):
    out = {}
    for p in pairs or []:
        label, sep, url = p.partition("=")
        if not sep or not label or not url:
            raise UsageError(f"--model-url expects LABEL=URL, got {p!r}")
        out[label] = url
    if not out:
        raise UsageError("at least one --model-url LABEL=URL is required")
    return out


def _default_gen_config(label):
    return LLADA_CONFIG if "llada" in label.lower() else LLAMA_CONFIG


def cmd_generate(args):
    urls = _parse_model_urls(args.model_url)
    overrides = {}
    if args.gen_config:
        with open(args.gen_config, encoding="utf-8") as f:
            overrides = json.load(f)
    configs = {
        label: GenerationConfig.from_dict(overrides[label]) if label in overrides else _default_gen_config(label)
        for label in urls
    }
    clients = {label: CompletionClient(url, model=label) for label, url in urls.items()}
    tasks = tuple(t.strip() for t in args.tasks.split(",") if t.strip())
    for t in tasks:
        if t not in TASKS:
            raise UsageError(f"unknown task {t!r}; choose from {', '.join(TASKS)}")
    sources = load_samples(args.corpus)
    generated = generate_corpus(sources, clients, tasks, configs, jobs=args.jobs,
                                record_latency=not args.no_latency)
    expected = len(sources) * len(tasks) * len(clients)
    if len(generated) != expected:
        raise StylometerError(f"generated {len(generated)} samples, expected {expected}")
    out = generated if args.no_sources else sorted(list(sources) + generated, key=lambda s: s.id)
    save_samples(out, args.out)
    print(f"generated {len(generated)} samples ({len(sources)} sources x {len(tasks)} tasks x "
          f"{len(clients)} models) -> {args.out}", file=sys.stderr)
    return 0


def _make_scorer(args, samples):
    url = args.scorer_url or os.environ.get(SCORER_URL_ENV)
    if args.scorer == "http" or (args.scorer == "auto" and url):
        if not url:
            raise UsageError(f"--scorer http needs --scorer-url or {SCORER_URL_ENV}")
        return HttpScorer(url)
    if args.scorer == "uniform":
        return UniformScorer(args.uniform_vocab)
    training = None
    if args.ngram_corpus:
        training = [s.text for s in load_samples(args.ngram_corpus)]
    return builtin_scorer(samples, n=args.ngram_order, k=args.ngram_k, training_texts=training)


def cmd_analyze(args):
    samples = load_samples(args.corpus)
    scorer = _make_scorer(args, samples)
    embed_url = args.embed_url or os.environ.get(EMBED_URL_ENV)
    grammar_url = args.grammar_url or os.environ.get(GRAMMAR_URL_ENV)
    embedder = HttpEmbedder(embed_url) if embed_url and not args.builtin_embedder else HashEmbedder()
    checker = LanguageToolChecker(grammar_url) if grammar_url and not args.builtin_checker else RuleChecker()

    detectgpt = None
    if args.detectgpt:
        detectgpt = load_detector_config(args.detector_config)[0] if args.detector_config else DetectGptConfig()
        detectgpt = DetectGptConfig(detectgpt.k, detectgpt.rho, detectgpt.threshold, args.seed)

    log.info("analyzing %d samples with scorer %s", len(samples), getattr(scorer, "name", scorer))
    records, failures = analyze_samples(samples, scorer, embedder, checker, detectgpt,
                                        jobs=args.jobs, conditioned=args.conditioned)
    save_results(records, args.out)
    _write_jsonl(args.out + ".failures.jsonl", failures)
    print(f"{len(records)} records, {len(failures)} failures -> {args.out}", file=sys.stderr)
    if all_endpoints_failed(records):
        raise AllEndpointsFailed("every sample lost its endpoint-backed metrics")
    return 0


def cmd_compare(args):
    report = build_report(load_results(args.results))
    text = report.to_text()
    if args.text_out:
        with open(args.text_out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8", newline="\n") as f:
            f.write(report.to_json())
    return 0


def cmd_train_detector(args):
    records = load_results(args.results)
    if args.task:
        records = [r for r in records if r.origin == "human" or r.task == args.task]
    X, y = [], []
    for r in records:
        if not r.origin:
            raise MissingLabels(f"record {r.id} has no origin label")
        feats = [r.metrics.get(n) for n in GPTZERO_FEATURES]
        if any(f is None for f in feats):
            continue
        X.append(feats)
        y.append(0 if r.origin == "human" else 1)
    if len(set(y)) < 2:
        raise DegenerateLabels("need usable records from both human and model origins")
    model = train_logistic(X, y, args.lr, args.max_iters, args.tolerance)
    model.save(args.out)
    print(f"trained on {len(y)} records in {model.iterations} iterations -> {args.out}", file=sys.stderr)
    return 0


def cmd_detect(args):
    records = load_results(args.results)
    threshold = args.threshold
    model = None
    if args.detector == "gptzero":
        if not args.model:
            raise UsageError("--detector gptzero needs --model (see train-detector)")
        model = LogisticModel.load(args.model)
        if threshold is None and args.detector_config:
            threshold = load_detector_config(args.detector_config)[1]
    elif threshold is None and args.detector_config:
        threshold = load_detector_config(args.detector_config)[0].threshold
    verdicts, failures, summary = detect_records(records, args.detector, model, threshold)
    _write_json(args.out, {"detector": args.detector, "summary": summary, "verdicts": verdicts, "failures": failures})
    return 0


def cmd_plot(args):
    written = emit_boxplots(load_results(args.results), args.out_dir)
    print(f"wrote {len(written)} SVG file(s) to {args.out_dir}", file=sys.stderr)
    return 0


# --- parser -------------------------------------------------------------------------


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for sampling and perturbations")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for per-sample work")
    common.add_argument("--config", help="JSON file whose keys mirror the long flags")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="stylometer", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"stylometer {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("ingest", parents=[common], help="CSV (titles,summaries,terms) -> samples JSONL")
    s.add_argument("csv")
    s.add_argument("out")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("sample", parents=[common], help="seeded random subset of a corpus")
    s.add_argument("corpus")
    s.add_argument("out")
    s.add_argument("-n", type=int, required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("generate", parents=[common], help="query model endpoints for each task")
    s.add_argument("corpus")
    s.add_argument("out")
    s.add_argument("--model-url", action="append", metavar="LABEL=URL", help="repeat once per model")
    s.add_argument("--tasks", default=",".join(TASKS))
    s.add_argument("--gen-config", help='JSON {"label": {"temperature": .., "top_p": .., ...}}')
    s.add_argument("--no-sources", action="store_true", help="write only generated samples")
    s.add_argument("--no-latency", action="store_true", help="omit wall-clock latency from meta")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("analyze", parents=[common], help="compute metrics for every sample")
    s.add_argument("corpus")
    s.add_argument("out")
    s.add_argument("--scorer", choices=["auto", "ngram", "uniform", "http"], default="auto")
    s.add_argument("--scorer-url")
    s.add_argument("--embed-url")
    s.add_argument("--grammar-url")
    s.add_argument("--builtin-embedder", action="store_true")
    s.add_argument("--builtin-checker", action="store_true")
    s.add_argument("--ngram-corpus", help="samples JSONL to train the built-in n-gram scorer on")
    s.add_argument("--ngram-order", type=int, default=2)
    s.add_argument("--ngram-k", type=float, default=1.0)
    s.add_argument("--uniform-vocab", type=int, default=50)
    s.add_argument("--conditioned", action="store_true", help="score sentences in document context")
    s.add_argument("--detectgpt", action="store_true", help="also compute perturbation discrepancy")
    s.add_argument("--detector-config")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("compare", parents=[common], help="group summaries and Mann-Whitney tests")
    s.add_argument("results")
    s.add_argument("--json-out")
    s.add_argument("--text-out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("train-detector", parents=[common], help="fit the perplexity/burstiness classifier")
    s.add_argument("results")
    s.add_argument("--out", required=True)
    s.add_argument("--task", help="restrict model samples to one task")
    s.add_argument("--lr", type=float, default=0.1)
    s.add_argument("--max-iters", type=int, default=5000)
    s.add_argument("--tolerance", type=float, default=1e-6)
    s.set_defaults(func=cmd_train_detector)

    s = sub.add_parser("detect", parents=[common], help="verdicts and per-origin false-negative rates")
    s.add_argument("results")
    s.add_argument("--detector", choices=["gptzero", "detectgpt"], default="gptzero")
    s.add_argument("--model")
    s.add_argument("--detector-config")
    s.add_argument("--threshold", type=float)
    s.add_argument("--out", default="-")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("plot", parents=[common], help="SVG box plots per task and metric")
    s.add_argument("results")
    s.add_argument("out_dir")
    s.set_defaults(func=cmd_plot)
    return p, sub


def _apply_config(parser, subparsers, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config, encoding="utf-8") as f:
            cfg = json.load(f)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    defaults = {k.replace("-", "_"): v for k, v in cfg.items()}
    parser.set_defaults(**defaults)
    for sp in subparsers.choices.values():
        sp.set_defaults(**defaults)


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, subparsers = build_parser()
    try:
        _apply_config(parser, subparsers, argv)
    except UsageError as exc:
        print(f"stylometer: {exc}", file=sys.stderr)
        return 1
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StylometerError as exc:
        print(f"stylometer: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"stylometer: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
