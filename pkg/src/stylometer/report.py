"""Table-style group comparison reports, detection summaries and SVG box plots."""

import json
import math
import os
from dataclasses import dataclass
from html import escape
from itertools import combinations

import numpy as np

from .corpus import HUMAN, TASKS
from .detectors import AI, GPTZERO_FEATURES, DetectorVerdict, classify, label_for
from .errors import EmptyResults, InsufficientGroups, MissingLabels
from .stats import compare_groups, format_p

REPORT_METRICS = (
    "perplexity",
    "burstiness_len_cv",
    "ttr",
    "sentence_pp_mean",
    "burstiness_pp_var",
    "grammar_error_rate",
    "semantic_coherence",
    "bleu",
    "rouge1_f1",
    "rouge2_f1",
    "rougeL_f1",
)
# perplexity-scale metrics get two decimals, ratios three
_TWO_DECIMALS = {"perplexity", "sentence_pp_mean", "burstiness_pp_var"}


def fmt_value(metric, v):
    return f"{v:.2f}" if metric in _TWO_DECIMALS else f"{v:.3f}"


def fmt_cell(metric, summary):
    if summary.sd is None:
        return f"{fmt_value(metric, summary.mean)} (n=1)"
    return f"{fmt_value(metric, summary.mean)} ({fmt_value(metric, summary.sd)})"


def _group_order(labels):
    return sorted(labels, key=lambda g: (g != HUMAN, g))


def task_groups(records):
    """``{task: {group: [metrics dict, ...]}}`` with the human originals in every task."""
    humans = [r for r in records if r.origin == HUMAN]
    tasks = sorted({r.task for r in records if r.origin != HUMAN},
                   key=lambda t: (TASKS.index(t) if t in TASKS else len(TASKS), t))
    out = {}
    for task in tasks:
        groups = {}
        if humans:
            groups[HUMAN] = [r.metrics for r in humans]
        for r in records:
            if r.origin != HUMAN and r.task == task:
                groups.setdefault(r.origin, []).append(r.metrics)
        out[task] = {g: groups[g] for g in _group_order(groups)}
    return out


@dataclass
class ReportTable:
    tasks: list  # list of dicts, see build_report

    def to_json(self):
        return json.dumps({"tasks": self.tasks}, indent=2, ensure_ascii=False) + "\n"

    def to_text(self):
        lines = []
        for t in self.tasks:
            groups = t["groups"]
            lines.append(f"Task: {t['task']}")
            width = max([len("Metric")] + [len(r["metric"]) for r in t["rows"]]) + 2
            colw = max([18] + [len(g) + 2 for g in groups])
            lines.append("Metric".ljust(width) + "".join(g.ljust(colw) for g in groups).rstrip())
            for row in t["rows"]:
                cells = "".join(
                    (row["cells"][g]["display"] if g in row["cells"] else "-").ljust(colw) for g in groups
                )
                note = f"  [{row['note']}]" if row.get("note") else ""
                lines.append((row["metric"].ljust(width) + cells).rstrip() + note)
            pairs = t["pairs"]
            if pairs:
                lines.append("")
                lines.append("Mann-Whitney U, two-sided")
                pw = max(len(p) for p in pairs) + 2
                lines.append("Metric".ljust(width) + "".join(p.ljust(pw) for p in pairs).rstrip())
                for row in t["rows"]:
                    if not row["tests"]:
                        continue
                    cells = "".join(row["tests"][p]["display"].ljust(pw) for p in pairs)
                    lines.append((row["metric"].ljust(width) + cells).rstrip())
            lines.append("")
        return "\n".join(lines)


def build_report(records, metrics=REPORT_METRICS, exact_max_n=10) -> ReportTable:
    """Group summaries and pairwise tests per task, straight from result records."""
    if not records:
        raise EmptyResults("no result records")
    tasks = []
    for task, groups in task_groups(records).items():
        if len(groups) < 2:
            continue
        comp = compare_groups(groups, metrics=list(metrics), exact_max_n=exact_max_n)
        labels = list(groups)
        pair_names = [f"{a} vs {b}" for a, b in combinations(labels, 2)]
        rows = []
        for metric in metrics:
            summaries = comp.summaries.get(metric, {})
            if not summaries:
                continue
            cells = {
                g: {"n": s.n, "mean": s.mean, "sd": s.sd, "display": fmt_cell(metric, s)}
                for g, s in summaries.items()
            }
            tests = {}
            for (a, b), res in comp.tests.get(metric, {}).items():
                d = res.to_dict()
                d["display"] = format_p(res.p_value)
                tests[f"{a} vs {b}"] = d
            rows.append({"metric": metric, "cells": cells, "tests": tests,
                         "note": comp.skipped.get(metric)})
        tasks.append({"task": task, "groups": labels, "pairs": pair_names, "rows": rows})
    if not tasks:
        raise InsufficientGroups("no task has results from at least two origins")
    return ReportTable(tasks)


# --- detection ------------------------------------------------------------------------


def detect_records(records, detector="gptzero", model=None, threshold=None):
    """Verdicts per record plus per-origin confusion counts.

    ``gptzero`` classifies stored mean sentence perplexity and length CV
    with a trained ``LogisticModel``; ``detectgpt`` relabels the stored
    perturbation-discrepancy score against ``threshold``.
    """
    if not records:
        raise EmptyResults("no result records")
    verdicts, failures = [], []
    for r in records:
        if not r.origin:
            raise MissingLabels(f"record {r.id} has no origin label")
        if detector == "gptzero":
            if model is None:
                raise ValueError("gptzero detection needs a trained model")
            names = model.feature_names if set(model.feature_names) <= set(GPTZERO_FEATURES) else GPTZERO_FEATURES
            feats = [r.metrics.get(n) for n in names]
            if any(f is None for f in feats):
                failures.append({"id": r.id, "reason": "missing features"})
                continue
            v = classify(model, feats, 0.5 if threshold is None else threshold)
        elif detector == "detectgpt":
            stored = [d for d in r.verdicts if d.get("detector") == "detectgpt"]
            if not stored:
                failures.append({"id": r.id, "reason": "no detectgpt score"})
                continue
            v = DetectorVerdict.from_dict(stored[0])
            if threshold is not None:
                v = DetectorVerdict(v.score, label_for(v.score, threshold), threshold, v.detector_name)
        else:
            raise ValueError(f"unknown detector {detector!r}")
        verdicts.append({"id": r.id, "origin": r.origin, "task": r.task, **v.to_dict()})
    return verdicts, failures, confusion_summary(verdicts)


def confusion_summary(verdicts):
    by_origin = {}
    for v in verdicts:
        c = by_origin.setdefault(v["origin"], {"n": 0, "labeled_ai": 0, "labeled_human": 0})
        c["n"] += 1
        c["labeled_ai" if v["label"] == AI else "labeled_human"] += 1
    out = {"by_origin": {}, "false_negative_rate": {}, "false_positive_rate": None}
    for origin in _group_order(by_origin):
        c = by_origin[origin]
        out["by_origin"][origin] = c
        if origin == HUMAN:
            out["false_positive_rate"] = c["labeled_ai"] / c["n"]
        else:
            out["false_negative_rate"][origin] = c["labeled_human"] / c["n"]
    return out


# --- box plots ----------------------------------------------------------------------


@dataclass(frozen=True)
class BoxStats:
    group: str
    n: int
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple


def box_stats(values, group="") -> BoxStats:
    """Quartiles by linear interpolation (numpy's default rule), Tukey 1.5 IQR whiskers."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise EmptyResults(f"group {group!r} has no values")
    q1, med, q3 = (float(v) for v in np.percentile(x, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = tuple(float(v) for v in x[(x < lo_fence) | (x > hi_fence)])
    return BoxStats(group, int(x.size), q1, med, q3, float(inside.min()), float(inside.max()), outliers)


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _f(v):
    return f"{v:.2f}"


def render_boxplot_svg(title, metric, boxes, width=640, height=400) -> str:
    """Standalone SVG with one box per group; byte-identical for identical input."""
    left, right, top, bottom = 70, 20, 40, 60
    pw, ph = width - left - right, height - top - bottom
    allv = [v for b in boxes for v in (b.whisker_low, b.whisker_high, *b.outliers)]
    lo, hi = min(allv), max(allv)
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
    else:
        pad = (hi - lo) * 0.05
    lo, hi = lo - pad, hi + pad

    def y(v):
        return top + ph - (v - lo) / (hi - lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{_f(width / 2)}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
    ]
    for t in _nice_ticks(lo, hi):
        ty = _f(y(t))
        out.append(f'<line x1="{left - 4}" y1="{ty}" x2="{left}" y2="{ty}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{ty}" text-anchor="end" dominant-baseline="middle">{t:.4g}</text>')
    out.append(
        f'<text x="16" y="{_f(top + ph / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_f(top + ph / 2)})">{escape(metric)}</text>'
    )
    out.append(f'<text x="{_f(left + pw / 2)}" y="{height - 12}" text-anchor="middle">group</text>')

    slot = pw / max(len(boxes), 1)
    bw = min(60.0, slot * 0.5)
    for i, b in enumerate(boxes):
        cx = left + slot * (i + 0.5)
        x0, x1 = cx - bw / 2, cx + bw / 2
        out.append(f'<g class="box" data-group="{escape(b.group)}">')
        out.append(f'<line x1="{_f(cx)}" y1="{_f(y(b.whisker_low))}" x2="{_f(cx)}" y2="{_f(y(b.q1))}" stroke="black"/>')
        out.append(f'<line x1="{_f(cx)}" y1="{_f(y(b.q3))}" x2="{_f(cx)}" y2="{_f(y(b.whisker_high))}" stroke="black"/>')
        for w in (b.whisker_low, b.whisker_high):
            out.append(f'<line x1="{_f(cx - bw / 4)}" y1="{_f(y(w))}" x2="{_f(cx + bw / 4)}" y2="{_f(y(w))}" stroke="black"/>')
        if b.q3 > b.q1:
            out.append(
                f'<rect x="{_f(x0)}" y="{_f(y(b.q3))}" width="{_f(bw)}" height="{_f(y(b.q1) - y(b.q3))}" '
                f'fill="#9ecae1" stroke="black"/>'
            )
        out.append(f'<line class="median" x1="{_f(x0)}" y1="{_f(y(b.median))}" x2="{_f(x1)}" '
                   f'y2="{_f(y(b.median))}" stroke="black" stroke-width="2"/>')
        for o in b.outliers:
            out.append(f'<circle cx="{_f(cx)}" cy="{_f(y(o))}" r="3" fill="none" stroke="black"/>')
        out.append(f'<text x="{_f(cx)}" y="{top + ph + 18}" text-anchor="middle">{escape(b.group)} (n={b.n})</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def boxplot_specs(records, metrics=REPORT_METRICS):
    """``{(task, metric): [BoxStats per group]}`` for every metric observed in a task."""
    if not records:
        raise EmptyResults("no result records")
    specs = {}
    for task, groups in task_groups(records).items():
        for metric in metrics:
            boxes = []
            for g, rows in groups.items():
                vals = [m[metric] for m in rows if m.get(metric) is not None and math.isfinite(m[metric])]
                if vals:
                    boxes.append(box_stats(vals, g))
            if boxes:
                specs[(task, metric)] = boxes
    return specs


def emit_boxplots(records, out_dir, metrics=REPORT_METRICS):
    """Write ``<task>_<metric>.svg`` per (task, metric); returns the written paths in sorted order."""
    specs = boxplot_specs(records, metrics)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for (task, metric), boxes in sorted(specs.items()):
        path = os.path.join(out_dir, f"{task}_{metric}.svg")
        svg = render_boxplot_svg(f"{metric} by model ({task})", metric, boxes)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(svg)
        written.append(path)
    return written

