"""Group summaries and the two-sided Mann-Whitney U test."""

import math
import statistics
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

from .errors import EmptyInput, InsufficientGroups

EXACT_MAX_N = 10


@dataclass(frozen=True)
class GroupSummary:
    metric: str
    group: str
    n: int
    mean: float
    sd: Optional[float]


@dataclass(frozen=True)
class StatTestResult:
    u_statistic: float
    p_value: float
    method: str
    n1: int
    n2: int
    two_sided: bool = True
    z: Optional[float] = None

    def to_dict(self):
        d = {
            "u": self.u_statistic,
            "p": self.p_value,
            "method": self.method,
            "n1": self.n1,
            "n2": self.n2,
            "two_sided": self.two_sided,
        }
        if self.z is not None:
            d["z"] = self.z
        return d


def descriptive(values, metric="", group="") -> GroupSummary:
    """Mean and sample (n - 1) standard deviation; ``sd`` is None for a single value."""
    values = list(values)
    if not values:
        raise EmptyInput("no values to summarize")
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) >= 2 else None
    return GroupSummary(metric, group, len(values), mean, sd)


def rankdata(values):
    """1-based ranks; tied values share the mean of the ranks they span."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        midrank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = midrank
        i = j + 1
    return ranks


def tie_sizes(values):
    counts = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return [c for c in counts.values() if c > 1]


def u_statistics(a, b):
    """``(U1, U2)`` from the rank sum of ``a`` in the pooled sample."""
    n1, n2 = len(a), len(b)
    ranks = rankdata(list(a) + list(b))
    r1 = math.fsum(ranks[:n1])
    u1 = r1 - n1 * (n1 + 1) / 2
    return u1, n1 * n2 - u1


def u_distribution(n1, n2):
    """Null counts of U1 for tie-free samples: ``counts[u]`` placements give U1 = u.

    Uses the recurrence ``f(n1, n2, u) = f(n1 - 1, n2, u - n2) + f(n1, n2 - 1, u)``
    (the largest pooled value belongs to either sample), which counts the same
    C(n1 + n2, n1) placements as a full enumeration.
    """
    # table[j] holds the count vector for (i, j) while sweeping i upward
    table = [[1] for _ in range(n2 + 1)]
    for i in range(1, n1 + 1):
        new = [[1]]
        for j in range(1, n2 + 1):
            size = i * j + 1
            counts = [0] * size
            for u, c in enumerate(table[j]):
                counts[u + j] += c
            for u, c in enumerate(new[j - 1]):
                counts[u] += c
            new.append(counts)
        table = new
    return table[n2]


def exact_p_value(u1, n1, n2, two_sided=True):
    counts = u_distribution(n1, n2)
    total = math.comb(n1 + n2, n1)
    if two_sided:
        u = min(u1, n1 * n2 - u1)
        tail = sum(c for k, c in enumerate(counts) if k <= u + 1e-9)
        return min(1.0, 2 * tail / total)
    tail = sum(c for k, c in enumerate(counts) if k <= u1 + 1e-9)
    return tail / total


def _norm_sf(z):
    return 0.5 * math.erfc(z / math.sqrt(2))


def mann_whitney_u(a, b, two_sided: bool = True, exact_max_n: int = EXACT_MAX_N,
                   method: str = "auto") -> StatTestResult:
    """Mann-Whitney U test reporting ``U = min(U1, U2)``.

    ``method="auto"`` takes the exact null distribution when both groups have
    at most ``exact_max_n`` values and there are no ties, else the normal
    approximation with tie-corrected variance and a 0.5 continuity
    correction. The one-sided alternative is "``a`` tends to be smaller".
    """
    a, b = list(a), list(b)
    if not a or not b:
        raise EmptyInput("both groups must be non-empty")
    n1, n2 = len(a), len(b)
    u1, u2 = u_statistics(a, b)
    u = min(u1, u2)
    pooled = a + b
    ties = tie_sizes(pooled)

    if method == "auto":
        method = "exact" if (n1 <= exact_max_n and n2 <= exact_max_n and not ties) else "normal_approx"
    if method == "exact":
        if ties:
            raise ValueError("exact method requires tie-free samples")
        p = exact_p_value(u1, n1, n2, two_sided)
        return StatTestResult(u, p, "exact", n1, n2, two_sided)
    if method != "normal_approx":
        raise ValueError(f"unknown method {method!r}")

    n = n1 + n2
    mu = n1 * n2 / 2
    tie_term = sum(t ** 3 - t for t in ties) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12 * ((n + 1) - tie_term)
    if var <= 0:
        return StatTestResult(u, 1.0, "normal_approx", n1, n2, two_sided, 0.0)
    sigma = math.sqrt(var)
    if two_sided:
        z = max(0.0, abs(u1 - mu) - 0.5) / sigma
        p = min(1.0, 2 * _norm_sf(z))
    else:
        z = (u1 - mu + 0.5) / sigma
        p = 1.0 - _norm_sf(z)
    return StatTestResult(u, p, "normal_approx", n1, n2, two_sided, z)


def format_p(p: float) -> str:
    if p < 0.001:
        return "p<0.001"
    if p >= 0.05:
        return "n.s."
    return f"p={p:.3f}"


@dataclass
class GroupComparison:
    """Summaries and pairwise tests for one set of groups (e.g. one task)."""

    groups: list
    summaries: dict = field(default_factory=dict)  # metric -> {group: GroupSummary}
    tests: dict = field(default_factory=dict)  # metric -> {(g1, g2): StatTestResult}
    skipped: dict = field(default_factory=dict)  # metric -> reason


def compare_groups(groups: dict, metrics=None, exact_max_n: int = EXACT_MAX_N) -> GroupComparison:
    """Pairwise two-sided tests for every metric observed in all groups.

    ``groups`` maps a group label to a list of metric mappings (or objects
    exposing ``values()``). A metric missing from every sample of some group
    is skipped with a reason naming those groups; summaries are still kept
    for the groups that do have it.
    """
    labels = list(groups)
    if len(labels) < 2:
        raise InsufficientGroups(f"need >= 2 groups, got {len(labels)}")
    for g in labels:
        if not groups[g]:
            raise InsufficientGroups(f"group {g!r} is empty")

    columns = {}
    for g in labels:
        for row in groups[g]:
            vals = row.values() if hasattr(row, "absent") else row
            for name, v in vals.items():
                if v is not None:
                    columns.setdefault(name, {}).setdefault(g, []).append(v)
    if metrics is None:
        metrics = list(columns)

    out = GroupComparison(labels)
    for metric in metrics:
        per_group = columns.get(metric, {})
        out.summaries[metric] = {
            g: descriptive(per_group[g], metric, g) for g in labels if per_group.get(g)
        }
        missing = [g for g in labels if not per_group.get(g)]
        if missing:
            out.skipped[metric] = "absent in group(s): " + ", ".join(missing)
            continue
        out.tests[metric] = {
            (g1, g2): mann_whitney_u(per_group[g1], per_group[g2], True, exact_max_n)
            for g1, g2 in combinations(labels, 2)
        }
    return out
