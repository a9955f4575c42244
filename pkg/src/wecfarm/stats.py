"""Run statistics: Mann-Whitney rank-sum test and per-method summary tables."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np

__all__ = ["EXACT_LIMIT", "MethodStats", "RankSumResult", "SummaryTable", "rank_sum_test", "summarize"]

EXACT_LIMIT = 10  # exact null distribution when both samples are at most this size


class RankSumResult(NamedTuple):
    statistic: float  # U of the first sample
    pvalue: float


def _midranks(pooled):
    """Doubled midranks (integers) of `pooled`, and the tie group sizes."""
    order = np.argsort(pooled, kind="stable")
    doubled = np.empty(len(pooled), dtype=np.int64)
    ties = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        # ranks i+1 .. j+1 share their average; doubled it is i + j + 2
        doubled[order[i : j + 1]] = i + j + 2
        ties.append(j - i + 1)
        i = j + 1
    return doubled, ties


def _exact_tails(doubled, n_a, observed):
    """``(P(S <= observed), P(S >= observed))`` for the doubled rank sum S of `n_a` draws."""
    # ways[j] maps doubled rank sum -> number of j-subsets with that sum
    ways = [dict() for _ in range(n_a + 1)]
    ways[0][0] = 1
    for r in doubled.tolist():
        for j in range(min(n_a, len(doubled)), 0, -1):
            prev = ways[j - 1]
            cur = ways[j]
            for s, c in prev.items():
                cur[s + r] = cur.get(s + r, 0) + c
    dist = ways[n_a]
    total = sum(dist.values())
    low = sum(c for s, c in dist.items() if s <= observed)
    high = sum(c for s, c in dist.items() if s >= observed)
    return low / total, high / total


def rank_sum_test(sample_a, sample_b):
    """Two-sided Mann-Whitney U test.

    Parameters
    ----------
    sample_a, sample_b : sequence of float
        Independent samples, each of size at least 2.

    Returns
    -------
    RankSumResult
        ``statistic`` is U for `sample_a` (midranks for ties). ``pvalue`` is
        exact, from the permutation distribution of the midrank sum, when
        both sizes are at most ``EXACT_LIMIT``; otherwise the normal
        approximation with tie-corrected variance and continuity
        correction. Two-sided p is twice the smaller tail, capped at 1.
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size < 2 or b.size < 2:
        raise ValueError("both samples need at least 2 values")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ValueError("samples must not contain NaN")
    n_a, n_b = a.size, b.size
    pooled = np.concatenate([a, b])
    doubled, ties = _midranks(pooled)
    sum_a2 = int(doubled[:n_a].sum())
    u = sum_a2 / 2 - n_a * (n_a + 1) / 2
    if len(ties) == 1:
        return RankSumResult(u, 1.0)

    if n_a <= EXACT_LIMIT and n_b <= EXACT_LIMIT:
        low, high = _exact_tails(doubled, n_a, sum_a2)
        return RankSumResult(u, min(1.0, 2.0 * min(low, high)))

    big_n = n_a + n_b
    mean = n_a * n_b / 2
    tie_term = sum(t**3 - t for t in ties) / (big_n * (big_n - 1))
    var = n_a * n_b / 12 * ((big_n + 1) - tie_term)
    if var <= 0:
        return RankSumResult(u, 1.0)
    z = max(abs(u - mean) - 0.5, 0.0) / math.sqrt(var)
    return RankSumResult(u, min(1.0, math.erfc(z / math.sqrt(2.0))))


@dataclass(frozen=True)
class MethodStats:
    runs: int
    max: float
    min: float
    mean: float
    median: float
    std: float


@dataclass
class SummaryTable:
    """Per-method statistics of best-run fitness and pairwise rank-sum p-values.

    `pvalues[(a, b)]` is defined for every ordered pair of distinct methods
    (NaN when either group has fewer than two runs). `warnings` lists
    methods whose std was reported as 0 because they had a single run.
    """

    methods: list
    stats: dict
    pvalues: dict
    warnings: list = field(default_factory=list)


def _describe(values):
    arr = np.asarray(values, dtype=float)
    finite = np.all(np.isfinite(arr))
    mean = math.fsum(arr) / arr.size if finite else float(np.mean(arr))
    if arr.size > 1:
        std = math.sqrt(math.fsum((arr - mean) ** 2) / (arr.size - 1)) if finite else math.nan
    else:
        std = 0.0
    return MethodStats(
        runs=int(arr.size),
        max=float(arr.max()),
        min=float(arr.min()),
        mean=float(mean),
        median=float(np.median(arr)),
        std=float(std),
    )


def summarize(groups):
    """Summarize best-run fitness per method.

    Parameters
    ----------
    groups : mapping
        Method name to a non-empty sequence of best fitness values; insertion
        order fixes the table order.
    """
    methods = list(groups)
    stats, notes = {}, []
    for name in methods:
        values = list(groups[name])
        if not values:
            raise ValueError(f"method {name!r} has no runs")
        stats[name] = _describe(values)
        if len(values) == 1:
            notes.append(name)
            warnings.warn(f"{name}: single run, std reported as 0", stacklevel=2)
    pvalues = {}
    for a, b in combinations(methods, 2):
        if len(groups[a]) >= 2 and len(groups[b]) >= 2:
            p = rank_sum_test(groups[a], groups[b]).pvalue
        else:
            p = math.nan
        pvalues[(a, b)] = pvalues[(b, a)] = p
    return SummaryTable(methods, stats, pvalues, notes)
