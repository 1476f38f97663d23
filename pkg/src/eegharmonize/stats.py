"""Wilcoxon signed-rank test with an exact small-sample null distribution.

Zero differences are dropped, ties get mid-ranks. Up to n = 25 pairs the
two-sided p-value comes from exact enumeration of the sign-assignment
distribution (dynamic program over doubled ranks, so mid-ranks stay
integral); above that a normal approximation with continuity correction is
used. Star bins follow the usual convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .errors import DimMismatchError, TooFewPairsError

EXACT_MAX_N = 25
MIN_PAIRS = 5


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float        # min(W+, W-)
    w_plus: float
    w_minus: float
    n_used: int             # pairs remaining after dropping zero differences
    p_value: float
    method: str             # "exact" or "normal-approx"

    def stars(self) -> str:
        return star_bin(self.p_value)


def star_bin(p: float) -> str:
    """Significance bin: ns, *, **, ***, or ****."""
    if p > 5e-2:
        return "ns"
    if p > 1e-2:
        return "*"
    if p > 1e-3:
        return "**"
    if p > 1e-4:
        return "***"
    return "****"


def _exact_cdf_at(ranks: np.ndarray, t: float) -> float:
    """P(W+ <= t) under the exact sign-assignment null, mid-ranks allowed."""
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    upper = 0
    for r in doubled:
        upper += int(r)
        counts[int(r):upper + 1] += counts[:upper + 1 - int(r)].copy()
    limit = int(math.floor(2.0 * t + 1e-9))
    return float(counts[: limit + 1].sum() / 2.0 ** len(ranks))


def wilcoxon_signed_rank(a, b) -> WilcoxonResult:
    """Two-sided paired test of a vs b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimMismatchError(
            f"paired samples must be equal-length vectors, got {a.shape} vs {b.shape}"
        )
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n < MIN_PAIRS:
        raise TooFewPairsError(
            f"need >= {MIN_PAIRS} non-zero differences, got {n}"
        )
    ranks = scipy.stats.rankdata(np.abs(diffs), method="average")
    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks[diffs < 0].sum())
    statistic = min(w_plus, w_minus)

    if n <= EXACT_MAX_N:
        p = min(1.0, 2.0 * _exact_cdf_at(ranks, statistic))
        method = "exact"
    else:
        mu = float(ranks.sum()) / 2.0
        sigma = math.sqrt(float(np.sum(ranks**2)) / 4.0)
        z = (statistic - mu + 0.5) / sigma
        p = min(1.0, 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0)))
        method = "normal-approx"
    return WilcoxonResult(statistic, w_plus, w_minus, n, p, method)
