"""Nonparametric comparison of methods: Wilcoxon signed-rank (exact for
small samples), Friedman aligned ranks, and the Holm step-down procedure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as spstats

EXACT_LIMIT = 20


class TooFewPairs(ValueError):
    pass


class DegenerateMatrix(ValueError):
    pass


@dataclass(frozen=True)
class ScoreMatrix:
    """problems x methods metric values."""

    problems: list
    methods: list
    values: np.ndarray
    lower_is_better: bool = True

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (len(self.problems), len(self.methods)):
            raise ValueError("values shape does not match problems x methods")
        if not np.isfinite(v).all():
            raise ValueError("score matrix must not contain missing entries")


def _signed_ranks(x, y):
    diffs = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    diffs = diffs[diffs != 0.0]
    if len(diffs) < 5:
        raise TooFewPairs(f"{len(diffs)} nonzero differences; need >= 5")
    ranks = spstats.rankdata(np.abs(diffs))
    return diffs, ranks


def wilcoxon_signed_rank(x, y):
    """Two-sided Wilcoxon signed-rank test.

    Zero differences are dropped; ties get average ranks.  For n <= 20 the
    p-value is exact, from full enumeration of the 2^n sign assignments of
    the observed ranks: with W = min(T+, T-), p = min(1, 2 * P(min <= W)).
    For larger n the normal approximation with tie correction is used.

    Returns (W, p_two_sided).
    """
    diffs, ranks = _signed_ranks(x, y)
    n = len(diffs)
    t_plus = float(ranks[diffs > 0].sum())
    total = float(ranks.sum())
    w = min(t_plus, total - t_plus)

    if n <= EXACT_LIMIT:
        masks = np.arange(1 << n, dtype=np.uint64)
        bits = (masks[:, None] >> np.arange(n, dtype=np.uint64)) & 1
        t_all = bits.astype(np.float64) @ ranks
        w_all = np.minimum(t_all, total - t_all)
        p_one = float(np.count_nonzero(w_all <= w + 1e-12)) / (1 << n)
        return w, min(1.0, 2.0 * p_one)

    mean = n * (n + 1) / 4.0
    _, counts = np.unique(ranks, return_counts=True)
    tie_term = float(((counts**3 - counts)).sum()) / 48.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    z = (w - mean) / np.sqrt(var)
    return w, float(min(1.0, 2.0 * spstats.norm.cdf(z)))


def friedman_aligned_ranks(m: ScoreMatrix):
    """Friedman aligned-ranks test.

    Row (problem) means are subtracted, the aligned values are ranked
    jointly (average ranks on ties, rank 1 = best after orientation), and
    the Hodges-Lehmann chi-square statistic is computed.

    Returns (avg_ranks: dict method -> average rank, statistic, p).
    """
    values = np.asarray(m.values, dtype=np.float64)
    if not m.lower_is_better:
        values = -values
    if np.ptp(values) == 0.0:
        raise DegenerateMatrix("all entries equal")
    n, k = values.shape
    if n < 2 or k < 2:
        raise ValueError("need >= 2 problems and >= 2 methods")

    aligned = values - values.mean(axis=1, keepdims=True)
    ranks = spstats.rankdata(aligned.ravel()).reshape(n, k)

    col_sums = ranks.sum(axis=0)
    row_sums = ranks.sum(axis=1)
    nk = n * k
    num = (k - 1) * (float((col_sums**2).sum()) - (k * n**2 / 4.0) * (nk + 1) ** 2)
    den = nk * (nk + 1) * (2 * nk + 1) / 6.0 - float((row_sums**2).sum()) / k
    statistic = num / den
    p = float(spstats.chi2.sf(statistic, k - 1))
    avg_ranks = {method: float(col_sums[j]) / n for j, method in enumerate(m.methods)}
    return avg_ranks, statistic, p


def holm_posthoc(p_values, alpha: float = 0.1):
    """Holm step-down adjustment of the 1xN comparisons against the control.

    Returns [(adjusted_p, reject)] in the input order.  adjusted_(i) =
    max_{j <= i} (n - j + 1) * p_(j) over the ascending ordering, capped at
    1; rejection proceeds while adjusted < alpha and stops at the first
    acceptance.
    """
    p = np.asarray(p_values, dtype=np.float64)
    n = len(p)
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(n)
    running = 0.0
    for i, idx in enumerate(order):
        running = max(running, (n - i) * p[idx])
        adjusted[idx] = min(1.0, running)

    reject = np.zeros(n, dtype=bool)
    for idx in order:
        if adjusted[idx] < alpha:
            reject[idx] = True
        else:
            break
    return [(float(adjusted[i]), bool(reject[i])) for i in range(n)]
