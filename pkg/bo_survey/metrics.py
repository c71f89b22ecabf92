"""
Evaluation metrics for sampling designs and the Mann-Whitney U test.
"""

import itertools
import logging
import math
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import stats

from .exceptions import ContractViolation
from .models import FiveNumberSummary, Histogram

logger = logging.getLogger(__name__)

P_VALUE_FLOOR = 1e-300
EXACT_SIZE_LIMIT = 12
MAX_ENUMERATED_SPLITS = 1_000_000


class MwuAlternative(str, Enum):
    LESS = "less"        # first sample stochastically smaller
    GREATER = "greater"  # first sample stochastically larger


class MannWhitneyResult(NamedTuple):
    u_statistic: float
    p_value: float
    method: str


def mean_abs_diff(true_y: np.ndarray, est_y: np.ndarray) -> float:
    """|mean(true_y) - mean(est_y)|."""
    true_y = np.asarray(true_y, dtype=float)
    est_y = np.asarray(est_y, dtype=float)
    if true_y.size == 0 or est_y.size == 0:
        raise ContractViolation("Mean difference needs non-empty vectors")
    if true_y.shape != est_y.shape:
        raise ContractViolation("True and estimated vectors must have equal lengths")
    return abs(float(true_y.mean()) - float(est_y.mean()))


def default_bin_edges(true_y: np.ndarray, bins: int = 20) -> np.ndarray:
    """Equal-width edges spanning the range of the true responses."""
    true_y = np.asarray(true_y, dtype=float)
    low, high = float(true_y.min()), float(true_y.max())
    if high == low:
        low, high = low - 0.5, high + 0.5
    return np.linspace(low, high, bins + 1)


def build_histogram(values: np.ndarray, edges: np.ndarray, smoothing: float = 0.0) -> Histogram:
    """Normalized histogram; out-of-range values fall into the end bins."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ContractViolation("A histogram needs at least two bin edges")
    if np.any(np.diff(edges) <= 0):
        raise ContractViolation("Bin edges must be ascending")
    if smoothing < 0:
        raise ContractViolation("Smoothing must be non-negative")

    values = np.clip(np.asarray(values, dtype=float).reshape(-1), edges[0], edges[-1])
    counts = np.histogram(values, bins=edges)[0].astype(float) + smoothing
    total = counts.sum()
    if total <= 0:
        raise ContractViolation("Cannot normalize an empty histogram without smoothing")
    return Histogram(bin_edges=edges, probabilities=counts / total)


def kl_divergence(P: Histogram, Q: Histogram) -> float:
    """D_KL(P || Q) with the natural logarithm."""
    if not np.array_equal(P.bin_edges, Q.bin_edges):
        raise ContractViolation("Histograms must share bin edges")
    if np.any((Q.probabilities == 0) & (P.probabilities > 0)):
        raise ContractViolation("Q is empty where P has mass; smooth the estimated histogram")
    return max(float(stats.entropy(P.probabilities, Q.probabilities)), 0.0)


def _exact_from_splits(ranks: np.ndarray, n1: int, u: float, alternative: MwuAlternative) -> float:
    """Exact p-value with ties: enumerate every split of the pooled midranks."""
    n = ranks.size
    if math.comb(n, n1) > MAX_ENUMERATED_SPLITS:
        raise ContractViolation("Too many tied samples for exact enumeration; use the normal approximation")
    offset = n1 * (n1 + 1) / 2.0
    hits = 0
    total = 0
    for chosen in itertools.combinations(range(n), n1):
        candidate = ranks[list(chosen)].sum() - offset
        if alternative == MwuAlternative.LESS:
            hits += candidate <= u + 1e-9
        else:
            hits += candidate >= u - 1e-9
        total += 1
    return hits / total


def mann_whitney_u(
    a: np.ndarray,
    b: np.ndarray,
    alternative: MwuAlternative = MwuAlternative.LESS,
    method: str = "auto",
) -> MannWhitneyResult:
    """One-sided Mann-Whitney U test of a against b.

    U counts the pairs (a_i, b_j) with a_i > b_j (ties count one half). The
    exact null distribution is used when |a| + |b| <= 12 (method "auto");
    otherwise the tie- and continuity-corrected normal approximation.
    Tie-free exact and asymptotic p-values come from scipy; exact p-values
    with ties enumerate the splits of the pooled midranks.
    """
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ContractViolation("Mann-Whitney U needs two non-empty samples")
    alternative = MwuAlternative(alternative)
    if method not in {"auto", "exact", "asymptotic"}:
        raise ContractViolation(f"Unknown Mann-Whitney method '{method}'")

    n1, n2 = a.size, b.size
    if method == "auto":
        method = "exact" if n1 + n2 <= EXACT_SIZE_LIMIT else "asymptotic"

    ranks = stats.rankdata(np.concatenate([a, b]))
    has_ties = np.unique(ranks).size < ranks.size
    if method == "exact" and has_ties:
        u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
        p_value = _exact_from_splits(ranks, n1, u, alternative)
    else:
        result = stats.mannwhitneyu(
            a, b, use_continuity=True, alternative=alternative.value, method=method
        )
        u, p_value = float(result.statistic), float(result.pvalue)

    p_value = min(max(p_value, P_VALUE_FLOOR), 1.0)
    return MannWhitneyResult(u_statistic=u, p_value=p_value, method=method)


def five_number(values: np.ndarray) -> FiveNumberSummary:
    """Minimum, quartiles, median and maximum."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ContractViolation("Cannot summarize an empty sample")
    q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75])
    return FiveNumberSummary(
        minimum=float(values.min()),
        q1=float(q1),
        median=float(median),
        q3=float(q3),
        maximum=float(values.max()),
        count=int(values.size),
    )
