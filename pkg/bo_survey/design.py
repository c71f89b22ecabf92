"""
Sampling designs: min-max inclusion probabilities from acquisition scores,
the simple random sampling baseline, sample realization and joint inclusion.
"""

import logging
from typing import Optional, Union

import numpy as np
import pandas as pd

from .exceptions import ContractViolation, UnsupportedDesignError
from .models import PiConvention, SampleDraw, SamplingDesign, SamplingScheme

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3

SeedLike = Union[int, np.random.SeedSequence]


def minmax_design(
    scores: np.ndarray,
    epsilon: float = DEFAULT_EPSILON,
    scheme: SamplingScheme = SamplingScheme.FIXED_SIZE_WEIGHTED,
    n: Optional[int] = None,
) -> SamplingDesign:
    """Inclusion probabilities by min-max normalization of acquisition scores.

    The minimum score maps to epsilon and the maximum to 1 - epsilon; interior
    values are clamped into [epsilon, 1 - epsilon]. Equal scores give 0.5.
    """
    scores = np.asarray(scores, dtype=float).reshape(-1)
    if scores.size < 2:
        raise ContractViolation("A min-max design needs at least two units")
    if not np.all(np.isfinite(scores)) or np.any(scores <= 0):
        raise ContractViolation("Acquisition scores must be finite and positive")
    if not 0 < epsilon < 0.5:
        raise ContractViolation("Epsilon must lie in (0, 0.5)")
    if scheme == SamplingScheme.SRS:
        raise ContractViolation("Use srs_design for simple random sampling")

    low, high = scores.min(), scores.max()
    if high == low:
        pi = np.full(scores.size, 0.5)
    else:
        pi = (scores - low) / (high - low)
        pi[scores == high] = 1.0 - epsilon
        pi[scores == low] = epsilon
        pi = np.clip(pi, epsilon, 1.0 - epsilon)

    return SamplingDesign(
        pi=pi,
        scheme=scheme,
        nominal_sample_size=n,
        epsilon=epsilon,
        scores=scores,
    )


def srs_design(
    N: int,
    n: int,
    pi_convention: PiConvention = PiConvention.ONE_OVER_N,
) -> SamplingDesign:
    """Simple random sampling without replacement of n out of N units."""
    if N < 2 or n < 1 or n >= N:
        raise ContractViolation(f"SRS needs 1 <= n < N, got n={n}, N={N}")
    value = 1.0 / N if pi_convention == PiConvention.ONE_OVER_N else n / N
    return SamplingDesign(
        pi=np.full(N, value),
        scheme=SamplingScheme.SRS,
        nominal_sample_size=n,
        pi_convention=pi_convention,
    )


def _draw_indices(design: SamplingDesign, rng: np.random.Generator) -> np.ndarray:
    N = design.population_size
    if design.scheme == SamplingScheme.POISSON:
        return np.flatnonzero(rng.random(N) < design.pi)

    n = design.nominal_sample_size
    if n is None:
        raise ContractViolation(f"{design.scheme.value} sampling needs a nominal sample size")
    if design.scheme == SamplingScheme.SRS:
        selected = rng.choice(N, size=n, replace=False)
    else:
        # sequential weighted selection without replacement
        selected = rng.choice(N, size=n, replace=False, p=design.pi / design.pi.sum())
    return np.sort(selected)


def draw(design: SamplingDesign, rng_seed: SeedLike) -> SampleDraw:
    """Realize one probability sample from the design."""
    rng = np.random.default_rng(rng_seed)
    return SampleDraw(indices=_draw_indices(design, rng), pi_used=design.pi)


def _srs_joint(design: SamplingDesign) -> float:
    N, n = design.population_size, design.nominal_sample_size
    return n * (n - 1) / (N * (N - 1))


def joint_inclusion(
    design: SamplingDesign,
    k: int,
    j: int,
    draws: Optional[int] = None,
    rng_seed: SeedLike = 0,
) -> float:
    """Second-order inclusion probability pi_kj for k != j.

    Fixed-size weighted designs have no closed form; a Monte Carlo estimate
    is returned when a draw budget is given.
    """
    if k == j:
        raise ContractViolation("Joint inclusion is defined for distinct units")
    if design.scheme == SamplingScheme.POISSON:
        return float(design.pi[k] * design.pi[j])
    if design.scheme == SamplingScheme.SRS:
        return _srs_joint(design)
    if draws is None:
        raise UnsupportedDesignError(
            "Joint inclusion of fixed-size weighted designs needs a Monte Carlo draw budget"
        )
    rng = np.random.default_rng(rng_seed)
    together = 0
    for _ in range(draws):
        selected = _draw_indices(design, rng)
        if k in selected and j in selected:
            together += 1
    return together / draws


def joint_inclusion_matrix(
    design: SamplingDesign,
    draws: Optional[int] = None,
    rng_seed: SeedLike = 0,
) -> np.ndarray:
    """Matrix of pi_kj with pi_k on the diagonal."""
    pi = design.pi
    if design.scheme == SamplingScheme.POISSON:
        matrix = np.outer(pi, pi)
    elif design.scheme == SamplingScheme.SRS:
        matrix = np.full((pi.size, pi.size), _srs_joint(design))
    elif draws is None:
        raise UnsupportedDesignError(
            "Joint inclusion of fixed-size weighted designs needs a Monte Carlo draw budget"
        )
    else:
        rng = np.random.default_rng(rng_seed)
        indicators = np.zeros((draws, pi.size))
        for row in range(draws):
            indicators[row, _draw_indices(design, rng)] = 1.0
        matrix = indicators.T @ indicators / draws
    np.fill_diagonal(matrix, pi)
    return matrix


def design_table(design: SamplingDesign) -> pd.DataFrame:
    """Audit table with one row per unit: unit_id, score, pi."""
    scores = design.scores if design.scores is not None else np.full(design.population_size, np.nan)
    return pd.DataFrame({
        "unit_id": np.arange(design.population_size),
        "score": scores,
        "pi": design.pi,
    })
