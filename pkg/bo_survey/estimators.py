"""
Design-based estimators of a population total.

Horvitz-Thompson: t_y = sum_s y_k / pi_k
Difference:       t_dif = sum_U yhat_k + sum_s D_k / pi_k,  D_k = y_k - yhat_k
Both variances are sum_U sum_U (pi_kj - pi_k pi_j)(v_k / pi_k)(v_j / pi_j)
with v = y or v = D.
"""

import logging
from typing import Tuple

import numpy as np

from .exceptions import ContractViolation, UnsupportedDesignError
from .models import (
    EstimatorKind,
    PiConvention,
    PopulationFrame,
    SampleDraw,
    SamplingDesign,
    SamplingScheme,
    TotalEstimate,
)

logger = logging.getLogger(__name__)


def _check_pi(pi: np.ndarray) -> None:
    if np.any(pi <= 0):
        raise ContractViolation("Inclusion probabilities must be positive on the sample")


def _require_predictions(frame: PopulationFrame) -> np.ndarray:
    if frame.predictions is None:
        raise ContractViolation("The difference estimator needs predictions for the whole frame")
    return frame.predictions


def _check_frame(frame: PopulationFrame, design: SamplingDesign) -> None:
    if frame.size != design.population_size:
        raise ContractViolation("Frame and design cover different numbers of units")


def _srs_joint(design: SamplingDesign) -> float:
    if design.pi_convention != PiConvention.CLASSICAL:
        raise UnsupportedDesignError(
            "SRS variances need classical inclusion probabilities pi_k = n/N"
        )
    N, n = design.population_size, design.nominal_sample_size
    return n * (n - 1) / (N * (N - 1))


def ht_total(sample: SampleDraw, responses_on_sample: np.ndarray) -> TotalEstimate:
    """Horvitz-Thompson estimate of the population total."""
    y = np.asarray(responses_on_sample, dtype=float).reshape(-1)
    if y.size != sample.realized_size:
        raise ContractViolation("Need exactly one response per sampled unit")
    pi = sample.pi_on_sample
    _check_pi(pi)
    return TotalEstimate(estimator=EstimatorKind.HT, value=float(np.sum(y / pi)))


def difference_total(
    sample: SampleDraw,
    frame: PopulationFrame,
    normalize_pi: bool = False,
) -> TotalEstimate:
    """Difference estimate of the population total.

    With normalize_pi the inclusion probabilities are rescaled to sum to one
    over the frame before weighting the sampled residuals.
    """
    predictions = _require_predictions(frame)
    if sample.pi_used.size != frame.size:
        raise ContractViolation("Sample and frame cover different numbers of units")
    pi = sample.pi_used
    _check_pi(pi[sample.indices])
    if normalize_pi:
        pi = pi / pi.sum()
    residuals = frame.residuals[sample.indices]
    value = float(np.sum(predictions) + np.sum(residuals / pi[sample.indices]))
    return TotalEstimate(estimator=EstimatorKind.DIFFERENCE, value=value, pi_normalized=normalize_pi)


def _design_variance(values: np.ndarray, design: SamplingDesign) -> Tuple[float, bool]:
    """Double-sum variance of sum_s v_k / pi_k; returns (variance, approximate)."""
    pi = design.pi
    _check_pi(pi)
    expanded = values / pi

    if design.scheme == SamplingScheme.SRS:
        joint = _srs_joint(design)
        off_diagonal = joint - pi * pi
        diagonal = pi * (1.0 - pi)
        # sum_kj c u_k u_j + sum_k (d_k - c) u_k^2 with constant off-diagonal c
        c = off_diagonal[0]
        variance = c * np.sum(expanded) ** 2 + np.sum((diagonal - c) * expanded ** 2)
        return max(float(variance), 0.0), False

    approximate = design.scheme == SamplingScheme.FIXED_SIZE_WEIGHTED
    if approximate:
        logger.warning("Fixed-size weighted design: variance uses the pi_kj = pi_k pi_j approximation")
    variance = np.sum(pi * (1.0 - pi) * expanded ** 2)
    return max(float(variance), 0.0), approximate


def ht_variance(frame: PopulationFrame, design: SamplingDesign) -> float:
    """Design variance of the Horvitz-Thompson estimator."""
    _check_frame(frame, design)
    return _design_variance(frame.responses, design)[0]


def de_variance(frame: PopulationFrame, design: SamplingDesign) -> float:
    """Design variance of the difference estimator."""
    _check_frame(frame, design)
    _require_predictions(frame)
    return _design_variance(frame.residuals, design)[0]


def _variance_estimate(values: np.ndarray, sample: SampleDraw, design: SamplingDesign) -> float:
    pi = design.pi[sample.indices]
    _check_pi(pi)
    expanded = values / pi

    if design.scheme == SamplingScheme.SRS:
        joint = _srs_joint(design)
        if joint <= 0:
            if sample.realized_size >= 2:
                raise ContractViolation("Joint inclusion probability is zero for sampled pairs")
            return float(np.sum((1.0 - pi) * expanded ** 2))
        c = (joint - pi[0] ** 2) / joint
        diagonal = 1.0 - pi
        estimate = c * np.sum(expanded) ** 2 + np.sum((diagonal - c) * expanded ** 2)
    else:
        estimate = np.sum((1.0 - pi) * expanded ** 2)

    estimate = float(estimate)
    if estimate < 0:
        logger.warning(f"Variance estimate is negative ({estimate:.6g})")
    return estimate


def de_variance_estimate(
    sample: SampleDraw,
    frame: PopulationFrame,
    design: SamplingDesign,
) -> float:
    """Unbiased sample-based estimate of the difference-estimator variance."""
    _check_frame(frame, design)
    _require_predictions(frame)
    return _variance_estimate(frame.residuals[sample.indices], sample, design)


def ht_variance_estimate(
    sample: SampleDraw,
    frame: PopulationFrame,
    design: SamplingDesign,
) -> float:
    """Unbiased sample-based estimate of the Horvitz-Thompson variance."""
    _check_frame(frame, design)
    return _variance_estimate(frame.responses[sample.indices], sample, design)


def difference_estimate(
    sample: SampleDraw,
    frame: PopulationFrame,
    design: SamplingDesign,
    normalize_pi: bool = False,
) -> TotalEstimate:
    """Difference estimate together with its design variance and variance estimate."""
    estimate = difference_total(sample, frame, normalize_pi=normalize_pi)
    if normalize_pi:
        return estimate
    try:
        variance, approximate = _design_variance(frame.residuals, design)
        variance_estimate = de_variance_estimate(sample, frame, design)
    except UnsupportedDesignError as e:
        logger.info(f"Variance not reported: {e}")
        return estimate
    return estimate.model_copy(update={
        "variance": variance,
        "variance_estimate": variance_estimate,
        "variance_approximate": approximate,
    })


def ht_estimate(sample: SampleDraw, frame: PopulationFrame, design: SamplingDesign) -> TotalEstimate:
    """Horvitz-Thompson estimate together with its design variance and variance estimate."""
    estimate = ht_total(sample, frame.responses[sample.indices])
    try:
        variance, approximate = _design_variance(frame.responses, design)
        variance_estimate = ht_variance_estimate(sample, frame, design)
    except UnsupportedDesignError as e:
        logger.info(f"Variance not reported: {e}")
        return estimate
    return estimate.model_copy(update={
        "variance": variance,
        "variance_estimate": variance_estimate,
        "variance_approximate": approximate,
    })
