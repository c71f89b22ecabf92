"""
Acquisition functions and the delta-MAE objective surrogate.
"""

import logging
import math
from typing import List, Optional, Union

import numpy as np
from scipy import special

from . import gp
from .exceptions import ContractViolation, DegenerateVarianceError
from .models import (
    MIN_OBJECTIVE_PRIOR,
    AcquisitionKind,
    AcquisitionTag,
    Dataset,
    GpPosterior,
    KernelConfig,
    KernelSettings,
    ObjectiveRecord,
    ObjectiveSurrogate,
    Prediction,
)

logger = logging.getLogger(__name__)

MIN_PRIOR_POINTS = MIN_OBJECTIVE_PRIOR
VARIANCE_TOLERANCE = 1e-12
POSITIVITY_OFFSET = 1e-6

SeedLike = Union[int, np.random.SeedSequence]


def normal_cdf(z: np.ndarray) -> np.ndarray:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * special.erfc(-np.asarray(z, dtype=float) / math.sqrt(2.0))


def normal_pdf(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * z ** 2) / math.sqrt(2.0 * math.pi)


def _broadcast(mean, std):
    mean, std = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(std, dtype=float))
    return np.atleast_1d(np.array(mean)), np.atleast_1d(np.array(std))


def expected_improvement(mean, std, g_min: float) -> np.ndarray:
    """EI = sigma [z Psi(z) + psi(z)] with z = (g_min - mu) / sigma; max(g_min - mu, 0) at sigma = 0."""
    mean, std = _broadcast(mean, std)
    improvement = g_min - mean
    ei = np.maximum(improvement, 0.0)
    positive = std > 0
    z = improvement[positive] / std[positive]
    ei[positive] = std[positive] * (z * normal_cdf(z) + normal_pdf(z))
    return np.maximum(ei, 0.0)


def improvement_variances(mean, std, g_min: float) -> np.ndarray:
    """Var(I) = sigma^2 {(z^2 + 1) Psi(z) + z psi(z)} - EI^2, zero where sigma = 0."""
    mean, std = _broadcast(mean, std)
    variance = np.zeros_like(mean)
    positive = std > 0
    s = std[positive]
    z = (g_min - mean[positive]) / s
    cdf, pdf = normal_cdf(z), normal_pdf(z)
    ei = s * (z * cdf + pdf)
    variance[positive] = s ** 2 * ((z ** 2 + 1.0) * cdf + z * pdf) - ei ** 2
    return np.maximum(variance, 0.0)


def scaled_expected_improvement(mean, std, g_min: float) -> np.ndarray:
    """SEI = EI / sqrt(Var(I)); zero where the variance is degenerate."""
    ei = expected_improvement(mean, std, g_min)
    variance = improvement_variances(mean, std, g_min)
    sei = np.zeros_like(ei)
    usable = variance > VARIANCE_TOLERANCE
    sei[usable] = ei[usable] / np.sqrt(variance[usable])
    return sei


def acq_pu(pred: Prediction) -> float:
    """Predictive uncertainty of the response surrogate."""
    return pred.std_dev


def acq_ilcb(pred: Prediction, lam: float) -> float:
    """Inverted lower confidence bound lambda * sigma - mu."""
    return lam * pred.std_dev - pred.mean


def acq_ei(pred: Prediction, g_min: float) -> float:
    return float(expected_improvement(pred.mean, pred.std_dev, g_min)[0])


def improvement_variance(pred: Prediction, g_min: float) -> float:
    """Variance of the improvement max(g_min - G, 0)."""
    if pred.std_dev <= 0:
        raise DegenerateVarianceError("Improvement variance is undefined for a zero predictive std")
    return float(improvement_variances(pred.mean, pred.std_dev, g_min)[0])


def acq_sei(pred: Prediction, g_min: float) -> float:
    return float(scaled_expected_improvement(pred.mean, pred.std_dev, g_min)[0])


def _round_seed(seed: SeedLike, round_index: int) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (round_index,))
    return np.random.SeedSequence(seed, spawn_key=(round_index,))


def _resolve(data: Dataset, cfg: Optional[Union[KernelConfig, KernelSettings]]) -> KernelConfig:
    if isinstance(cfg, KernelConfig):
        return cfg
    return gp.default_kernel(data, cfg)


def _mae(post: GpPosterior, features: np.ndarray, responses: np.ndarray) -> float:
    means, _ = gp.predict_batch(post, features)
    return float(np.mean(np.abs(responses - means)))


def estimate_objective_records(
    prior: Dataset,
    cfg: Optional[Union[KernelConfig, KernelSettings]] = None,
    rounds: int = 10,
    rng_seed: SeedLike = 0,
    holdout_fraction: float = 0.2,
) -> List[ObjectiveRecord]:
    """Monte Carlo estimate of the objective g(x) = MAE_{B+d} - MAE_B on prior data.

    Each round splits the prior into a base set and a holdout set, fits the
    surrogate on the base set and records, for every holdout point, how the
    holdout MAE changes once that point joins the training data. A kernel
    given as KernelSettings is resolved once per round on the base set and
    reused for every refit in that round.
    """
    if prior.n_points < MIN_PRIOR_POINTS:
        raise ContractViolation(
            f"Objective estimation needs at least {MIN_PRIOR_POINTS} prior points, got {prior.n_points}"
        )
    if rounds < 1:
        raise ContractViolation("Objective estimation needs at least one round")

    n = prior.n_points
    n_holdout = min(max(2, int(round(holdout_fraction * n))), n - 1)
    n_base = n - n_holdout
    X, y = prior.features, prior.responses

    records: List[ObjectiveRecord] = []
    for round_index in range(rounds):
        rng = np.random.default_rng(_round_seed(rng_seed, round_index))
        order = rng.permutation(n)
        base, holdout = order[:n_base], order[n_base:]

        base_data = Dataset(features=X[base], responses=y[base])
        kernel = _resolve(base_data, cfg)
        mae_base = _mae(gp.fit(base_data, kernel), X[holdout], y[holdout])

        for position, index in enumerate(holdout):
            augmented = Dataset(
                features=np.vstack([X[base], X[index]]),
                responses=np.append(y[base], y[index]),
            )
            rest = np.delete(holdout, position)
            mae_augmented = _mae(gp.fit(augmented, kernel), X[rest], y[rest])
            records.append(ObjectiveRecord(features=X[index], delta_mae=mae_augmented - mae_base))

        logger.debug(f"Objective round {round_index}: base MAE {mae_base:.6g}")

    return records


def fit_objective_surrogate(
    records: List[ObjectiveRecord],
    cfg: Optional[Union[KernelConfig, KernelSettings]] = None,
) -> ObjectiveSurrogate:
    """Fit the GP h on (x, delta_mae) pairs."""
    if not records:
        raise ContractViolation("Objective surrogate needs at least one record")
    data = Dataset(
        features=np.vstack([record.features for record in records]),
        responses=np.array([record.delta_mae for record in records]),
    )
    posterior = gp.fit(data, _resolve(data, cfg))
    return ObjectiveSurrogate(gp=posterior, g_min=float(data.responses.min()))


def score_population(
    kind: AcquisitionKind,
    population_features: np.ndarray,
    response_surrogate: GpPosterior,
    objective_surrogate: Optional[ObjectiveSurrogate] = None,
) -> np.ndarray:
    """Strictly positive acquisition values for every unit of the population."""
    if kind.tag == AcquisitionTag.PU:
        _, std = gp.predict_batch(response_surrogate, population_features)
        scores = std
    else:
        if objective_surrogate is None:
            raise ContractViolation(f"{kind.tag.value} scoring needs an objective surrogate")
        mean, std = gp.predict_batch(objective_surrogate.gp, population_features)
        g_min = objective_surrogate.g_min
        if kind.tag == AcquisitionTag.ILCB:
            scores = kind.lam * std - mean
        elif kind.tag == AcquisitionTag.EI:
            scores = expected_improvement(mean, std, g_min)
        else:
            scores = scaled_expected_improvement(mean, std, g_min)

    scores = np.asarray(scores, dtype=float)
    if np.any(scores <= 0):
        # min-max inclusion probabilities are invariant to this shift
        scores = scores + (abs(float(scores.min())) + POSITIVITY_OFFSET)
    return scores
