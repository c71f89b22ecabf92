"""
Gaussian process regression with a squared exponential kernel.

Only the kernel (function-space) form is implemented: the posterior is
represented by the Cholesky factor of K + sigma^2 I and the solve vector
alpha = [K + sigma^2 I]^-1 y, with a zero prior mean.
"""

import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist

from .exceptions import ContractViolation, SingularKernelError
from .models import Dataset, GpPosterior, KernelConfig, KernelSettings, Prediction, Standardizer

logger = logging.getLogger(__name__)

NOISE_FLOOR = 1e-8
DEFAULT_NOISE_FRACTION = 0.1
JITTER_LEVELS = np.logspace(-9, -3, 7)
PREDICT_CHUNK = 4096


def _as_matrix(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ContractViolation("Expected a 2-D feature matrix")
    if not np.all(np.isfinite(X)):
        raise ContractViolation("Feature matrix contains non-finite values")
    return X


def cross_kernel(A: np.ndarray, B: np.ndarray, length_scale: float) -> np.ndarray:
    """Squared exponential kernel between the rows of A and the rows of B."""
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * length_scale ** 2))


def kernel_eval(a: np.ndarray, b: np.ndarray, cfg: KernelConfig) -> float:
    """Evaluate k(a, b) = exp(-|a - b|^2 / 2l^2)."""
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ContractViolation(f"Kernel arguments differ in dimension: {a.size} vs {b.size}")
    squared_distance = float(np.sum((a - b) ** 2))
    return math.exp(-squared_distance / (2.0 * cfg.length_scale ** 2))


def gram_matrix(X: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Gram matrix K_ij = k(x_i, x_j) over the rows of X."""
    X = _as_matrix(X)
    if X.shape[0] < 1:
        raise ContractViolation("Gram matrix needs at least one row")
    return cross_kernel(X, X, cfg.length_scale)


def default_kernel(data: Dataset, settings: Optional[KernelSettings] = None) -> KernelConfig:
    """Resolve kernel hyperparameters, filling unset values with data-driven defaults.

    The length scale defaults to the median pairwise distance between the
    standardized training inputs; the noise variance to a tenth of the sample
    variance of the responses (floored so constant responses stay fittable).
    """
    settings = settings or KernelSettings()

    length_scale = settings.length_scale
    if length_scale is None:
        length_scale = 1.0
        if data.n_points >= 2:
            standardized = Standardizer.fit(data.features).transform(data.features)
            median_distance = float(np.median(pdist(standardized)))
            if median_distance > 0:
                length_scale = median_distance

    noise_variance = settings.noise_variance
    if noise_variance is None:
        variance = float(np.var(data.responses, ddof=1)) if data.n_points >= 2 else 0.0
        noise_variance = max(DEFAULT_NOISE_FRACTION * variance, NOISE_FLOOR)

    return KernelConfig(
        length_scale=length_scale,
        noise_variance=noise_variance,
        jitter=settings.jitter,
    )


def stable_cholesky(matrix: np.ndarray, jitter: float = 0.0) -> Tuple[np.ndarray, float]:
    """Cholesky-factorize, escalating diagonal jitter on failure."""
    identity = np.eye(matrix.shape[0])
    try:
        return linalg.cholesky(matrix + jitter * identity, lower=True, check_finite=False), jitter
    except linalg.LinAlgError:
        pass

    scale = float(np.mean(np.diag(matrix)))
    attempted = [jitter]
    for level in JITTER_LEVELS * scale:
        level = float(max(level, jitter))
        attempted.append(level)
        logger.debug(f"Cholesky failed; retrying with jitter {level:.3e}")
        try:
            return linalg.cholesky(matrix + level * identity, lower=True, check_finite=False), level
        except linalg.LinAlgError:
            continue
    raise SingularKernelError("Kernel matrix is not positive definite", attempted)


def fit(data: Dataset, cfg: KernelConfig) -> GpPosterior:
    """Fit the GP posterior on a dataset."""
    if data.n_points == 0:
        raise ContractViolation("Cannot fit a Gaussian process on an empty dataset")

    standardizer = Standardizer.fit(data.features)
    features = standardizer.transform(data.features)

    gram = cross_kernel(features, features, cfg.length_scale)
    gram[np.diag_indices_from(gram)] += cfg.noise_variance
    factor, jitter_used = stable_cholesky(gram, cfg.jitter)
    alpha = linalg.cho_solve((factor, True), data.responses, check_finite=False)

    return GpPosterior(
        training_features=features,
        alpha=alpha,
        cholesky_factor=factor,
        kernel=cfg,
        standardizer=standardizer,
        jitter_used=jitter_used,
    )


def predict_batch(post: GpPosterior, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Predictive means and standard deviations at every row of queries."""
    queries = np.asarray(queries, dtype=float)
    if queries.ndim == 1:
        queries = queries.reshape(1, -1)
    if queries.ndim != 2 or queries.shape[1] != post.n_features:
        raise ContractViolation(
            f"Query dimension {queries.shape[-1]} does not match training dimension {post.n_features}"
        )

    cfg = post.kernel
    means = np.empty(queries.shape[0])
    variances = np.empty(queries.shape[0])
    for start in range(0, queries.shape[0], PREDICT_CHUNK):
        stop = start + PREDICT_CHUNK
        standardized = post.standardizer.transform(queries[start:stop])
        k_star = cross_kernel(standardized, post.training_features, cfg.length_scale)
        means[start:stop] = k_star @ post.alpha
        v = linalg.solve_triangular(post.cholesky_factor, k_star.T, lower=True, check_finite=False)
        # the quadratic form never exceeds the prior variance k(x, x) = 1
        explained = np.minimum(np.sum(v ** 2, axis=0), 1.0)
        variances[start:stop] = cfg.noise_variance + 1.0 - explained

    return means, np.sqrt(variances)


def predict(post: GpPosterior, query: np.ndarray) -> Prediction:
    """Predictive mean and standard deviation at a single point."""
    query = np.asarray(query, dtype=float).reshape(-1)
    if query.size != post.n_features:
        raise ContractViolation(
            f"Query dimension {query.size} does not match training dimension {post.n_features}"
        )
    means, std_devs = predict_batch(post, query.reshape(1, -1))
    return Prediction(mean=float(means[0]), std_dev=float(std_devs[0]))
