"""Tests for Gaussian process regression."""

import math

import numpy as np
import pytest

from bo_survey import gp
from bo_survey.exceptions import ContractViolation, SingularKernelError
from bo_survey.models import Dataset, KernelConfig, KernelSettings


@pytest.fixture
def unit_kernel():
    """Kernel with unit length scale and unit noise."""
    return KernelConfig(length_scale=1.0, noise_variance=1.0)


def explicit_posterior(X, y, queries, cfg):
    """Predictive mean and variance with an explicit matrix inverse."""
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xs = (X - mean) / scale
    Qs = (queries - mean) / scale

    def k(A, B):
        d = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
        return np.exp(-d / (2.0 * cfg.length_scale ** 2))

    inverse = np.linalg.inv(k(Xs, Xs) + cfg.noise_variance * np.eye(len(X)))
    k_star = k(Qs, Xs)
    means = k_star @ inverse @ y
    variances = cfg.noise_variance + 1.0 - np.einsum("ij,jk,ik->i", k_star, inverse, k_star)
    return means, variances


def test_kernel_eval_examples():
    """Test kernel values on hand-computed examples."""
    cfg = KernelConfig(length_scale=1.0, noise_variance=0.1)
    assert gp.kernel_eval(np.array([0.3, -2.0]), np.array([0.3, -2.0]), cfg) == 1.0
    assert gp.kernel_eval(np.array([0.0]), np.array([math.sqrt(2.0)]), cfg) == pytest.approx(math.exp(-1.0))

    wide = KernelConfig(length_scale=2.0, noise_variance=0.1)
    assert gp.kernel_eval(np.array([1.0, 1.0]), np.array([0.0, 0.0]), wide) == pytest.approx(0.778801, abs=1e-6)


def test_kernel_eval_dimension_mismatch():
    """Test kernel evaluation rejects vectors of different length."""
    cfg = KernelConfig(length_scale=1.0, noise_variance=0.1)
    with pytest.raises(ContractViolation):
        gp.kernel_eval(np.array([0.0, 1.0]), np.array([0.0]), cfg)


def test_gram_matrix_examples():
    """Test Gram matrices on small inputs."""
    cfg = KernelConfig(length_scale=1.0, noise_variance=0.1)
    np.testing.assert_allclose(gp.gram_matrix(np.array([[0.5, 0.5]]), cfg), [[1.0]])
    np.testing.assert_allclose(gp.gram_matrix(np.array([[1.0], [1.0]]), cfg), np.ones((2, 2)))

    K = gp.gram_matrix(np.array([[0.0], [math.sqrt(2.0)]]), cfg)
    np.testing.assert_allclose(K, [[1.0, math.exp(-1.0)], [math.exp(-1.0), 1.0]])
    np.testing.assert_allclose(K, K.T)


def test_fit_single_point(unit_kernel):
    """Test the scalar solve and prediction at the sole training point."""
    data = Dataset(features=np.array([[0.0]]), responses=np.array([2.0]))
    post = gp.fit(data, unit_kernel)
    np.testing.assert_allclose(post.alpha, [1.0])

    pred = gp.predict(post, np.array([0.0]))
    assert pred.mean == pytest.approx(1.0)
    assert pred.std_dev ** 2 == pytest.approx(1.5)


def test_predict_matches_explicit_inverse():
    """Test predictions against explicit-inverse formulas on random instances."""
    rng = np.random.default_rng(20)
    for _ in range(50):
        n = int(rng.integers(2, 11))
        m = int(rng.integers(1, 6))
        X = rng.normal(size=(n, m))
        y = rng.normal(size=n)
        queries = np.vstack([X, rng.normal(size=(5, m))])
        cfg = KernelConfig(
            length_scale=float(rng.uniform(0.5, 2.0)),
            noise_variance=float(rng.uniform(0.05, 1.0)),
        )

        post = gp.fit(Dataset(features=X, responses=y), cfg)
        means, stds = gp.predict_batch(post, queries)
        expected_means, expected_variances = explicit_posterior(X, y, queries, cfg)

        np.testing.assert_allclose(means, expected_means, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(stds ** 2, expected_variances, rtol=1e-8, atol=1e-10)
        assert np.all(stds ** 2 >= cfg.noise_variance - 1e-8)


def test_predict_far_query_recovers_prior(unit_kernel):
    """Test that a query far from the data returns the prior."""
    data = Dataset(features=np.array([[0.0], [1.0], [2.0]]), responses=np.array([1.0, 3.0, 2.0]))
    post = gp.fit(data, unit_kernel)
    pred = gp.predict(post, np.array([1e3]))
    assert pred.mean == pytest.approx(0.0, abs=1e-12)
    assert pred.std_dev ** 2 == pytest.approx(2.0)


def test_large_noise_shrinks_predictions():
    """Test that predictions shrink toward zero as the noise grows."""
    data = Dataset(features=np.array([[0.0], [1.0]]), responses=np.array([5.0, 5.0]))
    small = gp.predict(gp.fit(data, KernelConfig(length_scale=1.0, noise_variance=0.01)), np.array([0.5]))
    large = gp.predict(gp.fit(data, KernelConfig(length_scale=1.0, noise_variance=1e6)), np.array([0.5]))
    assert abs(large.mean) < 1e-4
    assert abs(large.mean) < abs(small.mean)


def test_duplicate_points_fit():
    """Test fitting duplicate training points with consistent responses."""
    data = Dataset(features=np.array([[1.0], [1.0], [2.0]]), responses=np.array([1.0, 1.0, 0.0]))
    post = gp.fit(data, KernelConfig(length_scale=1.0, noise_variance=1e-10))
    pred = gp.predict(post, np.array([1.0]))
    assert np.isfinite(pred.mean)
    assert pred.std_dev >= 0


def test_stable_cholesky_escalates_jitter():
    """Test jitter escalation on a singular matrix."""
    factor, jitter = gp.stable_cholesky(np.ones((2, 2)))
    assert jitter > 0
    np.testing.assert_allclose(factor @ factor.T, np.ones((2, 2)) + jitter * np.eye(2))


def test_stable_cholesky_reports_failure():
    """Test that an indefinite matrix raises with the attempted jitter levels."""
    with pytest.raises(SingularKernelError) as exc_info:
        gp.stable_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert len(exc_info.value.jitter_levels) == len(gp.JITTER_LEVELS) + 1


def test_predict_dimension_mismatch(unit_kernel):
    """Test that queries of the wrong dimension are rejected."""
    data = Dataset(features=np.array([[0.0, 1.0], [1.0, 0.0]]), responses=np.array([1.0, 2.0]))
    post = gp.fit(data, unit_kernel)
    with pytest.raises(ContractViolation):
        gp.predict(post, np.array([0.0]))
    with pytest.raises(ContractViolation):
        gp.predict_batch(post, np.zeros((3, 3)))


def test_predictive_std_grows_with_distance(unit_kernel):
    """Test that the predictive uncertainty grows away from the data."""
    data = Dataset(features=np.array([[0.0], [1.0], [2.0]]), responses=np.array([0.0, 1.0, 0.0]))
    post = gp.fit(data, unit_kernel)
    near = gp.predict(post, np.array([1.0]))
    far = gp.predict(post, np.array([10.0]))
    assert far.std_dev > near.std_dev


def test_predict_agrees_with_batch(unit_kernel):
    """Test that single-point prediction matches the batch path."""
    rng = np.random.default_rng(3)
    data = Dataset(features=rng.normal(size=(6, 2)), responses=rng.normal(size=6))
    post = gp.fit(data, unit_kernel)
    queries = rng.normal(size=(4, 2))
    means, stds = gp.predict_batch(post, queries)
    for query, mean, std in zip(queries, means, stds):
        pred = gp.predict(post, query)
        assert pred.mean == pytest.approx(mean)
        assert pred.std_dev == pytest.approx(std)


def test_default_kernel_heuristics():
    """Test the median-distance length scale and the noise default."""
    data = Dataset(features=np.array([[0.0], [2.0]]), responses=np.array([1.0, 3.0]))
    cfg = gp.default_kernel(data)
    # standardized inputs are -1 and 1
    assert cfg.length_scale == pytest.approx(2.0)
    assert cfg.noise_variance == pytest.approx(0.2)


def test_default_kernel_degenerate_data():
    """Test fallbacks for coincident inputs and constant responses."""
    data = Dataset(features=np.ones((4, 2)), responses=np.full(4, 3.0))
    cfg = gp.default_kernel(data)
    assert cfg.length_scale == 1.0
    assert cfg.noise_variance == gp.NOISE_FLOOR


def test_default_kernel_overrides():
    """Test that explicit settings take precedence over the heuristics."""
    data = Dataset(features=np.array([[0.0], [2.0], [5.0]]), responses=np.array([1.0, 3.0, 0.0]))
    cfg = gp.default_kernel(data, KernelSettings(length_scale=0.7, noise_variance=0.05, jitter=1e-6))
    assert cfg == KernelConfig(length_scale=0.7, noise_variance=0.05, jitter=1e-6)


def test_gram_matrix_symmetric_positive_semidefinite():
    """Test symmetry and the smallest eigenvalue of Gram matrices on random inputs."""
    rng = np.random.default_rng(31)
    for _ in range(100):
        n = int(rng.integers(1, 21))
        m = int(rng.integers(1, 6))
        cfg = KernelConfig(length_scale=float(rng.uniform(0.1, 5.0)), noise_variance=0.1)
        K = gp.gram_matrix(rng.normal(size=(n, m)), cfg)
        np.testing.assert_allclose(K, K.T, rtol=0.0, atol=1e-12)
        assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_longer_length_scale_smooths_predictions():
    """Test that the gap between predictions at two points shrinks as the length scale grows."""
    # inputs standardize to -1 and 1; the gap is 2(1 - c) / (1 - c + noise) with c = exp(-2 / l^2)
    data = Dataset(features=np.array([[0.0], [1.0]]), responses=np.array([1.0, -1.0]))
    gaps = []
    for length_scale in (1.0, 10.0, 100.0):
        post = gp.fit(data, KernelConfig(length_scale=length_scale, noise_variance=0.1))
        means, _ = gp.predict_batch(post, np.array([[0.0], [1.0]]))
        gaps.append(abs(means[0] - means[1]))

    c = math.exp(-2.0)
    assert gaps[0] == pytest.approx(2.0 * (1.0 - c) / (1.1 - c))
    assert gaps[0] > gaps[1] > gaps[2]


def test_fit_and_predict_are_deterministic():
    """Test that identical inputs give bit-identical posteriors and predictions."""
    rng = np.random.default_rng(8)
    data = Dataset(features=rng.normal(size=(12, 3)), responses=rng.normal(size=12))
    queries = rng.normal(size=(7, 3))
    cfg = gp.default_kernel(data)

    first, second = gp.fit(data, cfg), gp.fit(data, cfg)
    assert np.array_equal(first.alpha, second.alpha)
    assert np.array_equal(first.cholesky_factor, second.cholesky_factor)
    for a, b in zip(gp.predict_batch(first, queries), gp.predict_batch(second, queries)):
        assert np.array_equal(a, b)
