import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from trajalign.errors import (
    AllTied,
    DimensionMismatch,
    InvalidBeta,
    LengthMismatch,
    NotSymmetric,
    TooShort,
    ZeroVariance,
)
from trajalign.numcore import (
    GaussianSummary,
    gamma_weights,
    gaussian_kl,
    moments,
    pearson,
    spearman,
    symmetric_eigendecomposition,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def brute_pearson(x, y):
    n = len(x)
    mx, my = sum(x) / n, sum(y) / n
    sx = math.sqrt(sum((a - mx) ** 2 for a in x) / n)
    sy = math.sqrt(sum((b - my) ** 2 for b in y) / n)
    return sum((a - mx) * (b - my) for a, b in zip(x, y)) / (sx * sy * n)


def brute_ranks(v):
    """Average ranks, 1-based, by explicit counting."""
    out = []
    for a in v:
        less = sum(1 for b in v if b < a)
        equal = sum(1 for b in v if b == a)
        out.append(less + (equal + 1) / 2)
    return out


class TestPearson:
    def test_linear(self):
        assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)

    def test_anti_linear(self):
        assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)

    def test_brute_force_case(self):
        expected = brute_pearson([1, 2, 4], [1, 3, 3])
        assert expected == pytest.approx(math.sqrt(4 / 7), rel=1e-14)
        assert pearson([1, 2, 4], [1, 3, 3]) == pytest.approx(expected, rel=1e-14)

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            pearson([1, 2], [1, 2, 3])
        with pytest.raises(ZeroVariance):
            pearson([1, 1, 1], [1, 2, 3])
        with pytest.raises(ZeroVariance):
            pearson([0.1, 0.1, 0.1, 0.1, 0.1], [1, 2, 3, 4, 5])

    @given(arrays(np.float64, st.integers(3, 30), elements=finite),
           st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariance(self, x, a, b):
        if np.ptp(x) < 1e-3:
            return
        assert pearson(x, a * x + b) == pytest.approx(1.0, abs=1e-12)
        assert pearson(x, -a * x + b) == pytest.approx(-1.0, abs=1e-12)


class TestSpearman:
    def test_increasing(self):
        assert spearman([1, 2, 3, 7], [0.1, 5, 6, 100]) == pytest.approx(1.0)

    def test_decreasing(self):
        assert spearman([1, 2, 3, 7], [9, 5, 2, -1]) == pytest.approx(-1.0)

    def test_rank_oracle(self):
        x, y = [1, 5, 2], [10, 20, 30]
        expected = brute_pearson(brute_ranks(x), brute_ranks(y))
        assert expected == pytest.approx(0.5)
        assert spearman(x, y) == pytest.approx(expected, rel=1e-14)

    def test_ties_average(self):
        x, y = [1, 2, 2, 3, 5], [3, 1, 4, 1, 5]
        expected = brute_pearson(brute_ranks(x), brute_ranks(y))
        assert spearman(x, y) == pytest.approx(expected, rel=1e-14)

    def test_all_tied(self):
        with pytest.raises(AllTied):
            spearman([2, 2, 2], [1, 2, 3])

    @given(st.lists(st.integers(-1000, 1000), min_size=3, max_size=25, unique=True),
           st.lists(st.integers(-1000, 1000), min_size=25, max_size=25, unique=True))
    def test_monotone_invariance(self, x, y):
        x = np.array(x, dtype=np.float64)
        y = np.array(y[:len(x)], dtype=np.float64)
        base = spearman(x, y)
        assert spearman(np.exp(x / 1e3), y) == pytest.approx(base, abs=1e-12)
        assert spearman(x, y ** 3 + 2 * y) == pytest.approx(base, abs=1e-12)


class TestEigen:
    def test_identity(self):
        w, V = symmetric_eigendecomposition(np.eye(3))
        np.testing.assert_allclose(w, [1, 1, 1])

    def test_diag(self):
        w, V = symmetric_eigendecomposition(np.diag([1.0, 3.0]))
        np.testing.assert_allclose(w, [3, 1])
        np.testing.assert_allclose(np.abs(V), [[0, 1], [1, 0]])

    def test_reconstruction(self, rng):
        A = rng.standard_normal((5, 5))
        K = A + A.T
        w, V = symmetric_eigendecomposition(K)
        assert np.all(np.diff(w) <= 0)
        resid = np.linalg.norm(V @ np.diag(w) @ V.T - K)
        assert resid <= 1e-8 * np.linalg.norm(K)
        np.testing.assert_allclose(V.T @ V, np.eye(5), atol=1e-12)

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            symmetric_eigendecomposition([[1.0, 2.0], [0.0, 1.0]])

    @settings(max_examples=50)
    @given(arrays(np.float64, (6, 4), elements=st.floats(-10, 10)))
    def test_psd_eigenvalues_nonnegative(self, A):
        K = A @ A.T
        w, _ = symmetric_eigendecomposition(K)
        assert w.min() >= -1e-9 * max(np.trace(K), 1e-300)


class TestGaussianKL:
    def test_identical(self, rng):
        A = rng.standard_normal((4, 4))
        P = GaussianSummary(rng.standard_normal(4), A @ A.T)
        assert gaussian_kl(P, P) == 0.0

    def test_mean_shift(self):
        kl = gaussian_kl(GaussianSummary([0.0], [[1.0]]), GaussianSummary([1.0], [[1.0]]))
        assert kl == pytest.approx(0.5, abs=1e-7)

    def test_variance_ratio(self):
        expected = 0.5 * (2 - 1 - math.log(2))
        assert expected == pytest.approx(0.15343, abs=1e-5)
        kl = gaussian_kl(GaussianSummary([0.0], [[2.0]]), GaussianSummary([0.0], [[1.0]]))
        assert kl == pytest.approx(expected, abs=1e-7)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            gaussian_kl(GaussianSummary([0.0], [[1.0]]), GaussianSummary([0.0, 0.0], np.eye(2)))

    def test_singular_covariance_is_regularized(self):
        P = GaussianSummary([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]])
        Q = GaussianSummary([0.0, 0.0], np.eye(2))
        assert np.isfinite(gaussian_kl(P, Q))
        assert np.isfinite(gaussian_kl(Q, P))

    @settings(max_examples=60)
    @given(st.integers(1, 5), st.integers(0, 2**31))
    def test_nonnegative(self, p, seed):
        r = np.random.default_rng(seed)
        A, B = r.standard_normal((p, p)), r.standard_normal((p, p))
        P = GaussianSummary(r.standard_normal(p), A @ A.T)
        Q = GaussianSummary(r.standard_normal(p), B @ B.T + 0.1 * np.eye(p))
        assert gaussian_kl(P, Q) >= 0.0


class TestGammaWeights:
    def test_single_step(self):
        np.testing.assert_allclose(gamma_weights(1, 3.7), [1.0])

    def test_beta_one(self):
        raw = np.array([math.exp(-1), math.exp(-2), math.exp(-3)])
        np.testing.assert_allclose(gamma_weights(3, 1.0), raw / raw.sum(), rtol=1e-14)

    def test_density_shape(self):
        t = np.arange(1, 6)
        raw = np.array([ti ** 1.5 * math.exp(-ti) for ti in t])
        np.testing.assert_allclose(gamma_weights(5, 2.5), raw / raw.sum(), rtol=1e-13)

    @given(st.integers(1, 400), st.floats(0.05, 200))
    def test_normalized(self, T, beta):
        w = gamma_weights(T, beta)
        assert len(w) == T
        assert np.all(w >= 0)
        assert abs(w.sum() - 1.0) <= 1e-12

    @pytest.mark.parametrize("beta", [0.0, -1.0, float("nan")])
    def test_invalid_beta(self, beta):
        with pytest.raises(InvalidBeta):
            gamma_weights(3, beta)


class TestMoments:
    def test_symmetric_sample(self):
        _, _, skew, _ = moments([-1, 0, 1, 0])
        assert skew == pytest.approx(0.0, abs=1e-15)

    def test_brute_force(self):
        x = [0, 0, 0, 1]
        n = len(x)
        mu = sum(x) / n
        m2 = sum((v - mu) ** 2 for v in x) / n
        m3 = sum((v - mu) ** 3 for v in x) / n
        m4 = sum((v - mu) ** 4 for v in x) / n
        expected_skew = m3 / m2 ** 1.5
        expected_kurt = m4 / m2 ** 2 - 3
        assert expected_skew == pytest.approx(2 / math.sqrt(3))
        assert expected_kurt == pytest.approx(-2 / 3)
        mean, var, skew, kurt = moments(x)
        assert (mean, var) == pytest.approx((mu, m2))
        assert skew == pytest.approx(expected_skew, rel=1e-13)
        assert kurt == pytest.approx(expected_kurt, rel=1e-13)

    def test_normal_monte_carlo(self):
        x = np.random.default_rng(12345).standard_normal(100_000)
        _, _, skew, kurt = moments(x)
        assert abs(skew) <= 0.05
        assert abs(kurt) <= 0.1

    def test_errors(self):
        with pytest.raises(TooShort):
            moments([1, 2, 3])
        with pytest.raises(ZeroVariance):
            moments([2, 2, 2, 2])

    @given(arrays(np.float64, st.integers(4, 40), elements=finite),
           st.floats(0.1, 10), st.floats(-50, 50))
    def test_sign_flip_and_affine(self, x, a, b):
        if np.ptp(x) < 1e-2:
            return
        _, _, s, k = moments(x)
        _, _, s_neg, _ = moments(-x)
        _, _, _, k_aff = moments(a * x + b)
        assert s_neg == pytest.approx(-s, abs=1e-9)
        assert k_aff == pytest.approx(k, abs=1e-8)
