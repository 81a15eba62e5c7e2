"""Dense-matrix helpers, descriptive statistics and Gaussian divergence.

Matrices are plain ``float64`` numpy arrays; :func:`as_matrix` is the
validating constructor used at every public entry point.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import (
    AllTied,
    DimensionMismatch,
    InvalidBeta,
    LengthMismatch,
    NonFiniteInput,
    NotSymmetric,
    TooShort,
    ZeroVariance,
)


def as_matrix(x, name="matrix"):
    """Return ``x`` as a finite 2-D float64 array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return a


def as_vector(x, name="vector"):
    a = np.asarray(x, dtype=np.float64).ravel()
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return a


def is_degenerate(centered, scale):
    """True when a centered vector carries no variance beyond rounding."""
    spread = np.sqrt(np.dot(centered, centered))
    return scale == 0.0 or spread <= 1e-13 * scale * np.sqrt(len(centered))


def pearson(x, y):
    """Sample Pearson correlation coefficient.

    Raises :class:`ZeroVariance` when either vector is constant.
    """
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise TooShort("pearson needs at least 2 observations")
    xc = x - x.mean()
    yc = y - y.mean()
    if is_degenerate(xc, np.abs(x).max()) or is_degenerate(yc, np.abs(y).max()):
        raise ZeroVariance("zero-variance input to pearson")
    r = np.dot(xc, yc) / np.sqrt(np.dot(xc, xc) * np.dot(yc, yc))
    return float(np.clip(r, -1.0, 1.0))


def spearman(x, y):
    """Spearman rank correlation; ties get average ranks."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if len(x) != len(y):
        raise LengthMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise TooShort("spearman needs at least 2 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise AllTied("all entries of one input are equal")
    return pearson(rankdata(x), rankdata(y))


def symmetric_eigendecomposition(K, tol=1e-8):
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix."""
    K = as_matrix(K, "K")
    if K.shape[0] != K.shape[1]:
        raise NotSymmetric(f"matrix is not square: {K.shape}")
    scale = max(1.0, float(np.abs(K).max()))
    if np.abs(K - K.T).max() > tol * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh(0.5 * (K + K.T))
    order = np.argsort(w, kind="stable")[::-1]
    return w[order], V[:, order]


@dataclass(frozen=True)
class GaussianSummary:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = as_vector(self.mean, "mean")
        cov = as_matrix(np.atleast_2d(self.covariance), "covariance")
        p = len(mean)
        if cov.shape != (p, p):
            raise DimensionMismatch(f"covariance shape {cov.shape} does not match mean length {p}")
        if np.abs(cov - cov.T).max() > 1e-10 * max(1.0, np.abs(cov).max()):
            raise NotSymmetric("covariance not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self):
        return len(self.mean)

    @classmethod
    def from_samples(cls, samples, diagonal=False):
        """Mean and (population) covariance of an ``n x p`` sample matrix."""
        Z = as_matrix(samples, "samples")
        mu = Z.mean(axis=0)
        Zc = Z - mu
        cov = Zc.T @ Zc / Z.shape[0]
        if diagonal:
            cov = np.diag(np.diag(cov))
        return cls(mu, 0.5 * (cov + cov.T))


def regularize_covariance(cov):
    """Add ``eps * I`` with ``eps = max(1e-8, 1e-8 * tr(cov) / p)``."""
    p = cov.shape[0]
    eps = max(1e-8, 1e-8 * float(np.trace(cov)) / p)
    return cov + eps * np.eye(p)


def gaussian_kl(P, Q):
    """KL(P || Q) between two multivariate normals, in nats."""
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions differ: {P.dim} vs {Q.dim}")
    if (np.array_equal(P.mean, Q.mean)
            and np.array_equal(P.covariance, Q.covariance)):
        return 0.0
    p = P.dim
    Sp = regularize_covariance(P.covariance)
    Sq = regularize_covariance(Q.covariance)
    Lq = np.linalg.cholesky(Sq)
    Lp = np.linalg.cholesky(Sp)
    # tr(Sq^-1 Sp) = ||Lq^-1 Lp||_F^2
    A = np.linalg.solve(Lq, Lp)
    diff = np.linalg.solve(Lq, Q.mean - P.mean)
    logdet_q = 2.0 * np.sum(np.log(np.diag(Lq)))
    logdet_p = 2.0 * np.sum(np.log(np.diag(Lp)))
    kl = 0.5 * (np.sum(A * A) + np.dot(diff, diff) - p + logdet_q - logdet_p)
    return float(max(kl, 0.0))


def gamma_weights(T, beta):
    """Time-step weights proportional to the Gamma(beta, 1) density at t = 1..T.

    Evaluated in log space so large ``T`` or ``beta`` cannot overflow.
    """
    if not (np.isfinite(beta) and beta > 0):
        raise InvalidBeta(f"beta must be positive, got {beta}")
    if T < 1:
        raise TooShort("need at least one time step")
    t = np.arange(1, T + 1, dtype=np.float64)
    logw = (beta - 1.0) * np.log(t) - t
    w = np.exp(logw - logw.max())
    return w / w.sum()


def moments(x):
    """Return ``(mean, variance, skewness, excess_kurtosis)``.

    Variance is the population (ddof=0) variance; skewness and kurtosis
    are the plain moment ratios, with 3 subtracted from the kurtosis.
    """
    x = as_vector(x, "x")
    if len(x) < 4:
        raise TooShort("moments need at least 4 observations")
    mu = x.mean()
    xc = x - mu
    var = float(np.mean(xc * xc))
    if is_degenerate(xc, np.abs(x).max()):
        raise ZeroVariance("zero-variance sample")
    sd = np.sqrt(var)
    z = xc / sd
    skew = float(np.mean(z ** 3))
    kurt = float(np.mean(z ** 4) - 3.0)
    return float(mu), var, skew, kurt
