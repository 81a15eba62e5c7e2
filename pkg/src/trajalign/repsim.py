"""Similarity scores between predicted and observed signal matrices."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    AllColumnsDegenerate,
    DegenerateRDM,
    DimensionMismatch,
    InsufficientSamples,
    NonFiniteInput,
    ShapeMismatch,
    SizeMismatch,
    WindowTooLarge,
    ZeroMatrix,
)
from .numcore import as_matrix, is_degenerate, pearson, spearman


def _same_shape(pred, obs):
    pred = as_matrix(pred, "pred")
    obs = as_matrix(obs, "obs")
    if pred.shape != obs.shape:
        raise ShapeMismatch(f"shapes differ: {pred.shape} vs {obs.shape}")
    return pred, obs


def mse(pred, obs):
    pred, obs = _same_shape(pred, obs)
    diff = pred - obs
    return float(np.mean(diff * diff))


def column_pearsons(pred, obs):
    """Per-column Pearson r; NaN where either column has zero variance."""
    pred, obs = _same_shape(pred, obs)
    pc = pred - pred.mean(axis=0)
    oc = obs - obs.mean(axis=0)
    out = np.full(pred.shape[1], np.nan)
    for j in range(pred.shape[1]):
        if is_degenerate(pc[:, j], np.abs(pred[:, j]).max()):
            continue
        if is_degenerate(oc[:, j], np.abs(obs[:, j]).max()):
            continue
        r = np.dot(pc[:, j], oc[:, j]) / np.sqrt(np.dot(pc[:, j], pc[:, j]) * np.dot(oc[:, j], oc[:, j]))
        out[j] = np.clip(r, -1.0, 1.0)
    return out


def pearson_score(pred, obs):
    """Mean per-column Pearson r, skipping zero-variance columns."""
    cols = column_pearsons(pred, obs)
    ok = np.isfinite(cols)
    if not ok.any():
        raise AllColumnsDegenerate("every column has zero variance")
    return float(cols[ok].mean())


@dataclass(frozen=True)
class RDM:
    distances: np.ndarray
    metric: str = "euclidean"

    def __post_init__(self):
        D = as_matrix(self.distances, "distances")
        if D.shape[0] != D.shape[1]:
            raise DimensionMismatch(f"RDM must be square, got {D.shape}")
        if not np.array_equal(D, D.T):
            raise DimensionMismatch("RDM must be symmetric")
        if np.any(np.diag(D) != 0) or np.any(D < 0):
            raise DimensionMismatch("RDM needs a zero diagonal and nonnegative entries")
        object.__setattr__(self, "distances", D)

    @property
    def size(self):
        return self.distances.shape[0]

    def upper(self):
        return self.distances[np.triu_indices(self.size, k=1)]


def compute_rdm(X, metric="euclidean"):
    """Pairwise distances between the rows of ``X``.

    ``metric`` is ``"euclidean"`` (default) or ``"cosine"`` (1 - cosine
    similarity, offered for sensitivity checks).
    """
    X = as_matrix(X, "X")
    if X.shape[0] < 2:
        raise InsufficientSamples("an RDM needs at least 2 rows")
    if metric == "euclidean":
        D = kernels.pairwise_euclidean(np.ascontiguousarray(X))
    elif metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        if np.any(norms == 0):
            raise ZeroMatrix("cosine distance undefined for all-zero rows")
        U = X / norms[:, None]
        D = np.clip(1.0 - U @ U.T, 0.0, 2.0)
        D = 0.5 * (D + D.T)
        np.fill_diagonal(D, 0.0)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return RDM(D, metric)


def _paired_upper(a, b):
    if a.size != b.size:
        raise SizeMismatch(f"RDM sizes differ: {a.size} vs {b.size}")
    if a.size < 3:
        raise SizeMismatch("RSA needs RDMs of size at least 3")
    ua, ub = a.upper(), b.upper()
    if np.all(ua == ua[0]) or np.all(ub == ub[0]):
        raise DegenerateRDM("all distances in an RDM are equal")
    return ua, ub


def rsa_score(a, b):
    """Spearman correlation of the strict upper triangles."""
    return spearman(*_paired_upper(a, b))


def rdm_pearson(a, b):
    """Pearson correlation of the strict upper triangles (reported alongside RSA)."""
    return pearson(*_paired_upper(a, b))


def cka(A, B):
    """Linear CKA on column-centred inputs.

    ``||A^T B||_F^2 / (||A^T A||_F ||B^T B||_F)``; the two inputs may have
    different column counts but must share rows.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if A.shape[0] != B.shape[0]:
        raise ShapeMismatch(f"row counts differ: {A.shape[0]} vs {B.shape[0]}")
    if A.shape[0] < 2:
        raise InsufficientSamples("CKA needs at least 2 rows")
    Ac = A - A.mean(axis=0)
    Bc = B - B.mean(axis=0)
    if is_degenerate(Ac.ravel(), np.abs(A).max()) or is_degenerate(Bc.ravel(), np.abs(B).max()):
        raise ZeroMatrix("input is all-zero after centering")
    # rescale first so squared Frobenius norms cannot overflow
    Ac = Ac / np.linalg.norm(Ac)
    Bc = Bc / np.linalg.norm(Bc)
    num = np.linalg.norm(Ac.T @ Bc) ** 2
    den = np.linalg.norm(Ac.T @ Ac) * np.linalg.norm(Bc.T @ Bc)
    return float(np.clip(num / den, 0.0, 1.0))


@dataclass
class STCorrelationMap:
    channels: list
    time_bins: list
    values: np.ndarray
    skipped: list


def _epochs(x, name):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 3:
        raise DimensionMismatch(f"{name} must be samples x channels x times, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    return a


def st_correlation(obs_epochs, pred_epochs, channels=None, time_bins=None):
    """Per-(channel, time) Pearson r across samples.

    Cells with zero variance on either side are NaN and listed in
    ``skipped`` as ``(channel_index, time_index)``.
    """
    obs = _epochs(obs_epochs, "obs_epochs")
    pred = _epochs(pred_epochs, "pred_epochs")
    if obs.shape != pred.shape:
        raise ShapeMismatch(f"shapes differ: {obs.shape} vs {pred.shape}")
    n, c, t = obs.shape
    if n < 2:
        raise InsufficientSamples("need at least 2 samples")
    cols = column_pearsons(pred.reshape(n, c * t), obs.reshape(n, c * t)).reshape(c, t)
    skipped = [(int(i), int(j)) for i, j in zip(*np.nonzero(~np.isfinite(cols)))]
    channels = list(channels) if channels is not None else [f"ch{i}" for i in range(c)]
    time_bins = list(time_bins) if time_bins is not None else [f"t{j}" for j in range(t)]
    return STCorrelationMap(channels, time_bins, cols, skipped)


@dataclass
class ConnectivityMatrix:
    channels: list
    window_start: int
    window_end: int
    values: np.ndarray
    skipped: list


def window_starts(n_times, window, stride):
    if window < 1 or stride < 1:
        raise WindowTooLarge("window and stride must be positive")
    if window > n_times:
        raise WindowTooLarge(f"window {window} exceeds {n_times} time points")
    return list(range(0, n_times - window + 1, stride))


def functional_connectivity(sig_epochs, window, stride, channels=None):
    """Channel x channel Pearson r per sliding window.

    Each window pools every (sample, in-window time point) pair as one
    observation. Partial trailing windows are dropped. Channels with zero
    variance in a window get NaN rows/columns (diagonal kept at 1).
    """
    x = _epochs(sig_epochs, "sig_epochs")
    n, c, t = x.shape
    channels = list(channels) if channels is not None else [f"ch{i}" for i in range(c)]
    out = []
    for start in window_starts(t, window, stride):
        block = x[:, :, start:start + window].transpose(0, 2, 1).reshape(-1, c)
        centered = block - block.mean(axis=0)
        ok = np.array([not is_degenerate(centered[:, j], np.abs(block[:, j]).max()) for j in range(c)])
        norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
        safe = np.where(ok, norms, 1.0)
        U = centered / safe
        R = np.clip(U.T @ U, -1.0, 1.0)
        R = 0.5 * (R + R.T)
        R[~ok, :] = np.nan
        R[:, ~ok] = np.nan
        np.fill_diagonal(R, 1.0)
        skipped = [channels[j] for j in np.flatnonzero(~ok)]
        out.append(ConnectivityMatrix(channels, start, start + window, R, skipped))
    return out
