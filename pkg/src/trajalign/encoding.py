"""Layerwise ridge encoding with nested K-fold cross-validation.

Each layer's embeddings are regressed onto the signal features. The outer
folds score held-out predictions; inside every outer training split an
inner K-fold loop picks the ridge penalty from a fixed grid.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import (
    DimensionMismatch,
    DuplicateIds,
    InsufficientSamples,
    InvalidConfig,
    NonFiniteInput,
    NumericError,
)
from .numcore import as_matrix
from .rng import Xoshiro256

DEFAULT_ALPHA_GRID = tuple(float(a) for a in np.logspace(-3, 3, 13))


def _check_ids(ids, n, what):
    ids = [str(i) for i in ids] if ids is not None else [f"s{i}" for i in range(n)]
    if len(ids) != n:
        raise DimensionMismatch(f"{len(ids)} {what} for {n} entries")
    if len(set(ids)) != len(ids):
        raise DuplicateIds(f"{what} are not unique")
    return ids


@dataclass
class SignalMatrix:
    """``N x d`` signal responses.

    When built from an ``N x channels x times`` tensor the features are the
    flattened channel-major grid and :attr:`epochs` restores the 3-D view.
    """

    data: np.ndarray
    sample_ids: list = None
    feature_labels: list = None
    channels: list = None
    n_times: int = 1

    def __post_init__(self):
        self.data = as_matrix(self.data, "signal")
        n, d = self.data.shape
        if n < 2:
            raise InsufficientSamples("a signal matrix needs at least 2 samples")
        self.sample_ids = _check_ids(self.sample_ids, n, "sample ids")
        if self.channels is None:
            self.channels = [f"ch{i}" for i in range(d // self.n_times)]
        if len(self.channels) * self.n_times != d:
            raise DimensionMismatch(
                f"{len(self.channels)} channels x {self.n_times} times != {d} features")
        if self.feature_labels is None:
            if self.n_times == 1:
                self.feature_labels = list(self.channels)
            else:
                self.feature_labels = [f"{c}@t{t}" for c in self.channels for t in range(self.n_times)]
        self.feature_labels = _check_ids(self.feature_labels, d, "feature labels")

    @classmethod
    def from_tensor(cls, tensor, sample_ids=None, channels=None):
        a = np.asarray(tensor, dtype=np.float64)
        if a.ndim == 2:
            return cls(a, sample_ids, channels=channels)
        if a.ndim != 3:
            raise DimensionMismatch(f"signal tensor must have 2 or 3 axes, got {a.ndim}")
        n, c, t = a.shape
        return cls(a.reshape(n, c * t), sample_ids, channels=channels, n_times=t)

    @property
    def n_samples(self):
        return self.data.shape[0]

    @property
    def epochs(self):
        """``N x channels x times`` view of the data."""
        return self.data.reshape(self.n_samples, len(self.channels), self.n_times)


@dataclass
class EmbeddingTensor:
    data: np.ndarray
    sample_ids: list = None

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 3:
            raise DimensionMismatch(f"embedding tensor must be N x L x D, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NonFiniteInput("embedding tensor contains NaN or Inf")
        self.data = a
        self.sample_ids = _check_ids(self.sample_ids, a.shape[0], "sample ids")

    @property
    def layer_count(self):
        return self.data.shape[1]

    @property
    def dim(self):
        return self.data.shape[2]

    def layer(self, index):
        return self.data[:, index, :]


@dataclass
class RidgeFit:
    weights: np.ndarray
    intercept: np.ndarray
    alpha: float
    feature_means: np.ndarray
    target_means: np.ndarray
    layer: int = -1
    fold: int = -1


def fit_ridge(features, targets, alpha):
    """Ridge regression on mean-centred features and targets.

    The intercept is unpenalised: ``intercept = target_means -
    feature_means @ weights``. Uses the ``n x n`` dual system when there
    are more features than samples.
    """
    X = as_matrix(features, "features")
    Y = as_matrix(targets, "targets")
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} feature rows vs {Y.shape[0]} target rows")
    if X.shape[0] < 2:
        raise InsufficientSamples("ridge needs at least 2 samples")
    if not alpha > 0:
        raise InvalidConfig(f"alpha must be positive, got {alpha}")
    mx = X.mean(axis=0)
    my = Y.mean(axis=0)
    Xc = X - mx
    Yc = Y - my
    n, D = Xc.shape
    try:
        if D <= n:
            W = linalg.solve(Xc.T @ Xc + alpha * np.eye(D), Xc.T @ Yc, assume_a="pos")
        else:
            W = Xc.T @ linalg.solve(Xc @ Xc.T + alpha * np.eye(n), Yc, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise NumericError(f"ridge system could not be solved: {exc}") from exc
    return RidgeFit(W, my - mx @ W, float(alpha), mx, my)


def predict(fit, features):
    X = as_matrix(features, "features")
    if X.shape[1] != fit.weights.shape[0]:
        raise DimensionMismatch(f"fit expects {fit.weights.shape[0]} features, got {X.shape[1]}")
    return (X - fit.feature_means) @ fit.weights + fit.target_means


@dataclass(frozen=True)
class EncodingConfig:
    outer_folds: int = 5
    inner_folds: int = 5
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    seed: int = 0

    def validate(self):
        if self.outer_folds < 2:
            raise InvalidConfig("outer_folds must be at least 2")
        if self.inner_folds < 2:
            raise InvalidConfig("inner_folds must be at least 2")
        grid = list(self.alpha_grid)
        if not grid:
            raise InvalidConfig("alpha_grid is empty")
        if any(not (a > 0) for a in grid):
            raise InvalidConfig("alpha_grid values must be positive")
        if grid != sorted(grid):
            raise InvalidConfig("alpha_grid must be sorted ascending")

    def to_dict(self):
        return {
            "outer_folds": self.outer_folds,
            "inner_folds": self.inner_folds,
            "alpha_grid": list(self.alpha_grid),
            "seed": self.seed,
        }


def _blocks(order, k):
    """Split ``order`` into ``k`` contiguous blocks, larger blocks first."""
    return np.array_split(np.asarray(order), k)


def assign_folds(n, k, seed):
    """Fold id per sample: seeded shuffle, then contiguous blocks."""
    perm = Xoshiro256(seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    for f, block in enumerate(_blocks(perm, k)):
        folds[block] = f
    return folds, perm


def select_alpha(X, Y, alpha_grid, inner_folds):
    """Alpha with the lowest mean inner-validation MSE (ties go to the smaller).

    ``X`` and ``Y`` rows are expected in the order the inner blocks should
    be cut from. Returns ``(alpha, mean_mse_per_alpha)``.
    """
    grid = np.asarray(alpha_grid, dtype=np.float64)
    scores = np.zeros(len(grid))
    for val in _blocks(np.arange(X.shape[0]), inner_folds):
        train = np.setdiff1d(np.arange(X.shape[0]), val)
        mx = X[train].mean(axis=0)
        my = Y[train].mean(axis=0)
        U, s, Vt = np.linalg.svd(X[train] - mx, full_matrices=False)
        UtY = U.T @ (Y[train] - my)
        Xv = X[val] - mx
        for a, alpha in enumerate(grid):
            W = Vt.T @ ((s / (s * s + alpha))[:, None] * UtY)
            resid = Xv @ W + my - Y[val]
            scores[a] += np.mean(resid * resid)
    scores /= inner_folds
    best = int(np.flatnonzero(scores == scores.min())[0])
    return float(grid[best]), scores


@dataclass
class EncodingReport:
    config: EncodingConfig
    folds: np.ndarray
    cells: list
    layers: list
    best_layer: int
    predictions: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "fold_assignment": [int(f) for f in self.folds],
            "cells": self.cells,
            "layers": self.layers,
            "best_layer": self.best_layer,
        }


def _score_split(pred, obs):
    from . import repsim

    cols = repsim.column_pearsons(pred, obs)
    out = {
        "mse": repsim.mse(pred, obs),
        "r": float(np.nanmean(cols)) if np.any(np.isfinite(cols)) else float("nan"),
        "skipped_columns": int(np.sum(~np.isfinite(cols))),
    }
    try:
        a, b = repsim.compute_rdm(pred), repsim.compute_rdm(obs)
        out["rsa"] = repsim.rsa_score(a, b)
        out["rdm_pearson"] = repsim.rdm_pearson(a, b)
    except (NumericError, InsufficientSamples, ValueError):
        out["rsa"] = out["rdm_pearson"] = float("nan")
    try:
        out["cka"] = repsim.cka(pred, obs)
    except NumericError:
        out["cka"] = float("nan")
    return out


def _run_layer(layer, X, Y, folds, perm, cfg):
    cells = []
    oof = np.zeros_like(Y)
    rank = np.empty(len(perm), dtype=np.int64)
    rank[perm] = np.arange(len(perm))
    for k in range(cfg.outer_folds):
        test = np.flatnonzero(folds == k)
        train = np.flatnonzero(folds != k)
        train = train[np.argsort(rank[train], kind="stable")]
        alpha, _ = select_alpha(X[train], Y[train], cfg.alpha_grid, cfg.inner_folds)
        fit = fit_ridge(X[train], Y[train], alpha)
        fit.layer, fit.fold = layer, k
        pred = predict(fit, X[test])
        oof[test] = pred
        cell = {"layer": layer, "fold": k, "alpha": alpha, "n_test": int(len(test))}
        cell.update(_score_split(pred, Y[test]))
        cells.append(cell)
    return cells, oof


def _nanmean(values):
    v = np.asarray(values, dtype=np.float64)
    return float(np.mean(v[np.isfinite(v)])) if np.any(np.isfinite(v)) else float("nan")


def nested_cv_encode(emb, sig, cfg=None, n_jobs=1):
    """Fit and score every layer; returns an :class:`EncodingReport`.

    Layers may run on a thread pool (``n_jobs``); results are assembled in
    layer order, so the report does not depend on scheduling.
    """
    cfg = cfg or EncodingConfig()
    cfg.validate()
    if list(emb.sample_ids) != list(sig.sample_ids):
        raise DimensionMismatch("embedding and signal sample ids are not aligned")
    N = sig.n_samples
    if N < 2 * cfg.outer_folds:
        raise InsufficientSamples(f"need at least {2 * cfg.outer_folds} samples, have {N}")
    min_train = N - int(np.ceil(N / cfg.outer_folds))
    if min_train < 2 * cfg.inner_folds:
        raise InsufficientSamples("outer training split too small for the inner folds")
    folds, perm = assign_folds(N, cfg.outer_folds, cfg.seed)
    Y = sig.data

    def work(layer):
        return _run_layer(layer, emb.layer(layer), Y, folds, perm, cfg)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, range(emb.layer_count)))
    else:
        results = [work(layer) for layer in range(emb.layer_count)]

    cells, layers, predictions = [], [], {}
    for layer, (layer_cells, oof) in enumerate(results):
        cells.extend(layer_cells)
        predictions[layer] = oof
        summary = {"layer": layer}
        for key in ("mse", "r", "rsa", "rdm_pearson", "cka"):
            summary[key] = _nanmean([c[key] for c in layer_cells])
        summary["alphas"] = [c["alpha"] for c in layer_cells]
        layers.append(summary)
    r = np.array([s["r"] for s in layers])
    r = np.where(np.isfinite(r), r, -np.inf)
    best = int(np.flatnonzero(r == r.max())[0])
    return EncodingReport(cfg, folds, cells, layers, best, predictions)
