"""Latent trajectory comparison.

A trajectory is an ordered list of states ``h_0 .. h_L``: per time window
for recorded signals, per layer for model embeddings. This module turns
either source into a trajectory and computes its step geometry,
matrix-based entropy, confidence, binned mutual information, moment and
Lyapunov descriptors, plus the DRA alignment score between two systems.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .encoding import EmbeddingTensor, SignalMatrix
from .errors import (
    DegenerateProjection,
    DegenerateSeries,
    DegenerateVariance,
    DimensionMismatch,
    InvalidConfig,
    LengthMismatch,
    NoValidPairs,
    NonFiniteInput,
    NumericError,
    TooFewSteps,
    TooShort,
    ZeroState,
    ZeroTrace,
)
from .numcore import (
    GaussianSummary,
    as_matrix,
    gamma_weights,
    gaussian_kl,
    is_degenerate,
    moments,
    pearson,
    symmetric_eigendecomposition,
)
from .repsim import window_starts

AXES = ("time", "layer")
SHARE_FLOOR = 1e-12


@dataclass
class Trajectory:
    states: np.ndarray
    axis: str = "layer"
    step_labels: list = None

    def __post_init__(self):
        s = np.asarray(self.states, dtype=np.float64)
        if s.ndim == 1:
            s = s[:, None]
        if s.ndim != 2:
            raise DimensionMismatch(f"states must be steps x dim, got {s.shape}")
        if s.shape[0] < 2:
            raise TooFewSteps("a trajectory needs at least 2 states")
        if not np.all(np.isfinite(s)):
            raise NonFiniteInput("trajectory states contain NaN or Inf")
        if self.axis not in AXES:
            raise InvalidConfig(f"axis must be one of {AXES}, got {self.axis!r}")
        self.states = s
        if self.step_labels is None:
            self.step_labels = [f"{self.axis}{i}" for i in range(s.shape[0])]
        if len(self.step_labels) != s.shape[0]:
            raise LengthMismatch("one label per state required")

    def __len__(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]


@dataclass
class StateEnsemble:
    """Per-step ``N x D`` matrices of per-sample states, stored as ``steps x N x D``."""

    steps: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.steps, dtype=np.float64)
        if a.ndim != 3:
            raise DimensionMismatch(f"ensemble must be steps x N x D, got {a.shape}")
        if a.shape[1] < 2:
            raise TooShort("an ensemble needs at least 2 samples per step")
        if not np.all(np.isfinite(a)):
            raise NonFiniteInput("ensemble contains NaN or Inf")
        self.steps = a

    def __len__(self):
        return self.steps.shape[0]

    def __getitem__(self, k):
        return self.steps[k]

    def mean_trajectory(self, axis, step_labels=None):
        return Trajectory(self.steps.mean(axis=1), axis, step_labels)


def build_trajectory(source, axis, reduce="mean", window=1, stride=1):
    """Trajectory from signal epochs (``axis="time"``) or embeddings (``axis="layer"``).

    ``source`` is a :class:`SignalMatrix` / ``N x channels x times`` array
    for the time axis, or an :class:`EmbeddingTensor` / ``N x L x D`` array
    for the layer axis. Time-axis states average the in-window time points
    per channel. ``reduce="mean"`` returns the sample-averaged
    :class:`Trajectory`; ``reduce="sample"`` returns ``(trajectory,
    ensemble)``.
    """
    if reduce not in ("mean", "sample"):
        raise InvalidConfig(f"reduce must be 'mean' or 'sample', got {reduce!r}")
    if axis == "time":
        x = source.epochs if isinstance(source, SignalMatrix) else np.asarray(source, dtype=np.float64)
        if x.ndim != 3:
            raise DimensionMismatch(f"time axis needs samples x channels x times, got {x.shape}")
        starts = window_starts(x.shape[2], window, stride)
        if len(starts) < 2:
            raise TooFewSteps(f"window={window}, stride={stride} gives {len(starts)} step(s)")
        steps = np.stack([x[:, :, s:s + window].mean(axis=2) for s in starts])
        labels = [f"t{s}-{s + window}" for s in starts]
    elif axis == "layer":
        x = source.data if isinstance(source, EmbeddingTensor) else np.asarray(source, dtype=np.float64)
        if x.ndim != 3:
            raise DimensionMismatch(f"layer axis needs samples x layers x dim, got {x.shape}")
        if x.shape[1] < 2:
            raise TooFewSteps("need at least 2 layers")
        steps = np.ascontiguousarray(x.transpose(1, 0, 2))
        labels = [f"layer{i}" for i in range(x.shape[1])]
    else:
        raise InvalidConfig(f"axis must be one of {AXES}, got {axis!r}")
    ens = StateEnsemble(steps) if steps.shape[1] >= 2 else None
    traj = Trajectory(steps.mean(axis=1), axis, labels)
    if reduce == "mean":
        return traj
    if ens is None:
        raise TooShort("an ensemble needs at least 2 samples")
    return traj, ens


# -- geometry -----------------------------------------------------------------

def _states(H):
    return H.states if isinstance(H, Trajectory) else Trajectory(H).states


def step_dynamics(H):
    """Per-step displacement norms and angles (radians).

    Angles are NaN where either adjacent state is the zero vector.
    """
    s = _states(H)
    diff = np.diff(s, axis=0)
    magnitudes = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    norms = np.linalg.norm(s, axis=1)
    angles = np.full(len(diff), np.nan)
    for l in range(len(diff)):
        a, b = norms[l], norms[l + 1]
        if a == 0 or b == 0:
            continue
        c = np.dot(s[l + 1], s[l]) / (b * a)
        angles[l] = math.acos(min(1.0, max(-1.0, c)))
    return magnitudes, angles


def _normalized_mean(values, scale):
    v = values[np.isfinite(values)]
    if len(v) == 0:
        return float("nan")
    scale = v.max() if scale is None else scale
    if scale == 0:
        return 0.0
    return float(np.mean(v / scale))


def normalized_dynamics(H, mag_scale=None, ang_scale=None):
    """Mean step magnitude and angle, each divided by a scale.

    Scales default to the trajectory's own maximum step; pass explicit
    values to normalize several trajectories by a shared constant.
    """
    mags, angs = step_dynamics(H)
    return _normalized_mean(mags, mag_scale), _normalized_mean(angs, ang_scale)


# -- entropy, confidence, mutual information -----------------------------------

def spectrum_shares(Z):
    """Normalized Gram-matrix eigenvalue shares above the 1e-12 floor."""
    Z = as_matrix(Z, "Z")
    n, d = Z.shape
    G = Z @ Z.T if n <= d else Z.T @ Z
    tr = float(np.trace(G))
    if not tr > 0:
        raise ZeroTrace("Gram matrix has zero trace")
    w, _ = symmetric_eigendecomposition(G)
    p = np.clip(w, 0.0, None) / tr
    return p[p > SHARE_FLOOR]


def matrix_entropy(Z, alpha=1.0):
    """Rényi entropy of order ``alpha`` of the Gram spectrum of ``Z`` (nats).

    ``alpha == 1`` gives the von Neumann limit.
    """
    if not alpha > 0:
        raise InvalidConfig(f"alpha must be positive, got {alpha}")
    p = spectrum_shares(Z)
    p = p / p.sum()
    if alpha == 1:
        h = -np.sum(p * np.log(p))
    else:
        h = np.log(np.sum(p ** alpha)) / (1.0 - alpha)
    return float(max(h, 0.0))


def confidence_series(entropies, epsilon=1e-8):
    s = np.asarray(entropies, dtype=np.float64)
    if s.size == 0 or not np.all(np.isfinite(s)):
        raise NonFiniteInput("entropies must be finite and non-empty")
    inv = 1.0 / (s + epsilon)
    return inv / inv.max()


def default_bins(n):
    """Cube-root rule, ``ceil(n ** (1/3))`` computed exactly on integers."""
    b = int(round(n ** (1.0 / 3.0)))
    while b ** 3 < n:
        b += 1
    while b > 1 and (b - 1) ** 3 >= n:
        b -= 1
    return max(2, b)


def first_pc_projection(states):
    """Project the rows of ``states`` onto their first principal axis.

    Returns None for zero-variance input.
    """
    X = as_matrix(states, "states")
    Xc = X - X.mean(axis=0)
    if is_degenerate(Xc.ravel(), np.abs(X).max()):
        return None
    if X.shape[1] == 1:
        return Xc[:, 0]
    _, V = symmetric_eigendecomposition(Xc.T @ Xc)
    return Xc @ V[:, 0]


def _digitize(v, bins):
    lo, hi = v.min(), v.max()
    idx = np.floor((v - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def _entropy_counts(counts):
    counts = np.sort(counts[counts > 0])
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def binned_entropy(states, bins=None):
    """Entropy (nats) of the equal-width binned first-PC projection."""
    proj = first_pc_projection(states)
    if proj is None:
        return 0.0
    bins = bins or default_bins(len(proj))
    return _entropy_counts(np.bincount(_digitize(proj, bins), minlength=bins))


def mutual_info(x_states, final_states, bins=None):
    """Plug-in mutual information between first-PC projections (nats).

    Each side is projected to its first principal component and cut into
    ``bins`` equal-width bins over its observed range; MI is then
    ``H(X) + H(Y) - H(X, Y)`` on the histogram. Zero-variance input gives
    0 with a warning.
    """
    X = as_matrix(x_states, "x_states")
    Y = as_matrix(final_states, "final_states")
    if X.shape[0] != Y.shape[0]:
        raise LengthMismatch(f"sample counts differ: {X.shape[0]} vs {Y.shape[0]}")
    n = X.shape[0]
    if n < 4:
        raise TooShort("mutual information needs at least 4 samples")
    bins = bins or default_bins(n)
    if bins < 2:
        raise InvalidConfig("bins must be at least 2")
    px, py = first_pc_projection(X), first_pc_projection(Y)
    if px is None or py is None:
        warnings.warn("zero-variance projection; mutual information set to 0", RuntimeWarning)
        return 0.0
    ix, iy = _digitize(px, bins), _digitize(py, bins)
    hx = _entropy_counts(np.bincount(ix, minlength=bins))
    hy = _entropy_counts(np.bincount(iy, minlength=bins))
    hxy = _entropy_counts(np.bincount(ix * bins + iy, minlength=bins * bins))
    return float(max(hx + hy - hxy, 0.0))


def mutual_info_from_counts(joint):
    """Discrete MI of a joint count table, as a direct double sum."""
    joint = np.asarray(joint, dtype=np.float64)
    p = joint / joint.sum()
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / (px @ py)[nz])))


# -- Lyapunov exponent ---------------------------------------------------------

def delay_embed(series, dim=2, lag=1):
    x = np.asarray(series, dtype=np.float64)
    m = len(x) - (dim - 1) * lag
    if m < 1:
        raise TooShort("series too short for the requested embedding")
    return np.ascontiguousarray(np.stack([x[i * lag:i * lag + m] for i in range(dim)], axis=1))


def rosenstein_divergence(series, dim=2, lag=1, min_tsep=1, max_steps=None):
    """Mean log distance between nearest-neighbour pairs after ``k`` steps.

    Returns an array indexed by ``k = 0 .. max_steps`` (possibly shorter if
    every pair collapses), or an empty array when all neighbours coincide.
    """
    x = np.asarray(series, dtype=np.float64)
    if len(x) < 8:
        raise TooShort("Lyapunov estimation needs at least 8 points")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("series contains NaN or Inf")
    Y = delay_embed(x, dim, lag)
    m = Y.shape[0]
    if max_steps is None:
        max_steps = max(1, min(20, m // 4))
    n = m - max_steps
    if n < 2:
        raise TooShort("series too short for the requested horizon")
    idx, dist = kernels.nearest_neighbors(Y, n, min_tsep)
    ref = np.flatnonzero((idx >= 0) & (dist > 0))
    if np.all(idx < 0):
        raise NoValidPairs("no neighbour pairs outside the temporal exclusion window")
    if len(ref) == 0:
        return np.empty(0)
    nbr = idx[ref]
    curve = []
    for k in range(max_steps + 1):
        diff = Y[ref + k] - Y[nbr + k]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        d = d[d > 0]
        if len(d) == 0:
            break
        curve.append(np.mean(np.log(d)))
    return np.array(curve)


def divergence_slope(curve, saturation=0.7):
    """Least-squares slope of the initial linear part of a log-divergence curve.

    The fit runs from step 0 to the first step where the curve has covered
    ``saturation`` of its rise to the maximum.
    """
    c = np.asarray(curve, dtype=np.float64)
    if len(c) < 2:
        return 0.0
    rise = c.max() - c[0]
    end = len(c) - 1
    if rise > 0:
        hit = np.flatnonzero(c[1:] >= c[0] + saturation * rise)
        end = max(int(hit[0]) + 1, 1) if len(hit) else end
    k = np.arange(end + 1, dtype=np.float64)
    kc = k - k.mean()
    return float(np.dot(kc, c[:end + 1] - c[:end + 1].mean()) / np.dot(kc, kc))


def lyapunov_exponent(series, dim=2, lag=1, min_tsep=1, max_steps=None):
    """Largest Lyapunov exponent (nats per step), Rosenstein-style.

    A series whose neighbours never separate yields 0.
    """
    curve = rosenstein_divergence(series, dim, lag, min_tsep, max_steps)
    if len(curve) == 0:
        return 0.0
    return divergence_slope(curve)


# -- resampling and PCA-1 --------------------------------------------------------

def resample_linear(values, length):
    """Linearly resample along axis 0 onto ``length`` evenly spaced points."""
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    if n == length:
        return v.copy()
    if n < 2:
        raise TooShort("need at least 2 points to resample")
    pos = np.linspace(0.0, n - 1.0, length)
    lo = np.minimum(np.floor(pos).astype(np.int64), n - 2)
    frac = pos - lo
    shape = (-1,) + (1,) * (v.ndim - 1)
    return v[lo] * (1.0 - frac).reshape(shape) + v[lo + 1] * frac.reshape(shape)


def pca_trajectory(source):
    """One first-principal-axis coordinate per step.

    ``source`` is a :class:`Trajectory` or :class:`StateEnsemble`; for an
    ensemble every sample row is projected and the step coordinate is the
    mean over samples. The sign is chosen so the last step's coordinate is
    not below the first's.
    """
    if isinstance(source, StateEnsemble):
        S, N, D = source.steps.shape
        rows = source.steps.reshape(S * N, D)
        proj = first_pc_projection(rows)
        if proj is None:
            raise DegenerateVariance("ensemble states have zero variance")
        coords = proj.reshape(S, N).mean(axis=1)
    else:
        states = _states(source)
        proj = first_pc_projection(states)
        if proj is None:
            raise DegenerateVariance("trajectory states have zero variance")
        coords = proj
    if coords[-1] < coords[0]:
        coords = -coords
    return coords


# -- profiles ------------------------------------------------------------------

def transition_steps(series, top=1):
    """Heuristic change points: indices ``k`` with the largest |s[k] - s[k-1]|."""
    s = np.asarray(series, dtype=np.float64)
    if len(s) < 2:
        return []
    jumps = np.abs(np.diff(s))
    jumps = np.where(np.isfinite(jumps), jumps, -np.inf)
    order = np.argsort(-jumps, kind="stable")[:top]
    return [int(k) + 1 for k in order if np.isfinite(jumps[k])]


@dataclass
class TrajectoryProfile:
    step_magnitudes: np.ndarray
    step_angles: np.ndarray
    Mag: float
    Ang: float
    entropy_series: np.ndarray
    confidence_series: np.ndarray
    mi_series: np.ndarray
    skewness: float
    excess_kurtosis: float
    lyapunov: float | None
    pca1: np.ndarray
    notes: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)

    SERIES = ("magnitude", "angle", "entropy", "confidence", "mi")
    SCALARS = ("skewness", "excess_kurtosis", "lyapunov")

    def series(self, name):
        return {
            "magnitude": self.step_magnitudes,
            "angle": self.step_angles,
            "entropy": self.entropy_series,
            "confidence": self.confidence_series,
            "mi": self.mi_series,
        }[name]

    def to_dict(self):
        def clean(a):
            return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, dtype=np.float64)]

        def scalar(v):
            return None if v is None or not np.isfinite(v) else float(v)

        return {
            "series": {name: clean(self.series(name)) for name in self.SERIES},
            "dynamics": {"Mag": scalar(self.Mag), "Ang": scalar(self.Ang)},
            "descriptors": {name: scalar(getattr(self, name)) for name in self.SCALARS},
            "pca1": clean(self.pca1),
            "heuristic_transitions": {
                name: transition_steps(self.series(name)) for name in self.SERIES
            },
            "notes": self.notes,
            "settings": self.settings,
        }


def profile_trajectory(traj, ensemble=None, entropy_alpha=1.0, mi_bins=None, epsilon=1e-8):
    """Every per-step series and scalar descriptor for one system.

    Entropy and mutual information need the per-sample ``ensemble``;
    without it those series are NaN. Degenerate metrics are recorded in
    ``notes`` instead of raising.
    """
    notes = {}
    mags, angs = step_dynamics(traj)
    if np.any(~np.isfinite(angs)):
        notes["angle"] = f"zero state at steps {np.flatnonzero(~np.isfinite(angs)).tolist()}"
    Mag, Ang = normalized_dynamics(traj)
    S = len(traj)
    ent = np.full(S, np.nan)
    conf = np.full(S, np.nan)
    mi = np.full(S, np.nan)
    if ensemble is not None:
        if len(ensemble) != S:
            raise LengthMismatch("ensemble and trajectory lengths differ")
        try:
            ent = np.array([matrix_entropy(ensemble[k], entropy_alpha) for k in range(S)])
            conf = confidence_series(ent, epsilon)
        except ZeroTrace as exc:
            notes["entropy"] = str(exc)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            mi = np.array([mutual_info(ensemble[k], ensemble[S - 1], mi_bins) for k in range(S)])
        if caught:
            notes["mi"] = "zero-variance projection at some step; MI set to 0 there"
    else:
        notes["entropy"] = notes["mi"] = "no per-sample ensemble; series undefined"

    values = ensemble.steps.ravel() if ensemble is not None else traj.states.ravel()
    try:
        _, _, skew, kurt = moments(values)
    except NumericError as exc:
        skew = kurt = float("nan")
        notes["moments"] = str(exc)

    lyap = None
    try:
        pca1 = pca_trajectory(ensemble if ensemble is not None else traj)
    except DegenerateVariance as exc:
        pca1 = np.zeros(S)
        notes["pca1"] = str(exc)
    if len(pca1) < 8:
        notes["lyapunov"] = f"only {len(pca1)} steps; at least 8 required"
    else:
        try:
            lyap = lyapunov_exponent(pca1)
        except NumericError as exc:
            notes["lyapunov"] = str(exc)
        else:
            if len(pca1) < 32:
                notes["lyapunov"] = f"low confidence: {len(pca1)} points (< 32)"

    settings = {
        "entropy_alpha": entropy_alpha,
        "entropy_log_base": "e",
        "confidence_epsilon": epsilon,
        "mi_estimator": "plug-in H(X)+H(Y)-H(X,Y) on equal-width bins of first-PC projections",
        "mi_bins": mi_bins if mi_bins else "ceil(cbrt(N))",
        "magnitude_angle_scale": "per-trajectory max",
        "moments_over": "ensemble values" if ensemble is not None else "trajectory states",
        "lyapunov": "Rosenstein nearest-neighbour divergence on PCA-1 coordinates, dim=2 lag=1",
        "kurtosis": "excess (normal = 0)",
    }
    return TrajectoryProfile(mags, angs, Mag, Ang, ent, conf, mi, skew, kurt, lyap, pca1, notes, settings)


@dataclass
class AlignmentProfile:
    alignments: dict
    deltas: dict
    shared_scale: dict
    resampled_length: dict

    METRICS = ("entropy", "confidence", "magnitude", "angle", "mi")

    def to_dict(self):
        return {
            "alignments": self.alignments,
            "deltas": self.deltas,
            "shared_scale": self.shared_scale,
            "resampled_length": self.resampled_length,
            "resampling": "linear interpolation of the shorter series onto the longer grid",
        }


def _finite_or_none(v):
    return None if v is None or not np.isfinite(v) else float(v)


def align_profiles(eegP, llmP):
    """Pearson alignment per series plus signed scalar differences (EEG - LLM).

    Constant or undefined series give ``None`` for that metric.
    """
    alignments, lengths = {}, {}
    for name in AlignmentProfile.METRICS:
        a = np.asarray(eegP.series(name), dtype=np.float64)
        b = np.asarray(llmP.series(name), dtype=np.float64)
        n = max(len(a), len(b))
        lengths[name] = n
        if len(a) < 2 or len(b) < 2 or not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            alignments[name] = None
            continue
        try:
            alignments[name] = pearson(resample_linear(a, n), resample_linear(b, n))
        except (NumericError, DegenerateSeries):
            alignments[name] = None
    deltas = {}
    for name in ("skewness", "excess_kurtosis", "lyapunov"):
        a, b = getattr(eegP, name), getattr(llmP, name)
        deltas[name] = None if a is None or b is None else _finite_or_none(a - b)
    mag_scale = np.nanmax(np.concatenate([eegP.step_magnitudes, llmP.step_magnitudes]))
    ang_all = np.concatenate([eegP.step_angles, llmP.step_angles])
    ang_scale = np.nanmax(ang_all) if np.any(np.isfinite(ang_all)) else 0.0
    shared = {
        "eeg": {"Mag": _normalized_mean(eegP.step_magnitudes, mag_scale),
                "Ang": _normalized_mean(eegP.step_angles, ang_scale)},
        "llm": {"Mag": _normalized_mean(llmP.step_magnitudes, mag_scale),
                "Ang": _normalized_mean(llmP.step_angles, ang_scale)},
    }
    shared = {k: {m: _finite_or_none(v) for m, v in d.items()} for k, d in shared.items()}
    return AlignmentProfile(alignments, deltas, shared, lengths)


# -- DRA -------------------------------------------------------------------------

@dataclass(frozen=True)
class DraConfig:
    beta: float = 1.0
    alpha_penalty: float = 1.0
    epsilon: float = 1e-8
    normalization: str = "convex"
    clamp_negative: bool = True
    common_dim: int | None = None

    def validate(self):
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise InvalidConfig(f"beta must be positive, got {self.beta}")
        if not 0 < self.alpha_penalty <= 5:
            raise InvalidConfig(f"alpha_penalty must lie in (0, 5], got {self.alpha_penalty}")
        if not self.epsilon > 0:
            raise InvalidConfig("epsilon must be positive")
        if self.normalization not in ("convex", "l2"):
            raise InvalidConfig(f"normalization must be 'convex' or 'l2', got {self.normalization!r}")
        if self.common_dim is not None and self.common_dim < 1:
            raise InvalidConfig("common_dim must be positive")

    def to_dict(self):
        return {
            "beta": self.beta,
            "alpha_penalty": self.alpha_penalty,
            "epsilon": self.epsilon,
            "normalization": self.normalization,
            "clamp_negative": self.clamp_negative,
            "common_dim": self.common_dim if self.common_dim is not None else "auto",
        }


@dataclass
class DraResult:
    value: float
    unclamped_value: float
    weights: np.ndarray
    cosines: np.ndarray
    coherences: np.ndarray
    kls: np.ndarray
    terms: np.ndarray
    config: DraConfig
    space: str = "native"
    resampled_to: int = 0

    def to_dict(self):
        return {
            "value": self.value,
            "unclamped_value": self.unclamped_value,
            "config": self.config.to_dict(),
            "common_space": self.space,
            "resampled_to": self.resampled_to,
            "weights": self.weights.tolist(),
            "cosine": self.cosines.tolist(),
            "coherence": self.coherences.tolist(),
            "kl": self.kls.tolist(),
            "terms": self.terms.tolist(),
        }


def dra_from_terms(cosines, coherences, kls, cfg=None):
    """Aggregate per-step cosine, coherence and KL terms into DRA.

    Returns ``(value, unclamped_value, weights, terms)``.
    """
    cfg = cfg or DraConfig()
    cfg.validate()
    cos = np.asarray(cosines, dtype=np.float64)
    coh = np.asarray(coherences, dtype=np.float64)
    kl = np.asarray(kls, dtype=np.float64)
    if not (cos.shape == coh.shape == kl.shape) or cos.ndim != 1:
        raise LengthMismatch("per-step term arrays must share one length")
    w = gamma_weights(len(cos), cfg.beta)
    raw = cos * coh * np.exp(-cfg.alpha_penalty * kl)
    x = np.maximum(raw, 0.0) if cfg.clamp_negative else raw

    def aggregate(terms):
        num = float(np.sum(w * terms))
        if cfg.normalization == "convex":
            return num
        wx = w * terms
        return num / math.sqrt(float(np.sum(wx * wx) + np.sum(w * w)))

    return aggregate(x), aggregate(raw), w, x


def _pca_axes(rows, k):
    Xc = rows - rows.mean(axis=0)
    _, V = symmetric_eigendecomposition(Xc.T @ Xc)
    V = V[:, :k]
    # deterministic orientation: largest-magnitude loading positive
    flip = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])])
    return V * np.where(flip == 0, 1.0, flip)


def _rank(rows):
    Xc = rows - rows.mean(axis=0)
    s = np.linalg.svd(Xc, compute_uv=False)
    return int(np.sum(s > 1e-10 * max(s[0], 1e-300))) if len(s) else 0


def _deltas(s):
    d = np.diff(s, axis=0)
    return np.vstack([d[:1], d])


def dra_report(E, L, cfg=None, E_ensemble=None, L_ensemble=None):
    """DRA between two trajectories with every intermediate term.

    Unequal lengths are linearly resampled to the longer one. Trajectories
    of different dimension (or when ``cfg.common_dim`` is set) are each
    projected onto their own top principal axes. Per-step Gaussians come
    from the ensembles when both are given; otherwise the covariances are
    identity and the KL term is half the squared mean distance.
    """
    cfg = cfg or DraConfig()
    cfg.validate()
    es, ls = _states(E), _states(L)
    T = max(len(es), len(ls))
    es, ls = resample_linear(es, T), resample_linear(ls, T)
    ee = resample_linear(E_ensemble.steps, T) if E_ensemble is not None else None
    le = resample_linear(L_ensemble.steps, T) if L_ensemble is not None else None

    space = "native"
    if es.shape[1] != ls.shape[1] or cfg.common_dim is not None:
        e_rows = ee.reshape(-1, ee.shape[2]) if ee is not None else es
        l_rows = le.reshape(-1, le.shape[2]) if le is not None else ls
        k = cfg.common_dim or max(1, min(es.shape[1], ls.shape[1], _rank(e_rows), _rank(l_rows)))
        if k > min(es.shape[1], ls.shape[1]):
            raise DimensionMismatch(f"common_dim={k} exceeds a trajectory dimension")
        Ve, Vl = _pca_axes(e_rows, k), _pca_axes(l_rows, k)
        es, ls = es @ Ve, ls @ Vl
        if ee is not None:
            ee = ee @ Ve
        if le is not None:
            le = le @ Vl
        space = f"pca{k}"

    ne, nl = np.linalg.norm(es, axis=1), np.linalg.norm(ls, axis=1)
    zero = np.flatnonzero((ne == 0) | (nl == 0))
    if len(zero):
        raise ZeroState(f"zero state at compared steps {zero.tolist()}")
    cosines = np.clip(np.einsum("ij,ij->i", es, ls) / (ne * nl), -1.0, 1.0)
    de, dl = _deltas(es), _deltas(ls)
    coherences = np.einsum("ij,ij->i", de, dl) / (
        np.linalg.norm(de, axis=1) * np.linalg.norm(dl, axis=1) + cfg.epsilon)

    if ee is not None and le is not None:
        kls = np.array([gaussian_kl(GaussianSummary.from_samples(ee[t]),
                                    GaussianSummary.from_samples(le[t])) for t in range(T)])
    else:
        # identity covariances: KL reduces to half the squared mean distance
        gap = es - ls
        kls = 0.5 * np.einsum("ij,ij->i", gap, gap)

    value, unclamped, w, terms = dra_from_terms(cosines, coherences, kls, cfg)
    return DraResult(value, unclamped, w, cosines, coherences, kls, terms, cfg, space, T)


def dra(E, L, cfg=None, E_ensemble=None, L_ensemble=None):
    """Dynamic representational alignment score; see :func:`dra_report`."""
    return dra_report(E, L, cfg, E_ensemble, L_ensemble).value
