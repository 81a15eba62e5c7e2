"""Pure-Python/numpy fallback for the compiled kernels in ``_ckernels.pyx``."""

import numpy as np

BACKEND = "python"

_MASK = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data):
    h = _FNV_OFFSET
    for b in bytes(data):
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


def xoshiro_fill(state, n):
    """Advance xoshiro256** ``n`` times; ``state`` is updated in place."""
    s0, s1, s2, s3 = (int(v) for v in state)
    out = [0] * n
    for i in range(n):
        out[i] = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
    state[:] = np.array([s0, s1, s2, s3], dtype=np.uint64)
    return np.array(out, dtype=np.uint64)


def pairwise_euclidean(X):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    out = np.zeros((n, n))
    for i in range(n - 1):
        diff = X[i + 1:] - X[i]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        out[i, i + 1:] = d
        out[i + 1:, i] = d
    return out


def nearest_neighbors(Y, n, min_tsep, chunk=512):
    Y = np.ascontiguousarray(Y[:n], dtype=np.float64)
    idx = np.full(n, -1, dtype=np.int64)
    dist = np.full(n, np.inf)
    cols = np.arange(n)
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        diff = Y[rows, None, :] - Y[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        d2[np.abs(rows[:, None] - cols[None, :]) <= min_tsep] = np.inf
        arg = np.argmin(d2, axis=1)
        best = d2[np.arange(len(rows)), arg]
        ok = np.isfinite(best)
        idx[rows[ok]] = arg[ok]
        dist[rows] = np.sqrt(best)
    return idx, dist
