# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Signatures mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY
from libc.stdint cimport uint64_t

cnp.import_array()

BACKEND = "cython"

cdef uint64_t FNV_OFFSET = 0xcbf29ce484222325ULL
cdef uint64_t FNV_PRIME = 0x100000001b3ULL


def fnv1a64(const unsigned char[::1] data):
    cdef uint64_t h = FNV_OFFSET
    cdef Py_ssize_t i, n = data.shape[0]
    with nogil:
        for i in range(n):
            h = (h ^ data[i]) * FNV_PRIME
    return int(h)


cdef inline uint64_t rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


def xoshiro_fill(cnp.uint64_t[::1] state, Py_ssize_t n):
    """Advance xoshiro256** ``n`` times; ``state`` is updated in place."""
    out = np.empty(n, dtype=np.uint64)
    cdef cnp.uint64_t[::1] o = out
    cdef uint64_t s0 = state[0], s1 = state[1], s2 = state[2], s3 = state[3]
    cdef uint64_t t
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = rotl(s1 * 5, 7) * 9
            t = s1 << 17
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3
    return out


def pairwise_euclidean(const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1]
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] D = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for k in range(p):
                    diff = X[i, k] - X[j, k]
                    acc += diff * diff
                acc = sqrt(acc)
                D[i, j] = acc
                D[j, i] = acc
    return out


def nearest_neighbors(const double[:, ::1] Y, Py_ssize_t n, Py_ssize_t min_tsep):
    """Nearest neighbour of each of the first ``n`` rows among the first ``n``
    rows, excluding partners closer than ``min_tsep`` in index."""
    idx = np.full(n, -1, dtype=np.int64)
    dist = np.full(n, np.inf, dtype=np.float64)
    cdef cnp.int64_t[::1] I = idx
    cdef double[::1] Dm = dist
    cdef Py_ssize_t p = Y.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, best
    cdef cnp.int64_t arg
    with nogil:
        for i in range(n):
            best = INFINITY
            arg = -1
            for j in range(n):
                if j - i <= min_tsep and i - j <= min_tsep:
                    continue
                acc = 0.0
                for k in range(p):
                    diff = Y[i, k] - Y[j, k]
                    acc += diff * diff
                if acc < best:
                    best = acc
                    arg = j
            I[i] = arg
            Dm[i] = sqrt(best)
    return idx, dist
