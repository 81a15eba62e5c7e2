"""Portable seeded random numbers.

Streams are xoshiro256** seeded by four successive SplitMix64 outputs of
the integer seed, so any implementation of the same algorithms reproduces
them bit for bit:

* uniform doubles are ``(x >> 11) * 2**-53`` in [0, 1);
* normals use Box-Muller on uniform pairs ``(u1, u2)``, emitting
  ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` then the matching ``sin`` term;
* permutations are a Fisher-Yates shuffle drawing
  ``j = floor(u * (i + 1))`` for ``i = n-1 .. 1``.
"""

import numpy as np

from . import kernels

_MASK = (1 << 64) - 1


def splitmix64(seed, n):
    z = seed & _MASK
    out = []
    for _ in range(n):
        z = (z + 0x9E3779B97F4A7C15) & _MASK
        x = z
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(x ^ (x >> 31))
    return out


class Xoshiro256:
    """xoshiro256** generator with numpy-array outputs."""

    def __init__(self, seed):
        self.seed = int(seed)
        self.state = np.array(splitmix64(self.seed, 4), dtype=np.uint64)

    def integers64(self, n):
        return kernels.xoshiro_fill(self.state, int(n))

    def random(self, n):
        bits = self.integers64(n)
        return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def standard_normal(self, shape):
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape))
        pairs = (n + 1) // 2
        u = self.random(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = radius * np.cos(theta)
        z[:, 1] = radius * np.sin(theta)
        return z.ravel()[:n].reshape(shape)

    def permutation(self, n):
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.random(n - 1)
        for k, i in enumerate(range(n - 1, 0, -1)):
            j = int(u[k] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
