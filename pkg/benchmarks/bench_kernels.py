"""Time the compiled and pure-Python kernel backends side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from trajalign import kernels


def cases(rng):
    payload = rng.integers(0, 256, 4_000_000, dtype=np.uint8).tobytes()
    X = rng.standard_normal((1000, 64))
    Y = rng.standard_normal((5000, 2))
    return {
        "fnv1a64 (4 MB)": lambda m: m.fnv1a64(payload),
        "xoshiro_fill (1e6 draws)": lambda m: m.xoshiro_fill(np.array([1, 2, 3, 4], dtype=np.uint64), 1_000_000),
        "pairwise_euclidean (1000 x 64)": lambda m: m.pairwise_euclidean(X),
        "nearest_neighbors (5000 pts)": lambda m: m.nearest_neighbors(Y, 4980, 1),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = kernels.available_backends()
    names = sorted(backends)
    print(f"backends: {', '.join(names)} (active: {kernels.BACKEND})")
    print(f"{'kernel':34s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn in cases(np.random.default_rng(0)).items():
        best = {}
        for n in names:
            mod = backends[n]
            best[n] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        row = f"{label:34s}" + "".join(f"{best[n] * 1e3:10.2f}ms" for n in names)
        if "cython" in best and "python" in best:
            row += f"{best['python'] / best['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
