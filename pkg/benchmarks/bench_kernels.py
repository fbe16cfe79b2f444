"""Time the compiled kernels against the pure-Python fallback on identical inputs.

Usage: python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from spinlab import _fallback, ensembles

try:
    from spinlab import _kernels
except ImportError:
    _kernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def case_gray(n):
    rng = np.random.default_rng(0)
    K = rng.normal(size=(n, n)) / n
    K = np.ascontiguousarray(0.5 * (K + K.T))
    h = rng.normal(size=n) * 0.1

    def run(mod):
        return lambda: mod.gray_moments(K, h)[0]

    return f"gray_moments n={n}", run


def case_glauber(n, steps):
    rng = np.random.default_rng(1)
    K = rng.normal(size=(n, n)) / n
    K = np.ascontiguousarray(0.5 * (K + K.T))
    h = np.zeros(n)
    u = np.ones(n)
    ref = np.ones(n, dtype=np.int8)
    sites = rng.integers(0, n, size=steps, dtype=np.int64)
    unif = rng.random(steps)
    x0 = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)

    def run(mod):
        def go():
            x = x0.copy()
            xf = x.astype(np.float64)
            f = K @ xf - np.diag(K) * xf
            nrec = steps // 100 + 1
            bufs = [np.empty(nrec) for _ in range(3)]
            return mod.glauber_run(K, h, u, ref, x, f, sites, unif, 100, 0, 0.0, float(xf.sum()),
                                   float(xf.sum()), *bufs, 1)[1]
        return go

    return f"glauber_run n={n} steps={steps}", run


def case_greedy(n, d):
    A = ensembles.random_regular(n, d, 3).adjacency()
    indptr, indices = A.indptr.astype(np.int64), A.indices.astype(np.int64)
    x0 = np.where(np.random.default_rng(2).random(n) < 0.5, 1, -1).astype(np.int8)

    def run(mod):
        def go():
            x = x0.copy()
            mod.greedy_ascent_csr(indptr, indices, x, 100)
            return int(x.sum())
        return go

    return f"greedy_ascent n={n} d={d}", run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled kernels not built; only the fallback is available")
    cases = [case_gray(18), case_glauber(200, 200_000), case_greedy(20_000, 6)]
    print(f"{'kernel':<36}{'cython s':>12}{'python s':>12}{'speedup':>10}")
    for label, run in cases:
        t_py, r_py = best_of(run(_fallback), args.repeat)
        if _kernels is None:
            print(f"{label:<36}{'-':>12}{t_py:>12.4f}{'-':>10}")
            continue
        t_cy, r_cy = best_of(run(_kernels), args.repeat)
        assert np.allclose(r_cy, r_py), (label, r_cy, r_py)
        print(f"{label:<36}{t_cy:>12.4f}{t_py:>12.4f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
