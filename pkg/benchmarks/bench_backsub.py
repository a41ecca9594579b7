"""Benchmark: compiled back-substitution kernel vs the numpy fallback.

Run from the repository root after building the extension in place:

    python setup.py build_ext --inplace
    PYTHONPATH=src python benchmarks/bench_backsub.py
"""

import time

import numpy as np

from expfun import _kernels_py

try:
    from expfun import _kernels

    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False


def make_problem(n):
    delta = np.exp(-9.0 / n)  # constant span, like the production grids
    nodes = delta ** np.arange(n, -1, -1).astype(float)
    widths = np.diff(nodes)
    weights = 0.01 * np.exp(-4.0 * np.arange(n) / n)
    denoms = 1.0 - 0.9 * nodes[:-1] - nodes[:-1] * weights[0] - 0.5 * widths
    return nodes, widths, weights, denoms


def time_call(fn, *args, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    print(f"{'N':>8} {'numpy (s)':>12} {'compiled (s)':>13} {'speedup':>9}")
    for n in (1000, 2000, 4500, 9000, 18000):
        nodes, widths, weights, denoms = make_problem(n)
        args = (nodes, widths, weights, denoms, 0.5, n - 1)
        t_py = time_call(_kernels_py.back_substitute, *args)
        if HAVE_COMPILED:
            t_c = time_call(_kernels.back_substitute, *args)
            a = _kernels_py.back_substitute(*args)
            b = _kernels.back_substitute(*args)
            assert np.allclose(a, b, rtol=1e-12)
            print(f"{n:>8} {t_py:>12.4f} {t_c:>13.4f} {t_py / t_c:>8.1f}x")
        else:
            print(f"{n:>8} {t_py:>12.4f} {'(not built)':>13} {'-':>9}")


if __name__ == "__main__":
    main()
