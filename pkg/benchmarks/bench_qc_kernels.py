#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallbacks.

Run:  python benchmarks/bench_qc_kernels.py [--points 1000000] [--repeat 3]

The first numba call includes JIT compilation; it is timed separately so
the steady-state numbers are honest.  Both paths compute identical
results (asserted here and in the test suite).
"""

import argparse
import time

import numpy as np

from fairstream.qc import kernels

S = 1_000_000_000


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        started = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - started)
    return best, result


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--points", type=int, default=1_000_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--window", type=int, default=7)
    args = parser.parse_args()

    rng = np.random.default_rng(1)
    n = args.points
    values = rng.normal(20, 5, n)
    values[rng.integers(0, n, n // 200)] += 80.0
    quantized = np.round(values, 1)
    gapped = values.copy()
    gapped[rng.random(n) < 0.02] = np.nan
    timestamps = np.arange(n, dtype=np.int64) * 60 * S

    impls = kernels.implementations()
    if "numba" not in impls:
        print("numba not available (or FAIRSTREAM_PURE_NUMPY=1); nothing to compare")
        return

    cases = [
        ("spike_mad", lambda f: f(values, args.window, 3.5)),
        ("constant_runs", lambda f: f(quantized, 5, 0.05)),
        ("resample", lambda f: f(timestamps, values, np.int64(0),
                                 np.int64(3600 * S), kernels.AGG_MEAN)),
        ("interpolate", lambda f: f(timestamps, gapped, np.int64(600 * S))),
    ]

    print(f"{n:,} points, window {args.window}, best of {args.repeat}")
    print(f"{'kernel':<15} {'numpy':>10} {'numba':>10} {'compile':>9} {'speedup':>8}")
    for name, call in cases:
        np_fn = impls["numpy"][name]
        nb_fn = impls["numba"][name]
        compile_s = time.perf_counter()
        nb_first = call(nb_fn)
        compile_s = time.perf_counter() - compile_s
        t_np, r_np = timeit(lambda: call(np_fn), args.repeat)
        t_nb, r_nb = timeit(lambda: call(nb_fn), args.repeat)
        _assert_equal(name, r_np, r_nb)
        print(f"{name:<15} {t_np*1e3:>8.1f}ms {t_nb*1e3:>8.1f}ms"
              f" {compile_s*1e3:>7.0f}ms {t_np/t_nb:>7.1f}x")


def _assert_equal(name, a, b):
    if isinstance(a, tuple):
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=1e-12, atol=0, err_msg=name)
    else:
        np.testing.assert_array_equal(a, b, err_msg=name)


if __name__ == "__main__":
    main()
