#!/usr/bin/env python3
"""Benchmark the JIT-compiled kernels against their pure-numpy fallbacks.

Runs each hot kernel on representative workloads with both backends and
prints per-call times and speedups.  The numpy path is what you get with
ARCHOPT_NUMBA=0; the numba path is the default.
"""

import argparse
import time

import numpy as np

from archopt import kernels


def time_call(fn, args, repeats):
    fn(*args)  # warm up (JIT compile / cache load)
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats


def bench_exact_mva(repeats):
    rng = np.random.default_rng(0)
    demands = rng.uniform(0.01, 0.5, size=8)
    return [("exact_mva K=8 N=2000", (demands, 1.0, 2000))], repeats


def bench_amva(repeats):
    rng = np.random.default_rng(1)
    cases = []
    for stations, classes, pop in [(3, 2, 30), (6, 3, 60), (10, 4, 120)]:
        demands = rng.uniform(0.005, 0.05, size=(stations, classes))
        pops = rng.integers(5, pop, size=classes).astype(float)
        thinks = rng.uniform(0.1, 1.0, size=classes)
        cases.append((f"amva K={stations} C={classes}", (demands, pops, thinks, 1e-6, 100_000)))
    return cases, repeats


def bench_dominance(repeats):
    rng = np.random.default_rng(2)
    cases = []
    for n in (64, 256, 1024):
        cases.append((f"dominance n={n} d=4", (rng.random((n, 4)),)))
    return cases, repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200, help="timed calls per case")
    args = parser.parse_args()

    suites = {
        "exact_mva": (kernels._exact_mva_py, getattr(kernels, "_exact_mva_jit", None), bench_exact_mva),
        "amva": (kernels._amva_py, getattr(kernels, "_amva_jit", None), bench_amva),
        "dominance": (kernels._dominance_matrix_py, getattr(kernels, "_dominance_matrix_jit", None), bench_dominance),
    }

    print(f"kernel backend selected at import: {kernels.backend()}")
    if not kernels.HAS_NUMBA:
        print("numba unavailable or disabled (ARCHOPT_NUMBA=0); timing numpy path only\n")
    header = f"{'case':<28} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, (py_fn, jit_fn, make_cases) in suites.items():
        cases, repeats = make_cases(args.repeats)
        for label, case_args in cases:
            t_py = time_call(py_fn, case_args, repeats)
            if jit_fn is not None:
                t_jit = time_call(jit_fn, case_args, repeats)
                print(f"{label:<28} {t_py * 1e3:>10.4f} {t_jit * 1e3:>10.4f} {t_py / t_jit:>7.1f}x")
            else:
                print(f"{label:<28} {t_py * 1e3:>10.4f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    main()
