#!/usr/bin/env python3
"""Benchmark the compiled EM kernels against the pure-NumPy fallback.

Runs the single-step kernel at sizes the simulation harness actually hits,
plus one full best-of-restarts fit, and prints a speedup table.

    python benchmarks/bench_backends.py [--repeats 200]
"""

import argparse
import time

import numpy as np

import mixorder.backend
from mixorder import Dataset, FitConfig, fit_mle
from mixorder import _purekernels as pure

try:
    from mixorder import _fastkernels as fast
except ImportError:
    fast = None


def step_problem(n, d, g, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d)) + rng.integers(0, g, n)[:, None] * 3.0
    means = rng.standard_normal((g, d)) * 2.0
    covs = np.stack([np.eye(d) for _ in range(g)])
    weights = np.full(g, 1.0 / g)
    return X, weights, means, covs


def time_step(impl, problem, repeats):
    X, w, m, c = problem
    impl.em_step(X, w, m, c, 1e-6)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        impl.em_step(X, w, m, c, 1e-6)
    return (time.perf_counter() - t0) / repeats


def time_fit(impl, data, seed=3):
    saved = (mixorder.backend.em_step, mixorder.backend.component_log_densities)
    mixorder.backend.em_step = impl.em_step
    mixorder.backend.component_log_densities = impl.component_log_densities
    try:
        t0 = time.perf_counter()
        fit = fit_mle(data, 5, FitConfig(seed=seed))
        elapsed = time.perf_counter() - t0
    finally:
        mixorder.backend.em_step, mixorder.backend.component_log_densities = saved
    return elapsed, fit.log_likelihood


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    if fast is None:
        print("compiled kernels are not built; nothing to compare")
        return

    sizes = [(250, 1, 2), (500, 1, 3), (500, 2, 3), (1000, 2, 5),
             (1000, 2, 7), (2000, 2, 8), (1000, 4, 7)]
    print(f"{'n':>6} {'d':>3} {'g':>3} {'pure (us)':>12} "
          f"{'compiled (us)':>14} {'speedup':>8}")
    for n, d, g in sizes:
        problem = step_problem(n, d, g)
        t_pure = time_step(pure, problem, args.repeats)
        t_fast = time_step(fast, problem, args.repeats)
        print(f"{n:>6} {d:>3} {g:>3} {1e6 * t_pure:>12.1f} "
              f"{1e6 * t_fast:>14.1f} {t_pure / t_fast:>7.1f}x")

    rng = np.random.default_rng(11)
    rows = np.vstack([rng.normal(z * 4.0, 1.0, (400, 2)) for z in range(5)])
    data = Dataset(rows)
    t_pure, ll_pure = time_fit(pure, data)
    t_fast, ll_fast = time_fit(fast, data)
    print(f"\nfull fit, g=5, n=2000, d=2, 8 restarts:")
    print(f"  pure     {t_pure:8.3f} s  (loglik {ll_pure:.4f})")
    print(f"  compiled {t_fast:8.3f} s  (loglik {ll_fast:.4f})")
    print(f"  speedup  {t_pure / t_fast:.1f}x")


if __name__ == "__main__":
    main()
