"""Benchmark: compiled Dykstra kernel vs the pure-Python fallback.

The projection runs once per gradient step inside the hazard block of the
fit, so its cost multiplies across the whole coverage harness.  Run:

    python benchmarks/bench_projection.py
"""

import time

import numpy as np

from coxerr._kernels import pure

try:
    from coxerr._kernels import _core
except ImportError:
    _core = None


def bench(fn, raw, step, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(raw, step, 0.0, 15.0, 1e-10, 10_000)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(1)
    print(f"{'nodes':>6} {'case':>12} {'compiled':>12} {'pure':>12} {'speedup':>9}")
    for size in (21, 101, 501):
        step = 2.0 / (size - 1)
        cases = {
            "near-feasible": np.clip(rng.normal(1.0, 0.02, size), 0, None),
            "far": rng.normal(1.0, 3.0, size),
        }
        for name, raw in cases.items():
            t_pure = bench(pure.dykstra_project, raw, step, 3)
            if _core is not None:
                t_core = bench(_core.dykstra_project, raw, step, 5)
                print(f"{size:>6} {name:>12} {t_core * 1e3:>10.3f}ms "
                      f"{t_pure * 1e3:>10.3f}ms {t_pure / t_core:>8.1f}x")
            else:
                print(f"{size:>6} {name:>12} {'(not built)':>12} "
                      f"{t_pure * 1e3:>10.3f}ms {'':>9}")


if __name__ == "__main__":
    main()
