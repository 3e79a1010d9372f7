#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Both backends are bit-identical; this script quantifies what the extension
buys on the workloads that dominate the acceptance runs.

    python3 benchmarks/bench_backends.py [--replicas 2000]
"""

import argparse
import time

import numpy as np

from beautycontest import _kernels_py
from beautycontest.backend import compiled_available

WORKLOADS = {
    "naive N=3 d=1 (tol 1e-3)": dict(
        n_points=3, dim=1, init=None, replacement=0, diam_stop=True, tol=1e-3,
        max_steps=2**62, event_skip=False, track_pi=True, skip_cap=1e12,
    ),
    "event-skip N=3 d=1 (tol 1e-4)": dict(
        n_points=3, dim=1, init=None, replacement=0, diam_stop=True, tol=1e-4,
        max_steps=2**62, event_skip=True, track_pi=False, skip_cap=1e12,
    ),
    "modified N=3 (tol 1e-4)": dict(
        n_points=3, dim=1, init=np.array([-0.5, 0.5, 100.0]), replacement=1,
        diam_stop=True, tol=1e-4, max_steps=2**62, event_skip=False,
        track_pi=False, skip_cap=1e12,
    ),
    "event-skip N=6 d=3 (tol 5e-3)": dict(
        n_points=6, dim=3, init=None, replacement=0, diam_stop=True, tol=5e-3,
        max_steps=2**62, event_skip=True, track_pi=False, skip_cap=1e12,
    ),
}


def time_backend(kernels, n_replicas, kwargs):
    t0 = time.perf_counter()
    out = kernels.run_replicas_kernel(12345, 0, n_replicas, **kwargs)
    elapsed = time.perf_counter() - t0
    return elapsed, int(out["steps"].sum()), out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--replicas", type=int, default=2000)
    args = parser.parse_args()

    if not compiled_available():
        raise SystemExit("compiled extension not built; nothing to compare")
    from beautycontest import _kernels

    print(f"{args.replicas} replicas per workload\n")
    header = f"{'workload':<34} {'compiled':>10} {'python':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, kwargs in WORKLOADS.items():
        t_c, steps_c, out_c = time_backend(_kernels, args.replicas, kwargs)
        t_p, steps_p, out_p = time_backend(_kernels_py, args.replicas, kwargs)
        assert steps_c == steps_p, "backends diverged"
        assert np.array_equal(out_c["xi"], out_p["xi"]), "backends diverged"
        print(f"{name:<34} {t_c:>9.3f}s {t_p:>9.3f}s {t_p / t_c:>7.1f}x")
    print("\n(identical outputs verified on every workload)")


if __name__ == "__main__":
    main()
