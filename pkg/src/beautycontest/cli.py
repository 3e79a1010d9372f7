"""Command-line front end.

Subcommands: ``simulate`` (replica batches to histogram CSV + JSON summary),
``fit-beta`` (symmetric-Beta KS fit), ``exact3`` (exact moment tables),
``pi-trace`` (leftmost-removal fraction trace), ``selftest`` (fast invariant
suite).  Exit codes: 0 ok, 1 selftest failure, 2 usage error, 3 I/O error.
``BCL_THREADS`` overrides ``--threads``.

Every output embeds the experiment configuration; re-running the same
configuration reproduces the file bit-for-bit apart from the ``runtime``
block (which also records thread count and backend, since neither affects
results).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import exact3, spacings
from .backend import BACKEND_NAME
from .dynamics import (
    GAMMA,
    DynamicsError,
    RunParams,
    StopRule,
    run,
    run_replicas,
    sample_step_stats,
)
from .estimators import (
    EstimatorError,
    Histogram,
    empirical_moments,
    fit_beta_symmetric,
)
from .geometry import Configuration, sum_sq_distances

USAGE_ERROR = 2
IO_ERROR = 3


class UsageError(ValueError):
    pass


def _parse_init(text: str, n_points: int, dim: int):
    """Parse ``uniform`` or ``list:x1,x2,...`` (points ;-separated for d>1)."""
    if text == "uniform":
        return "iid_uniform"
    if not text.startswith("list:"):
        raise UsageError(f"--init must be 'uniform' or 'list:...', got {text!r}")
    body = text[len("list:"):]
    if dim == 1 and ";" not in body:
        pts = [[float(v)] for v in body.split(",")]
    else:
        pts = [[float(v) for v in chunk.split(",")] for chunk in body.split(";")]
    arr = np.asarray(pts, dtype=float)
    if arr.shape != (n_points, dim):
        raise UsageError(
            f"--init needs {n_points} points of dimension {dim}, got shape {arr.shape}"
        )
    cfg = Configuration(arr)
    if not cfg.has_distinct_points():
        raise UsageError("initial points must be distinct")
    return cfg


def _threads(args) -> int:
    env = os.environ.get("BCL_THREADS")
    if env is not None:
        return max(1, int(env))
    return max(1, args.threads)


def _coord_path(path: str, coord: int, dim: int) -> str:
    if dim == 1:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}.coord{coord}{ext}"


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    threads = _threads(args)
    model = args.model
    replacement = "uniform_unit_cube" if model == "standard" else "adaptive_interval"
    if model == "modified3":
        if args.n_points != 3 or args.dim != 1:
            raise UsageError("--model modified3 requires --n-points 3 and --dim 1")
    if args.steps is not None:
        stop = StopRule.fixed_steps(args.steps)
    else:
        stop = StopRule.diameter_below(args.tol)
    params = RunParams(
        n_points=args.n_points,
        dim=args.dim,
        seed=args.seed,
        replacement=replacement,
        stop=stop,
        mode=args.mode.replace("-", "_"),
    )
    initial = _parse_init(args.init, args.n_points, args.dim)
    lo, hi = (float(v) for v in args.hist_range.split(","))

    replicas, hists = run_replicas(
        params, args.replicas, n_threads=threads, initial=initial,
        hist_bins=args.bins, hist_range=(lo, hi),
    )

    config = {
        "command": "simulate",
        "n_points": args.n_points,
        "dim": args.dim,
        "replicas": args.replicas,
        "seed": args.seed,
        "tol": None if args.steps is not None else args.tol,
        "steps": args.steps,
        "mode": args.mode,
        "model": model,
        "init": args.init,
        "bins": args.bins,
        "hist_range": [lo, hi],
    }
    comment = "config: " + json.dumps(config, sort_keys=True)
    for j, h in enumerate(hists):
        h.to_csv(_coord_path(args.out_hist, j, args.dim), comments=[comment])

    if args.out_samples:
        for j in range(args.dim):
            with open(_coord_path(args.out_samples, j, args.dim), "w") as fh:
                fh.write(f"# {comment}\n")
                for v in replicas.xi[:, j]:
                    fh.write(f"{float(v)!r}\n")

    results: dict = {
        "replicas": len(replicas),
        "mean_steps": float(replicas.steps.mean()) if len(replicas) else None,
        "absorbed": int(replicas.absorbed.sum()),
        "events": {
            "A": int(replicas.n_a.sum()),
            "A_prime": int(replicas.n_aprime.sum()),
            "F_drops": int(replicas.n_fdrop.sum()),
        },
        "moments": {},
    }
    if len(replicas):
        for j in range(args.dim):
            m = empirical_moments(replicas.xi[:, j], 6)
            results["moments"][f"coord{j}"] = {
                "values": m.values.tolist(),
                "standard_errors": m.standard_errors.tolist(),
            }
        if params.tracks_pi:
            results["pi_mean"] = float(replicas.pi_values().mean())
    summary = {
        "config": config,
        "results": results,
        "runtime": {
            "seconds": time.perf_counter() - t0,
            "threads": threads,
            "backend": BACKEND_NAME,
        },
    }
    _write_json(args.out_summary, summary)
    return 0


# ---------------------------------------------------------------------------
# fit-beta


def _samples_from_file(path: str) -> np.ndarray:
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                vals.append(float(line))
    return np.asarray(vals, dtype=float)


def _edge_cdf_fit(hist: Histogram):
    """KS fit of a binned sample: compare empirical and Beta CDFs at the bin
    edges, where the binned empirical CDF is exact."""
    from .estimators import KsFitResult, _INVPHI, beta_cdf

    n = hist.total
    if n == 0:
        raise UsageError("histogram is empty")
    ecdf = (hist.underflow + np.concatenate([[0], np.cumsum(hist.counts)])) / n
    edges = hist.bin_edges()

    def objective(b: float) -> float:
        return float(np.max(np.abs(ecdf - beta_cdf(edges, b))))

    a, b = 0.5, 5.0
    c_pt = b - _INVPHI * (b - a)
    d_pt = a + _INVPHI * (b - a)
    fc, fd = objective(c_pt), objective(d_pt)
    while b - a > 1e-4:
        if fc < fd:
            b, d_pt, fd = d_pt, c_pt, fc
            c_pt = b - _INVPHI * (b - a)
            fc = objective(c_pt)
        else:
            a, c_pt, fc = c_pt, d_pt, fd
            d_pt = a + _INVPHI * (b - a)
            fd = objective(d_pt)
    beta_star = 0.5 * (a + b)
    return KsFitResult(beta_star=beta_star, kappa=objective(beta_star), n_samples=n)


def cmd_fit_beta(args) -> int:
    t0 = time.perf_counter()
    if (args.in_hist is None) == (args.in_samples is None):
        raise UsageError("pass exactly one of --in-hist / --in-samples")
    if args.in_samples:
        samples = _samples_from_file(args.in_samples)
        if samples.size == 0:
            raise UsageError(f"no samples in {args.in_samples}")
        fit = fit_beta_symmetric(samples)
        source = {"in_samples": args.in_samples}
    else:
        fit = _edge_cdf_fit(Histogram.from_csv(args.in_hist))
        source = {"in_hist": args.in_hist}
    payload = {
        "beta_star": fit.beta_star,
        "kappa": fit.kappa,
        "n": fit.n_samples,
        "config": {"command": "fit-beta", **source},
        "runtime": {"seconds": time.perf_counter() - t0, "backend": BACKEND_NAME},
    }
    _write_json(args.out, payload)
    return 0


# ---------------------------------------------------------------------------
# exact3


def cmd_exact3(args) -> int:
    if not 0 <= args.k_max <= 40:
        raise UsageError("--k-max must be between 0 and 40 (rational blowup guard)")
    if args.init == "uniform":
        oracle = exact3.uniform_init_moments()
    else:
        if not args.init.startswith("list:"):
            raise UsageError("--init must be 'uniform' or 'list:a,b,c'")
        # decimal strings parse to exact rationals
        pts = [Fraction(v) for v in args.init[len("list:"):].split(",")]
        if len(pts) != 3:
            raise UsageError("exact3 needs exactly 3 initial points")
        oracle = exact3.deterministic_init_moments(pts)
    theta = exact3.theta_recursion(args.k_max)
    moments = exact3.xi3_moments_from_init(oracle, args.k_max)
    payload = {
        "config": {"command": "exact3", "k_max": args.k_max, "init": args.init},
        "theta": theta.json_entries(),
        "xi_moments": moments.json_entries(),
    }
    _write_json(args.out, payload)
    return 0


# ---------------------------------------------------------------------------
# pi-trace


def cmd_pi_trace(args) -> int:
    if args.dim != 1:
        raise UsageError("the leftmost-removal fraction is only defined for --dim 1")
    params = RunParams(
        n_points=args.n_points,
        dim=1,
        seed=args.seed,
        replacement="uniform_unit_cube",
        stop=StopRule.fixed_steps(args.steps),
        mode="naive",
    )
    initial = _parse_init(args.init, args.n_points, 1)
    result = run(params, initial, trace_stride=max(1, args.stride),
                 include_initial_trace=False)
    config = {
        "command": "pi-trace",
        "n_points": args.n_points,
        "steps": args.steps,
        "seed": args.seed,
        "stride": args.stride,
        "init": args.init,
    }
    with open(args.out, "w") as fh:
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        fh.write("t,pi_N,core_mean\n")
        if result.trace_t is not None:
            for i in range(result.trace_t.size):
                fh.write(
                    f"{int(result.trace_t[i])},{float(result.pi_trace[i])!r},"
                    f"{float(result.mu_trace[i, 0])!r}\n"
                )
    return 0


# ---------------------------------------------------------------------------
# selftest


def _check(name: str, ok: bool, detail: str = "") -> bool:
    tag = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"{tag}  {name}{suffix}")
    return ok


def cmd_selftest(args) -> int:
    quick = args.quick
    fault_g_sign = args.inject_fault == "g-sign"
    ok_all = True
    rng = np.random.default_rng(20240817)

    # Lemma-2 sandwich: D^2/2 <= G <= (n-1) D^2/2, equality on the collinear witness
    from .geometry import diameter

    g_fn = (lambda pts: -sum_sq_distances(pts)) if fault_g_sign else sum_sq_distances
    sandwich_ok = True
    for _ in range(200 if quick else 2000):
        n = int(rng.integers(2, 9))
        d = int(rng.integers(1, 4))
        pts = rng.random((n, d))
        g = g_fn(pts)
        dia = diameter(pts)
        if not (0.5 * dia**2 - 1e-12 <= g <= 0.5 * (n - 1) * dia**2 + 1e-12):
            sandwich_ok = False
            break
    witness = np.array([[0.0], [1.0], [0.5], [0.5], [0.5]])
    if abs(g_fn(witness) - 0.5 * diameter(witness) ** 2) > 1e-12:
        sandwich_ok = False
    ok_all &= _check("lemma2-sandwich", sandwich_ok)

    # Lyapunov monotonicity and event inclusions on instrumented steps
    n_steps = 2000 if quick else 20000
    stats = sample_step_stats(5, 2, n_steps, seed=11)
    drop = stats.f_after - stats.f_before
    mono = int((drop > 1e-12).sum())
    ok_all &= _check("lyapunov-monotone", mono == 0, f"{n_steps} steps, {mono} violations")
    v1 = int((stats.event_aprime & ~(drop <= -GAMMA * stats.f_before / 5 + 1e-12)).sum())
    v2 = int(((drop < 0) & ~stats.event_a).sum())
    ok_all &= _check("event-inclusions", v1 == 0 and v2 == 0, f"{v1}+{v2} violations")

    # exact moments against the quoted rationals
    theta = exact3.theta_recursion(6)
    theta_ok = (
        theta[2] == Fraction(7, 12)
        and theta[4] == Fraction(375, 368)
        and theta[6] == Fraction(76693, 22080)
    )
    ok_all &= _check("theta-table", theta_ok)
    m = exact3.xi3_moments_from_init(
        exact3.deterministic_init_moments([Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]), 4
    )
    quarters_ok = [m[k] for k in range(1, 5)] == [
        Fraction(1, 2), Fraction(29, 96), Fraction(13, 64), Fraction(873, 5888)
    ]
    mu = exact3.xi3_moments_from_init(exact3.uniform_init_moments(), 3)
    uniform_ok = [mu[k] for k in range(1, 4)] == [Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)]
    ok_all &= _check("xi3-moments", quarters_ok and uniform_ok)

    # spacing moments: two exact routes agree, Monte Carlo within 4 SE
    routes_ok = all(spacings.moment_mu(k) == spacings.moment_mu_via_w(k) for k in range(13))
    n_draws = 20000 if quick else 200000
    s = spacings.sample_spacings_batch(3, n_draws, rng)
    mc_ok = True
    for a, b in [(1, 0), (2, 0), (1, 1), (2, 2)]:
        vals = s[:, 0] ** a * s[:, 1] ** b
        se = vals.std(ddof=1) / np.sqrt(n_draws)
        if abs(vals.mean() - float(spacings.mixed_moment(3, a, b))) > 4 * se:
            mc_ok = False
    ok_all &= _check("spacing-moments", routes_ok and mc_ok)

    if not ok_all:
        return 1
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcl", description="beauty contest simulation and exact analysis"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run replica batches")
    p.add_argument("--n-points", type=int, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--replicas", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--steps", type=int, default=None,
                   help="fixed-step stop instead of the diameter criterion")
    p.add_argument("--mode", choices=["naive", "event-skip"], default="naive")
    p.add_argument("--model", choices=["standard", "modified3"], default="standard")
    p.add_argument("--init", default="uniform")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--hist-range", default="0,1")
    p.add_argument("--out-hist", required=True)
    p.add_argument("--out-summary", required=True)
    p.add_argument("--out-samples", default=None,
                   help="also dump raw limit estimates, one per line")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-beta", help="KS fit of a symmetric Beta")
    p.add_argument("--in-hist", default=None)
    p.add_argument("--in-samples", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_beta)

    p = sub.add_parser("exact3", help="exact moment tables for the modified model")
    p.add_argument("--k-max", type=int, required=True)
    p.add_argument("--init", default="uniform")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_exact3)

    p = sub.add_parser("pi-trace", help="leftmost-removal fraction trace")
    p.add_argument("--n-points", type=int, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stride", type=int, default=1000)
    p.add_argument("--init", default="uniform")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pi_trace)

    p = sub.add_parser("selftest", help="fast invariant suite")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--inject-fault", choices=["g-sign"], default=None,
                   help="test hook: corrupt a check to prove the harness detects it")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, DynamicsError, EstimatorError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
