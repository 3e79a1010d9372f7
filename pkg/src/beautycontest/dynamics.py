"""The Markov step and trajectory engine.

A step removes the point farthest from the barycentre and inserts a fresh
random point: uniform on the unit cube in the standard model, or uniform on
[min core - D, max core + D] in the modified (adaptive-interval) model.
Batches of replicas run on the compiled kernel when available; the
event-skip mode jumps over the provably core-preserving steps (the new
point landing outside the 3D-ball around the core mean) with an exact
geometric skip count.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .backend import kernels, trace_kernels
from .geometry import (
    Configuration,
    as_points,
    diameter,
    order_by_distance,
    sum_sq_distances,
)

#: proportional Lyapunov drop forced by the inner event: on A', the step
#: satisfies F(t+1) - F(t) <= -GAMMA * F(t) / N.
GAMMA = 9.0 / 72.0

#: geometric skip counts beyond this are treated as an absorbed state
SKIP_CAP = 1e12

_HUGE_STEPS = 2**62


class DynamicsError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class StopRule:
    kind: str  # "diameter" | "steps"
    tol: float = 0.0
    steps: int = 0

    @classmethod
    def diameter_below(cls, tol: float) -> "StopRule":
        if not tol > 0:
            raise DynamicsError("diameter tolerance must be positive")
        return cls(kind="diameter", tol=float(tol))

    @classmethod
    def fixed_steps(cls, steps: int) -> "StopRule":
        if steps < 0:
            raise DynamicsError("step count must be >= 0")
        return cls(kind="steps", steps=int(steps))


@dataclass(frozen=True)
class RunParams:
    n_points: int
    dim: int
    seed: int
    replacement: str = "uniform_unit_cube"  # or "adaptive_interval"
    stop: StopRule = field(default_factory=lambda: StopRule.diameter_below(1e-4))
    mode: str = "naive"  # or "event_skip"

    def __post_init__(self):
        if self.n_points < 3:
            raise DynamicsError("need at least 3 points")
        if self.dim < 1:
            raise DynamicsError("dimension must be >= 1")
        if self.replacement not in ("uniform_unit_cube", "adaptive_interval"):
            raise DynamicsError(f"unknown replacement {self.replacement!r}")
        if self.mode not in ("naive", "event_skip"):
            raise DynamicsError(f"unknown mode {self.mode!r}")
        if self.replacement == "adaptive_interval" and self.dim != 1:
            raise DynamicsError("adaptive_interval replacement requires dim == 1")

    @property
    def tracks_pi(self) -> bool:
        # skipped steps also remove the just-inserted point, so the
        # leftmost-removal fraction is only well-defined in naive mode
        return self.mode == "naive" and self.dim == 1


@dataclass(frozen=True)
class StepOutcome:
    new_config: Configuration
    replaced_was_new_point: bool
    event_A: bool
    event_A_prime: bool
    F_before: float
    F_after: float
    removed_on_left: bool | None
    D_before: float
    D_after: float
    inserted: np.ndarray


@dataclass(frozen=True)
class RunResult:
    xi_estimate: np.ndarray
    steps: int
    pi_N: float | None
    n_event_A: int
    n_event_A_prime: int
    n_F_drops: int
    absorbed: bool
    final_points: np.ndarray
    tau_times: np.ndarray | None = None
    trace_t: np.ndarray | None = None
    F_trace: np.ndarray | None = None
    D_trace: np.ndarray | None = None
    mu_trace: np.ndarray | None = None
    pi_trace: np.ndarray | None = None


class ReplicaSet(Sequence):
    """Replica results as a structure of arrays, viewable as RunResults."""

    def __init__(self, xi, steps, n_a, n_aprime, n_fdrop, pi_left, absorbed,
                 final_points, has_pi: bool):
        self.xi = xi
        self.steps = steps
        self.n_a = n_a
        self.n_aprime = n_aprime
        self.n_fdrop = n_fdrop
        self.pi_left = pi_left
        self.absorbed = absorbed
        self.final_points = final_points
        self.has_pi = has_pi

    def __len__(self) -> int:
        return int(self.xi.shape[0])

    def __getitem__(self, i) -> RunResult:
        if isinstance(i, slice):
            raise TypeError("slicing not supported; index replicas individually")
        steps = int(self.steps[i])
        pi = None
        if self.has_pi and steps > 0:
            pi = float(self.pi_left[i]) / steps
        return RunResult(
            xi_estimate=self.xi[i],
            steps=steps,
            pi_N=pi,
            n_event_A=int(self.n_a[i]),
            n_event_A_prime=int(self.n_aprime[i]),
            n_F_drops=int(self.n_fdrop[i]),
            absorbed=bool(self.absorbed[i]),
            final_points=self.final_points[i],
        )

    def pi_values(self) -> np.ndarray:
        if not self.has_pi:
            raise DynamicsError("pi_N is only tracked in naive mode with dim == 1")
        return self.pi_left / np.maximum(self.steps, 1)


# ---------------------------------------------------------------------------
# single instrumented step (reference implementation, test hooks)


def step(config, params: RunParams, rng: np.random.Generator, *, force_u=None) -> StepOutcome:
    """One replacement step with full event instrumentation.

    ``force_u`` overrides the inserted point (test hook).  This is the
    readable reference path; batches go through the kernels.
    """
    pts = as_points(config)
    n, d = pts.shape
    if n != params.n_points or d != params.dim:
        raise DynamicsError("configuration shape does not match params")
    if n < 3:
        raise DynamicsError("step requires at least 3 points")

    ordered = order_by_distance(pts, rng)
    mu_all = ordered.barycentre
    core = ordered.core
    extreme = ordered.extreme
    mu_core = core.mean(axis=0)
    d_before = diameter(core)
    f_before = sum_sq_distances(core)
    removed_on_left = bool(extreme[0] < mu_all[0]) if d == 1 else None

    if force_u is not None:
        u = np.asarray(force_u, dtype=float).reshape(d)
    elif params.replacement == "uniform_unit_cube":
        u = rng.random(d)
    else:
        lo = float(core.min()) - d_before
        hi = float(core.max()) + d_before
        u = np.array([lo + rng.random() * (hi - lo)])

    dist2 = float(((u - mu_core) ** 2).sum())
    event_a = dist2 <= 9.0 * d_before * d_before
    event_ap = 16.0 * dist2 <= d_before * d_before

    new_pts = np.vstack([core, u[None, :]])
    new_ordered = order_by_distance(new_pts, rng)
    replaced_was_new = bool(new_ordered.permutation[-1] == n - 1)
    if replaced_was_new:
        # core unchanged as a set; carry its statistics over exactly
        f_after = f_before
        d_after = d_before
    else:
        f_after = sum_sq_distances(new_ordered.core)
        d_after = diameter(new_ordered.core)

    return StepOutcome(
        new_config=Configuration(new_pts),
        replaced_was_new_point=replaced_was_new,
        event_A=event_a,
        event_A_prime=event_ap,
        F_before=f_before,
        F_after=f_after,
        removed_on_left=removed_on_left,
        D_before=d_before,
        D_after=d_after,
        inserted=u,
    )


# ---------------------------------------------------------------------------
# runs


def _kernel_args(params: RunParams):
    replacement = 0 if params.replacement == "uniform_unit_cube" else 1
    diam_stop = params.stop.kind == "diameter"
    tol = params.stop.tol if diam_stop else -1.0
    max_steps = _HUGE_STEPS if diam_stop else params.stop.steps
    # the adaptive interval is always inside the 3D-ball, so no step can be
    # skipped: event-skip degenerates to (and is run as) the naive loop
    event_skip = params.mode == "event_skip" and replacement == 0
    return replacement, diam_stop, tol, max_steps, event_skip


def _resolve_init(params: RunParams, initial):
    if isinstance(initial, str):
        if initial != "iid_uniform":
            raise DynamicsError(f"unknown initial spec {initial!r}")
        return None
    cfg = initial if isinstance(initial, Configuration) else Configuration(as_points(initial))
    if cfg.n != params.n_points or cfg.dim != params.dim:
        raise DynamicsError("initial configuration shape does not match params")
    if not cfg.has_distinct_points():
        raise DynamicsError("initial points must be distinct")
    return cfg.points


def run(params: RunParams, initial="iid_uniform", *, trace_stride: int = 0,
        include_initial_trace: bool = True, replica: int = 0) -> RunResult:
    """Run a single trajectory; equals replica ``replica`` of a batch.

    With ``trace_stride > 0`` the result carries decimated t/F/D/core-mean
    traces (non-increasing F by construction).
    """
    init = _resolve_init(params, initial)
    replacement, diam_stop, tol, max_steps, event_skip = _kernel_args(params)
    res = trace_kernels.run_trace_kernel(
        params.seed, replica, params.n_points, params.dim, init, replacement,
        diam_stop, tol, max_steps, event_skip, params.tracks_pi, SKIP_CAP,
        trace_stride, include_initial_trace,
    )
    steps = int(res["steps"])
    pi = None
    if params.tracks_pi and steps > 0:
        pi = int(res["pi_left"]) / steps
    traced = trace_stride > 0
    return RunResult(
        xi_estimate=res["xi"],
        steps=steps,
        pi_N=pi,
        n_event_A=int(res["n_a"]),
        n_event_A_prime=int(res["n_aprime"]),
        n_F_drops=int(res["n_fdrop"]),
        absorbed=bool(res["absorbed"]),
        final_points=res["final_points"],
        tau_times=res["tau_times"],
        trace_t=res["trace_t"] if traced else None,
        F_trace=res["trace_f"] if traced else None,
        D_trace=res["trace_d"] if traced else None,
        mu_trace=res["trace_mu"] if traced else None,
        pi_trace=res["trace_pi"] if traced else None,
    )


def run_event_skip(params: RunParams, initial="iid_uniform", **kwargs) -> RunResult:
    if params.mode != "event_skip":
        raise DynamicsError("run_event_skip requires mode='event_skip'")
    return run(params, initial, **kwargs)


def _chunk_ranges(total: int, n_chunks: int):
    size = ceil(total / n_chunks)
    return [(lo, min(lo + size, total)) for lo in range(0, total, size)]


def run_replicas(params: RunParams, n_replicas: int, n_threads: int = 1,
                 initial="iid_uniform", hist_bins: int = 200,
                 hist_range: tuple[float, float] = (0.0, 1.0)):
    """Run independent replicas and merge their terminal statistics.

    Replica k draws from a counter-based stream keyed by (seed, k), so the
    merged output is bit-identical for any thread count.  Returns
    ``(ReplicaSet, [Histogram per coordinate])``.
    """
    from .estimators import Histogram

    if n_replicas < 0:
        raise DynamicsError("n_replicas must be >= 0")
    init = _resolve_init(params, initial)
    replacement, diam_stop, tol, max_steps, event_skip = _kernel_args(params)

    d = params.dim
    xi = np.empty((n_replicas, d))
    steps = np.empty(n_replicas, dtype=np.int64)
    n_a = np.empty(n_replicas, dtype=np.int64)
    n_ap = np.empty(n_replicas, dtype=np.int64)
    n_fd = np.empty(n_replicas, dtype=np.int64)
    pi_left = np.empty(n_replicas, dtype=np.int64)
    absorbed = np.empty(n_replicas, dtype=bool)
    final = np.empty((n_replicas, params.n_points, d))

    def work(lo: int, hi: int) -> None:
        res = kernels.run_replicas_kernel(
            params.seed, lo, hi, params.n_points, d, init, replacement,
            diam_stop, tol, max_steps, event_skip, params.tracks_pi, SKIP_CAP,
        )
        xi[lo:hi] = res["xi"]
        steps[lo:hi] = res["steps"]
        n_a[lo:hi] = res["n_a"]
        n_ap[lo:hi] = res["n_aprime"]
        n_fd[lo:hi] = res["n_fdrop"]
        pi_left[lo:hi] = res["pi_left"]
        absorbed[lo:hi] = res["absorbed"]
        final[lo:hi] = res["final_points"]

    if n_replicas > 0:
        n_threads = max(1, int(n_threads))
        if n_threads == 1:
            work(0, n_replicas)
        else:
            ranges = _chunk_ranges(n_replicas, n_threads * 4)
            with ThreadPoolExecutor(max_workers=n_threads) as pool:
                list(pool.map(lambda r: work(*r), ranges))

    replicas = ReplicaSet(xi, steps, n_a, n_ap, n_fd, pi_left, absorbed, final,
                          has_pi=params.tracks_pi)
    lo_h, hi_h = hist_range
    histograms = [
        Histogram.from_samples(xi[:, j], lo=lo_h, hi=hi_h, bins=hist_bins)
        for j in range(d)
    ]
    return replicas, histograms


# ---------------------------------------------------------------------------
# instrumented step batches (invariant checks, diameter regime scans)


@dataclass(frozen=True)
class StepStats:
    """Per-step statistics from naive unit-cube steps at iid-uniform starts."""

    f_before: np.ndarray
    f_after: np.ndarray
    d_before: np.ndarray
    d_after: np.ndarray
    event_a: np.ndarray
    event_aprime: np.ndarray
    removed_left: np.ndarray


def sample_step_stats(n_points: int, dim: int, n_steps: int, seed: int,
                      steps_per_config: int = 50, n_threads: int = 1) -> StepStats:
    """Instrument ``n_steps`` naive steps spread over fresh random starts."""
    if n_steps < 1:
        raise DynamicsError("n_steps must be >= 1")
    n_reps = ceil(n_steps / steps_per_config)
    out = {}

    def work(lo, hi):
        return kernels.run_instrumented_kernel(seed, lo, hi, n_points, dim, steps_per_config)

    if n_threads <= 1 or n_reps < 2:
        out = work(0, n_reps)
    else:
        ranges = _chunk_ranges(n_reps, n_threads * 4)
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            parts = list(pool.map(lambda r: work(*r), ranges))
        out = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}

    return StepStats(
        f_before=out["f_before"][:n_steps],
        f_after=out["f_after"][:n_steps],
        d_before=out["d_before"][:n_steps],
        d_after=out["d_after"][:n_steps],
        event_a=out["event_a"][:n_steps],
        event_aprime=out["event_aprime"][:n_steps],
        removed_left=out["removed_left"][:n_steps],
    )


# ---------------------------------------------------------------------------
# diameter-increase witness search


@dataclass(frozen=True)
class DiameterWitness:
    """A recorded step on which the core diameter strictly increased."""

    n_points: int
    dim: int
    config_before: np.ndarray
    inserted: np.ndarray
    d_before: float
    d_after: float
    seed: int
    replica: int
    step_index: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_points": self.n_points,
                "dim": self.dim,
                "config_before": self.config_before.tolist(),
                "inserted": self.inserted.tolist(),
                "d_before": self.d_before,
                "d_after": self.d_after,
                "seed": self.seed,
                "replica": self.replica,
                "step_index": self.step_index,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "DiameterWitness":
        d = json.loads(text)
        return cls(
            n_points=d["n_points"],
            dim=d["dim"],
            config_before=np.asarray(d["config_before"], dtype=float),
            inserted=np.asarray(d["inserted"], dtype=float),
            d_before=d["d_before"],
            d_after=d["d_after"],
            seed=d["seed"],
            replica=d["replica"],
            step_index=d["step_index"],
        )


def replay_witness(witness: DiameterWitness) -> tuple[float, float]:
    """Recompute (D_before, D_after) of a witness step from pure geometry."""
    rng = np.random.default_rng(0)  # tie draws unused: witness configs are tie-free
    ordered = order_by_distance(witness.config_before, rng)
    core = ordered.core
    d_before = diameter(core)
    new_pts = np.vstack([core, witness.inserted[None, :]])
    new_core = order_by_distance(new_pts, rng).core
    return d_before, diameter(new_core)


def find_diameter_increase(n_points: int, dim: int, trials: int, seed: int,
                           steps_per_config: int = 25, eps: float = 1e-9):
    """Random search for a step where the core diameter increases.

    Scans ``trials`` instrumented steps in batches on the active backend;
    when a batch flags one, the owning replica is replayed on the Python
    backend (identical stream) to extract the witness configuration.
    Returns a :class:`DiameterWitness` or ``None``.
    """
    if trials < 1:
        raise DynamicsError("trials must be >= 1")
    round_reps = max(1, min(4000, ceil(trials / steps_per_config / 4)))
    scanned = 0
    rep_offset = 0
    while scanned < trials:
        res = kernels.run_instrumented_kernel(
            seed, rep_offset, rep_offset + round_reps, n_points, dim, steps_per_config
        )
        inc = np.flatnonzero(res["d_after"] > res["d_before"] + eps)
        if inc.size:
            flat = int(inc[0])
            replica = rep_offset + flat // steps_per_config
            step_index = flat % steps_per_config
            cap = trace_kernels.run_instrumented_capture(
                seed, replica, n_points, dim, step_index + 1
            )
            return DiameterWitness(
                n_points=n_points,
                dim=dim,
                config_before=cap["configs"][step_index],
                inserted=cap["inserted"][step_index],
                d_before=float(cap["d_before"][step_index]),
                d_after=float(cap["d_after"][step_index]),
                seed=seed,
                replica=replica,
                step_index=step_index,
            )
        scanned += round_reps * steps_per_config
        rep_offset += round_reps
    return None


# ---------------------------------------------------------------------------
# trace export


def write_trace_csv(result: RunResult, path, stride_note: str | None = None) -> None:
    """Export a decimated trajectory trace as t,F,D,mu_0..mu_{d-1} rows."""
    if result.trace_t is None:
        raise DynamicsError("run was not traced; pass trace_stride > 0")
    d = result.mu_trace.shape[1]
    with open(path, "w") as fh:
        if stride_note:
            fh.write(f"# {stride_note}\n")
        fh.write("t,F,D," + ",".join(f"mu_{j}" for j in range(d)) + "\n")
        for row in range(result.trace_t.size):
            mu = ",".join(repr(float(v)) for v in result.mu_trace[row])
            fh.write(
                f"{int(result.trace_t[row])},{float(result.F_trace[row])!r},"
                f"{float(result.D_trace[row])!r},{mu}\n"
            )
