import json
import os

import numpy as np
import pytest

from conftest import THREADS

from beautycontest import dynamics
from beautycontest.dynamics import (
    GAMMA,
    DiameterWitness,
    DynamicsError,
    RunParams,
    StopRule,
    find_diameter_increase,
    replay_witness,
    run,
    run_replicas,
    sample_step_stats,
    step,
    write_trace_csv,
)
from beautycontest.geometry import Configuration, order_by_distance, sum_sq_distances

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def make_params(**kw):
    base = dict(n_points=3, dim=1, seed=1)
    base.update(kw)
    return RunParams(**base)


# ---------------------------------------------------------------------------
# params validation


def test_params_validation():
    with pytest.raises(DynamicsError):
        make_params(n_points=2)
    with pytest.raises(DynamicsError):
        make_params(replacement="adaptive_interval", dim=2)
    with pytest.raises(DynamicsError):
        make_params(stop=StopRule.diameter_below(0.0))
    with pytest.raises(DynamicsError):
        make_params(mode="warp")


# ---------------------------------------------------------------------------
# single steps


def test_step_quarters_forced_centre(rng):
    params = make_params()
    out = step([[0.25], [0.5], [0.75]], params, rng, force_u=[0.5])
    assert out.F_before == pytest.approx(0.03125)
    assert out.F_after == pytest.approx(0.0)
    assert out.F_after < out.F_before
    assert out.D_after < out.D_before
    assert out.event_A


def test_step_far_insert_leaves_core(rng):
    # tight core near 0.1, new point far outside the 3D-ball
    params = make_params(n_points=4)
    config = [[0.095], [0.105], [0.1], [0.9]]
    out = step(config, params, rng, force_u=[0.9])
    assert not out.event_A
    assert out.replaced_was_new_point
    assert out.F_after == out.F_before  # exactly: core carried over


def test_step_inclusion_chain_small_sample(rng):
    params = make_params(n_points=4)
    config = Configuration(rng.random((4, 1)))
    violations = 0
    for _ in range(300):
        out = step(config.points, params, rng)
        if out.F_after < out.F_before and not out.event_A:
            violations += 1
        if out.event_A_prime:
            bound = -GAMMA * out.F_before / 4 + 1e-12
            assert out.F_after - out.F_before <= bound
        assert out.F_after <= out.F_before + 1e-12
        config = out.new_config
    assert violations == 0


def test_step_outcome_matches_identity(rng):
    # F change equals (n/(n-1)) (|u - mu_new|^2 - |y - mu_new|^2) with y the
    # new extreme; independent recomputation of the step's bookkeeping
    params = make_params(n_points=5, dim=2)
    pts = rng.random((5, 2))
    out = step(pts, params, rng)
    new_pts = out.new_config.points
    n = 5
    mu_new = new_pts.mean(axis=0)
    ordered = order_by_distance(new_pts, np.random.default_rng(3))
    y = ordered.extreme
    u = out.inserted
    predicted = (n / (n - 1)) * (((u - mu_new) ** 2).sum() - ((y - mu_new) ** 2).sum())
    assert out.F_after - out.F_before == pytest.approx(predicted, abs=1e-10)


def test_step_removed_on_left(rng):
    params = make_params()
    out = step([[0.0], [0.45], [0.55]], params, rng, force_u=[0.5])
    assert out.removed_on_left is True
    params2 = make_params(dim=2)
    out2 = step(rng.random((3, 2)), params2, rng)
    assert out2.removed_on_left is None


# ---------------------------------------------------------------------------
# runs


def test_run_quarters_terminates(rng):
    params = make_params(seed=5, stop=StopRule.diameter_below(1e-4))
    res = run(params, np.array([[0.25], [0.5], [0.75]]))
    assert 0.0 <= res.xi_estimate[0] <= 1.0
    assert res.steps > 0
    assert not res.absorbed


def test_run_rejects_duplicate_initial_points():
    params = make_params()
    with pytest.raises(DynamicsError):
        run(params, np.array([[0.5], [0.5], [0.7]]))


def test_run_zero_fixed_steps():
    params = make_params(stop=StopRule.fixed_steps(0), seed=3)
    res = run(params, np.array([[0.2], [0.4], [0.9]]))
    assert res.steps == 0
    # extreme of (0.2, 0.4, 0.9) is 0.9, so the core mean is 0.3
    assert res.xi_estimate[0] == pytest.approx(0.3)


def test_modified_first_step_removes_far_point(rng):
    params = make_params(replacement="adaptive_interval")
    out = step([[-0.5], [0.5], [100.0]], params, rng)
    assert 100.0 not in out.new_config.points
    # replacement drawn from [min core - D, max core + D] = [-1.5, 1.5]
    assert -1.5 <= out.inserted[0] <= 1.5


def test_modified_symmetric_mean_zero():
    params = make_params(seed=21, replacement="adaptive_interval",
                         stop=StopRule.diameter_below(1e-4))
    reps, _ = run_replicas(params, 100000, n_threads=THREADS,
                           initial=np.array([[-0.5], [0.5], [100.0]]),
                           hist_range=(-4.0, 4.0))
    xi = reps.xi[:, 0]
    se = xi.std(ddof=1) / np.sqrt(xi.size)
    assert abs(xi.mean()) < 3 * se


def test_modified_uniform_init_mean_half():
    params = make_params(seed=22, replacement="adaptive_interval",
                         stop=StopRule.diameter_below(1e-4))
    reps, _ = run_replicas(params, 100000, n_threads=THREADS)
    xi = reps.xi[:, 0]
    se = xi.std(ddof=1) / np.sqrt(xi.size)
    assert abs(xi.mean() - 0.5) < 4 * se


def test_run_replicas_deterministic_across_threads():
    params = make_params(seed=12, stop=StopRule.diameter_below(1e-3))
    r1, h1 = run_replicas(params, 4000, n_threads=1)
    r8, h8 = run_replicas(params, 4000, n_threads=8)
    assert h1[0] == h8[0]
    assert np.array_equal(r1.xi, r8.xi)
    assert np.array_equal(r1.steps, r8.steps)


def test_run_replicas_empty():
    params = make_params(seed=1)
    reps, hists = run_replicas(params, 0)
    assert len(reps) == 0
    assert hists[0].total == 0


def test_run_replicas_count_conservation():
    params = make_params(seed=4, stop=StopRule.diameter_below(1e-3))
    reps, hists = run_replicas(params, 10000, n_threads=THREADS)
    assert hists[0].total == 10000
    assert len(reps) == 10000
    first = reps[0]
    assert first.steps == reps.steps[0]
    assert 0.0 <= first.pi_N <= 1.0


def test_single_run_equals_replica_zero():
    params = make_params(seed=33, stop=StopRule.diameter_below(1e-3))
    single = run(params)
    batch, _ = run_replicas(params, 3)
    np.testing.assert_array_equal(single.xi_estimate, batch.xi[0])
    assert single.steps == batch.steps[0]
    np.testing.assert_array_equal(single.final_points, batch.final_points[0])


# ---------------------------------------------------------------------------
# event-skip mode


def test_event_skip_interval_probability():
    # crafted config: core {0.45, 0.55} (mean 0.5, D = 0.1), extreme at 0;
    # the ball-hit interval is [0.2, 0.8], so the first raw step realizes
    # with probability 0.6
    init = np.array([[0.45], [0.55], [0.0]])
    params = make_params(seed=77, mode="event_skip", stop=StopRule.fixed_steps(1))
    reps, _ = run_replicas(params, 10000, n_threads=THREADS, initial=init)
    realized = reps.n_a  # one iff the single allowed raw step hit the ball
    frac = realized.mean()
    assert abs(frac - 0.6) < 0.02


def test_event_skip_degenerate_core_absorbs():
    init = np.array([[0.3], [0.3 + 0.0], [0.9]])  # coincident core, D = 0
    init[1, 0] = 0.3
    params = make_params(seed=5, mode="event_skip", stop=StopRule.fixed_steps(10))
    res = run(params, Configuration(np.array([[0.3], [0.300000000001], [0.9]])))
    assert res.steps >= 0  # sanity: tiny but positive D still runs
    # exactly zero D: bypass the distinctness check by stepping first
    from beautycontest import _kernels_py
    out = _kernels_py.run_replicas_kernel(
        5, 0, 1, 3, 1, np.array([0.3, 0.3, 0.9]), 0, False, -1.0, 10, True, False, 1e12
    )
    assert bool(out["absorbed"][0])


def test_event_skip_matches_naive_distribution():
    n_rep = 100000
    pn = make_params(seed=101, mode="naive", stop=StopRule.diameter_below(1e-4))
    ps = make_params(seed=102, mode="event_skip", stop=StopRule.diameter_below(1e-4))
    rn, _ = run_replicas(pn, n_rep, n_threads=THREADS)
    rs, _ = run_replicas(ps, n_rep, n_threads=THREADS)
    x = np.sort(rn.xi[:, 0])
    y = np.sort(rs.xi[:, 0])
    grid = np.concatenate([x, y])
    ks = np.abs(
        np.searchsorted(x, grid, side="right") / x.size
        - np.searchsorted(y, grid, side="right") / y.size
    ).max()
    assert ks < 0.01


def test_event_skip_forbids_pi():
    params = make_params(mode="event_skip", seed=2, stop=StopRule.diameter_below(1e-3))
    reps, _ = run_replicas(params, 10)
    with pytest.raises(DynamicsError):
        reps.pi_values()
    assert run(params).pi_N is None


# ---------------------------------------------------------------------------
# instrumented batches


def test_step_stats_invariants():
    stats = sample_step_stats(5, 2, 50000, seed=11, n_threads=THREADS)
    drop = stats.f_after - stats.f_before
    assert int((drop > 1e-12).sum()) == 0
    assert int((stats.event_aprime & ~stats.event_a).sum()) == 0
    assert int(((drop < 0) & ~stats.event_a).sum()) == 0
    forced = -GAMMA * stats.f_before / 5 + 1e-12
    assert int((stats.event_aprime & ~(drop <= forced)).sum()) == 0


# ---------------------------------------------------------------------------
# trajectory traces, stopping-time records


def test_trace_non_increasing_F(tmp_path):
    params = make_params(seed=9, stop=StopRule.fixed_steps(20000))
    res = run(params, trace_stride=100)
    assert res.F_trace is not None and res.F_trace.size > 0
    assert np.all(np.diff(res.F_trace) <= 1e-12)
    assert res.tau_times is not None
    # F drops only happen at recorded tau times; counts agree
    assert res.tau_times.size == res.n_F_drops
    path = tmp_path / "trace.csv"
    write_trace_csv(res, path)
    rows = [l for l in open(path) if not l.startswith(("#", "t,"))]
    assert len(rows) == res.trace_t.size


def test_core_limit_consistency():
    # rerunning the tail at tol/10 moves the estimate by less than 10 tol
    tol = 1e-3
    params = make_params(seed=41, stop=StopRule.diameter_below(tol))
    first = run(params)
    params_fine = make_params(seed=41, stop=StopRule.diameter_below(tol / 10))
    resumed = run(params_fine, Configuration(first.final_points), replica=1)
    assert abs(resumed.xi_estimate[0] - first.xi_estimate[0]) < 10 * tol


def test_geometric_decay_of_tau_diameters():
    # pooled over independent runs: log D at the n-th core-change event
    # falls linearly in n (every realized event-skip step is an A event)
    ns, logds = [], []
    for rep in range(40):
        params = make_params(seed=400, mode="event_skip",
                             stop=StopRule.diameter_below(1e-10))
        res = run(params, trace_stride=1, include_initial_trace=False, replica=rep)
        d = res.D_trace
        keep = d > 0
        ns.append(np.arange(1, d.size + 1)[keep])
        logds.append(np.log(d[keep]))
    n = np.concatenate(ns).astype(float)
    y = np.concatenate(logds)
    assert n.size >= 1000
    nbar, ybar = n.mean(), y.mean()
    sxx = ((n - nbar) ** 2).sum()
    slope = ((n - nbar) * (y - ybar)).sum() / sxx
    resid = y - ybar - slope * (n - nbar)
    t_stat = slope / np.sqrt(resid @ resid / (n.size - 2) / sxx)
    assert slope < 0
    assert t_stat < -2.33  # one-sided p < 0.01


# ---------------------------------------------------------------------------
# diameter monotonicity regimes


def test_no_diameter_increase_small_systems():
    assert find_diameter_increase(3, 1, trials=100000, seed=77) is None
    assert find_diameter_increase(4, 1, trials=100000, seed=77) is None


def test_diameter_increase_witness_found_live():
    w = find_diameter_increase(5, 1, trials=200000, seed=77)
    assert w is not None
    d_before, d_after = replay_witness(w)
    assert d_after > d_before + 1e-9


def test_diameter_increase_fixture_replays():
    with open(os.path.join(FIXTURES, "diameter_increase_witness.json")) as fh:
        w = DiameterWitness.from_json(fh.read())
    d_before, d_after = replay_witness(w)
    assert d_before == pytest.approx(w.d_before, abs=1e-12)
    assert d_after == pytest.approx(w.d_after, abs=1e-12)
    assert d_after > d_before + 1e-9


# ---------------------------------------------------------------------------
# pi tracking


def test_pi_symmetric_ensemble():
    params = make_params(seed=55, stop=StopRule.fixed_steps(500))
    reps, _ = run_replicas(params, 4000, n_threads=THREADS,
                           initial=np.array([[0.25], [0.5], [0.75]]))
    pis = reps.pi_values()
    se = pis.std(ddof=1) / np.sqrt(pis.size)
    assert abs(pis.mean() - 0.5) < 4 * se
