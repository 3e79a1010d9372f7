import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import THREADS

from beautycontest import dynamics, exact3
from beautycontest.dynamics import RunParams, StopRule
from beautycontest.exact3 import (
    AbsorbedStateError,
    CorePair,
    contraction_factor,
    deterministic_init_moments,
    m_k,
    recur_step,
    sample_L,
    sample_L_batch,
    theta_recursion,
    uniform_init_moments,
    xi3_moments_from_init,
)


class StubRng:
    """Feeds a fixed sequence into rng.random()."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


# ---------------------------------------------------------------------------
# the core chain


def test_recur_step_branch4_extremes():
    # branch 4 with V = 1 maps (0, 1) to (1, 1)
    out = recur_step(CorePair(0.0, 1.0), StubRng([0.9, 1.0]))
    assert out.mu_prime == pytest.approx(1.0)
    assert out.diam == pytest.approx(1.0)
    # branch 1 with V = 1 is the mirror image
    out = recur_step(CorePair(0.0, 1.0), StubRng([0.1, 1.0]))
    assert out.mu_prime == pytest.approx(-1.0)
    assert out.diam == pytest.approx(1.0)
    # inner branches halve the diameter scale
    out = recur_step(CorePair(0.0, 1.0), StubRng([0.4, 0.5]))
    assert out.mu_prime == pytest.approx(-0.375)
    assert out.diam == pytest.approx(0.25)


def test_recur_step_absorbed_signal(rng):
    with pytest.raises(AbsorbedStateError):
        recur_step(CorePair(0.3, 0.0), rng)


def test_recur_step_contracts_in_kth_mean():
    rng = np.random.default_rng(112)
    n = 200000
    d_next = np.empty(n)
    u = rng.random(n)
    v = rng.random(n)
    scale = np.where((u >= 1 / 3) & (u < 2 / 3), 0.5 * v, v)
    d_next = scale  # D(0) = 1
    for k in (1, 2, 3):
        vals = d_next**k
        se = vals.std(ddof=1) / math.sqrt(n)
        assert abs(vals.mean() - float(contraction_factor(k))) < 3 * se


def test_contraction_factor_and_m_k():
    assert contraction_factor(1) == Fraction(5, 12)
    assert contraction_factor(2) == Fraction(1, 4)
    assert m_k(1, 1, 1.0) == pytest.approx(5 / 12)
    assert m_k(3, 2, 1.0) == pytest.approx(1 / 64)
    for k in (1, 2, 5):
        assert m_k(0, k, 0.7) == pytest.approx(0.7**k)


def test_recur_step_matches_one_dynamics_step():
    # one chain transition from (0, 1) must match one modified-model step
    # with core {-1/2, +1/2}: compare both coordinates by two-sample KS
    n = 100000
    rng = np.random.default_rng(224)
    mus = np.empty(n)
    ds = np.empty(n)
    u = rng.random(n)
    v = rng.random(n)
    b1 = u < 1 / 3
    b2 = (u >= 1 / 3) & (u < 0.5)
    b3 = (u >= 0.5) & (u < 2 / 3)
    b4 = u >= 2 / 3
    mus[b1] = -0.5 * (1 + v[b1])
    mus[b2] = -0.25 * (2 - v[b2])
    mus[b3] = 0.25 * (2 - v[b3])
    mus[b4] = 0.5 * (1 + v[b4])
    ds[b1 | b4] = v[b1 | b4]
    ds[b2 | b3] = 0.5 * v[b2 | b3]

    params = RunParams(n_points=3, dim=1, seed=225, replacement="adaptive_interval",
                       stop=StopRule.fixed_steps(1))
    reps, _ = dynamics.run_replicas(
        params, n, n_threads=THREADS, initial=np.array([[-0.5], [0.5], [100.0]]),
        hist_range=(-2.0, 2.0),
    )
    final = reps.final_points.reshape(n, 3)
    mu3 = final.mean(axis=1, keepdims=True)
    extreme = np.argmax(np.abs(final - mu3), axis=1)
    mask = np.ones_like(final, dtype=bool)
    mask[np.arange(n), extreme] = False
    core = final[mask].reshape(n, 2)
    mu_dyn = core.mean(axis=1)
    d_dyn = np.abs(core[:, 0] - core[:, 1])

    for a, b in [(mus, mu_dyn), (ds, d_dyn)]:
        x, y = np.sort(a), np.sort(b)
        grid = np.concatenate([x, y])
        ks = np.abs(
            np.searchsorted(x, grid, side="right") / n
            - np.searchsorted(y, grid, side="right") / n
        ).max()
        assert ks < 0.01


# ---------------------------------------------------------------------------
# sampling L


def test_sample_L_scalar(rng):
    vals = [sample_L(rng) for _ in range(200)]
    assert all(abs(v) < 20 for v in vals)
    assert any(v < 0 for v in vals) and any(v > 0 for v in vals)


def test_sample_L_moments_and_symmetry():
    rng = np.random.default_rng(909)
    L = sample_L_batch(1000000, rng)
    theta = theta_recursion(6)
    se1 = L.std(ddof=1) / math.sqrt(L.size)
    assert abs(L.mean()) < 3 * se1
    sq = L**2
    se2 = sq.std(ddof=1) / math.sqrt(L.size)
    assert abs(sq.mean() - 7 / 12) < 3 * se2
    # full law symmetric: KS(L, -L) small
    x, y = np.sort(L), np.sort(-L)
    grid = np.concatenate([x, y])
    ks = np.abs(
        np.searchsorted(x, grid, side="right") / x.size
        - np.searchsorted(y, grid, side="right") / y.size
    ).max()
    assert ks < 0.005
    # jackknife agreement for the higher even moments
    for k in (2, 4, 6):
        p = L**k
        se = p.std(ddof=1) / math.sqrt(p.size)
        assert abs(p.mean() - float(theta[k])) < 4 * se


def test_L_has_no_atoms_at_half():
    # the density has an integrable peak at +-1/2 but no point mass: the
    # centre bin stays within 5x its adjacent bins, and the mass of a
    # shrinking window keeps shrinking (an atom's would plateau)
    rng = np.random.default_rng(910)
    L = sample_L_batch(1000000, rng)
    for centre in (0.5, -0.5):
        edges = centre + 1e-3 * np.arange(-1.5, 2.5)
        counts, _ = np.histogram(L, bins=edges)
        assert counts[1] <= 5 * max((counts[0] + counts[2]) / 2, 1.0)
    wide = (np.abs(np.abs(L) - 0.5) < 1e-3).mean()
    narrow = (np.abs(np.abs(L) - 0.5) < 1e-5).mean()
    assert narrow < 0.25 * wide


# ---------------------------------------------------------------------------
# exact moment tables


def test_theta_quoted_values():
    t = theta_recursion(6)
    assert t[0] == 1
    assert t[2] == Fraction(7, 12)
    assert t[4] == Fraction(375, 368)
    assert t[6] == Fraction(76693, 22080)
    assert all(t[k] == 0 for k in (1, 3, 5))


def test_theta_odd_vanish_high_order():
    t = theta_recursion(15)
    assert all(t[k] == 0 for k in range(1, 16, 2))


def test_theta_json_entries():
    entries = theta_recursion(2).json_entries()
    assert entries[0] == {"k": 0, "num": "1", "den": "1", "float": 1.0}
    assert entries[2]["num"] == "7" and entries[2]["den"] == "12"


def test_xi3_moments_quarters_init():
    m = xi3_moments_from_init(
        deterministic_init_moments([Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]), 4
    )
    assert m[1] == Fraction(1, 2)
    assert m[2] == Fraction(29, 96)
    assert m[3] == Fraction(13, 64)
    assert m[4] == Fraction(873, 5888)


def test_xi3_moments_uniform_init():
    m = xi3_moments_from_init(uniform_init_moments(), 3)
    assert m[1] == Fraction(1, 2)
    assert m[2] == Fraction(1, 3)
    assert m[3] == Fraction(1, 4)


def test_xi3_moments_deterministic_mean_is_mu():
    # no tie: extreme of (0, 0.4, 1) is the right endpoint, core (0, 0.4)
    oracle = deterministic_init_moments([0, Fraction(2, 5), 1])
    m = xi3_moments_from_init(oracle, 2)
    assert m[1] == Fraction(1, 5)
    assert m[2] == Fraction(1, 25) + Fraction(7, 12) * Fraction(4, 25)


def test_xi3_moments_pm_half_core_equal_theta():
    oracle = deterministic_init_moments([Fraction(-1, 2), Fraction(1, 2), 100])
    m = xi3_moments_from_init(oracle, 6)
    t = theta_recursion(6)
    for k in range(7):
        assert m[k] == t[k]


def test_init_oracle_validation():
    with pytest.raises(ValueError):
        deterministic_init_moments([1, 1, 2])
    with pytest.raises(ValueError):
        deterministic_init_moments([1, 2])
    with pytest.raises(TypeError):
        xi3_moments_from_init(lambda a, b: 0.5, 2)
