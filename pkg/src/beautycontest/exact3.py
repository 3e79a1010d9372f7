"""Exact analysis of the modified three-point model in one dimension.

With adaptive replacements, the core pair (mean, diameter) is an explicit
Markov chain: a four-branch random affine map with branch probabilities
(1/3, 1/6, 1/6, 1/3).  Its limit decomposes as mu'(0) + D(0) * L, where L
is the scale-free limit (initial core at +-1/2), independent of the start.
This module provides the chain, the closed-form diameter moments, a sampler
for L, the exact rational recursion for the moments of L, and the binomial
assembly of limit moments for arbitrary initial laws.

All exact arithmetic is carried by ``fractions.Fraction``; floats appear
only at the API boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

import numpy as np

from .spacings import joint_moment_mu_D

#: exact-arithmetic carrier (reduced, positive denominator by construction)
Rational = Fraction


class AbsorbedStateError(ValueError):
    """The core pair has zero diameter; the chain is stuck."""


@dataclass(frozen=True)
class CorePair:
    """Mean and diameter of the two-point core."""

    mu_prime: float
    diam: float


@dataclass(frozen=True)
class ThetaTable:
    """Exact moments theta_k = E[L^k] of the scale-free limit."""

    theta: dict[int, Fraction]

    @property
    def k_max(self) -> int:
        return max(self.theta)

    def __getitem__(self, k: int) -> Fraction:
        return self.theta[k]

    def as_float(self, k: int) -> float:
        return float(self.theta[k])

    def json_entries(self) -> list[dict]:
        return [
            {"k": k, "num": str(v.numerator), "den": str(v.denominator), "float": float(v)}
            for k, v in sorted(self.theta.items())
        ]


@dataclass(frozen=True)
class MomentTable:
    """Exact limit moments E[xi^k] indexed by k."""

    values: dict[int, Fraction]

    def __getitem__(self, k: int) -> Fraction:
        return self.values[k]

    def as_float(self, k: int) -> float:
        return float(self.values[k])

    def json_entries(self) -> list[dict]:
        return [
            {"k": k, "num": str(v.numerator), "den": str(v.denominator), "float": float(v)}
            for k, v in sorted(self.values.items())
        ]


# ---------------------------------------------------------------------------
# the (mu', D) chain


def recur_step(state: CorePair, rng: np.random.Generator) -> CorePair:
    """One transition of the core chain.

    Branches (with V uniform on [0,1]):
      1/3: (mu - (1+V)/2 * D,  V*D)      new point far left, right core point out
      1/6: (mu - (2-V)/4 * D,  V*D/2)    new point in the left half
      1/6: (mu + (2-V)/4 * D,  V*D/2)    new point in the right half
      1/3: (mu + (1+V)/2 * D,  V*D)      new point far right, left core point out
    """
    if state.diam <= 0.0:
        raise AbsorbedStateError("zero-diameter core cannot move")
    u = rng.random()
    v = rng.random()
    mu, d = state.mu_prime, state.diam
    if u < 1.0 / 3.0:
        return CorePair(mu - 0.5 * (1.0 + v) * d, v * d)
    if u < 0.5:
        return CorePair(mu - 0.25 * (2.0 - v) * d, 0.5 * v * d)
    if u < 2.0 / 3.0:
        return CorePair(mu + 0.25 * (2.0 - v) * d, 0.5 * v * d)
    return CorePair(mu + 0.5 * (1.0 + v) * d, v * d)


def contraction_factor(k: int) -> Fraction:
    """Exact one-step contraction of the k-th diameter moment."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return (2 + Fraction(1, 2**k)) / (3 * (k + 1))


def m_k(t: int, k: int, d0: float) -> float:
    """Closed-form conditional moment E[D(t)^k | D(0) = d0]."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return float(contraction_factor(k)) ** t * d0**k if k >= 1 else 1.0


# ---------------------------------------------------------------------------
# sampling the scale-free limit L


def sample_L(rng: np.random.Generator, tol: float = 1e-6) -> float:
    """One draw of L by iterating the chain from (0, 1) until D < tol.

    Forward iteration truncates the limit at O(tol); the bias is far below
    Monte Carlo noise at any realistic draw count.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    state = CorePair(0.0, 1.0)
    while state.diam >= tol:
        state = recur_step(state, rng)
    return state.mu_prime


def sample_L_batch(size: int, rng: np.random.Generator, tol: float = 1e-6) -> np.ndarray:
    """Vectorized L draws (same chain, all replicas stepped in lockstep)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    mu = np.zeros(size)
    d = np.ones(size)
    active = np.ones(size, dtype=bool)
    while np.any(active):
        idx = np.flatnonzero(active)
        u = rng.random(idx.size)
        v = rng.random(idx.size)
        dd = d[idx]
        shift = np.where(
            u < 1.0 / 3.0,
            -0.5 * (1.0 + v) * dd,
            np.where(
                u < 0.5,
                -0.25 * (2.0 - v) * dd,
                np.where(u < 2.0 / 3.0, 0.25 * (2.0 - v) * dd, 0.5 * (1.0 + v) * dd),
            ),
        )
        scale = np.where((u >= 1.0 / 3.0) & (u < 2.0 / 3.0), 0.5 * v, v)
        mu[idx] += shift
        d[idx] = scale * dd
        active[idx] = d[idx] >= tol
    return mu


# ---------------------------------------------------------------------------
# exact moments of L


def _a_coeff(k: int, j: int) -> Fraction:
    return Fraction(1, 2**j) * sum(
        Fraction(comb(j, ell), k - ell + 1) for ell in range(j + 1)
    )


def _b_coeff(k: int, j: int) -> Fraction:
    return Fraction(1, 2**k) * sum(
        comb(j, ell) * Fraction(-1, 2) ** (j - ell) * Fraction(1, k - ell + 1)
        for ell in range(j + 1)
    )


def theta_recursion(k_max: int) -> ThetaTable:
    """Exact theta_k = E[L^k] for k = 0..k_max.

    The fixed-point equation gives, for even k,
        theta_k = (1/3) * sum_{j even <= k} C(k,j) theta_{k-j} (2a(k,j) + b(k,j)),
    whose j = 0 term contains theta_k itself; solving for it:
        theta_k (1 - (2a(k,0)+b(k,0))/3) = (1/3) sum_{j even >= 2} ...
    Odd moments vanish by the symmetry L = -L in law.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    theta: dict[int, Fraction] = {0: Fraction(1)}
    for k in range(1, k_max + 1):
        if k % 2 == 1:
            theta[k] = Fraction(0)
            continue
        rhs = Fraction(0)
        for j in range(2, k + 1, 2):
            rhs += comb(k, j) * theta[k - j] * (2 * _a_coeff(k, j) + _b_coeff(k, j))
        rhs /= 3
        self_term = (2 * _a_coeff(k, 0) + _b_coeff(k, 0)) / 3
        theta[k] = rhs / (1 - self_term)
    return ThetaTable(theta=theta)


# ---------------------------------------------------------------------------
# limit moments for a given initial law


def xi3_moments_from_init(init_moments, k_max: int) -> MomentTable:
    """E[xi^k] = sum_j C(k,j) theta_j E[mu'(0)^(k-j) D(0)^j] for k <= k_max.

    ``init_moments(a, b)`` must return the exact joint moment
    E[mu'(0)^a D(0)^b] as a Fraction; L is independent of the start.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    theta = theta_recursion(k_max)
    values: dict[int, Fraction] = {}
    for k in range(k_max + 1):
        total = Fraction(0)
        for j in range(0, k + 1, 2):
            mixed = init_moments(k - j, j)
            if not isinstance(mixed, Fraction):
                raise TypeError("init_moments must return Fractions")
            total += comb(k, j) * theta[j] * mixed
        values[k] = total
    return MomentTable(values=values)


def deterministic_init_moments(points):
    """Joint-moment oracle for a fixed three-point start, exact in rationals.

    The extreme of the start is found with exact arithmetic; if several
    points tie (e.g. the symmetric start 1/4, 1/2, 3/4), the oracle averages
    over the equally likely removals.
    """
    pts = [Fraction(p) for p in points]
    if len(pts) != 3:
        raise ValueError("need exactly 3 points")
    if len(set(pts)) != 3:
        raise ValueError("points must be distinct")
    mu = sum(pts) / 3
    dists = [abs(p - mu) for p in pts]
    dmax = max(dists)
    branches = []
    for i, dist in enumerate(dists):
        if dist == dmax:
            core = [p for j, p in enumerate(pts) if j != i]
            branches.append((sum(core) / 2, abs(core[0] - core[1])))
    weight = Fraction(1, len(branches))

    def oracle(a: int, b: int) -> Fraction:
        return sum(weight * mu_c**a * d_c**b for mu_c, d_c in branches)

    return oracle


def uniform_init_moments():
    """Joint-moment oracle for three iid uniform starting points."""

    def oracle(a: int, b: int) -> Fraction:
        return joint_moment_mu_D(a, b)

    return oracle
