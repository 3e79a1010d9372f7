"""Uniform spacings: sampling, exact moments, and the uniform-start law.

n iid uniform points on [0,1] induce n+1 spacings (gaps between consecutive
order statistics, with the interval endpoints included).  These carry exact
mixed-moment formulas and two distributional identities for minima, and they
give a closed-form description of the (core mean, core diameter) law of a
three-point uniform start, including densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np


class SpacingsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# sampling


def sample_spacings(n: int, rng: np.random.Generator) -> np.ndarray:
    """One draw of the n+1 spacings induced by n uniform points."""
    if n < 1:
        raise SpacingsError("need n >= 1 points")
    u = np.sort(rng.random(n))
    return np.diff(u, prepend=0.0, append=1.0)


def sample_spacings_batch(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent spacing vectors, shape (size, n+1)."""
    if n < 1:
        raise SpacingsError("need n >= 1 points")
    u = np.sort(rng.random((size, n)), axis=1)
    out = np.empty((size, n + 1))
    out[:, 0] = u[:, 0]
    out[:, 1:n] = u[:, 1:] - u[:, :-1]
    out[:, n] = 1.0 - u[:, -1]
    return out


# ---------------------------------------------------------------------------
# exact moments


def mixed_moment(n: int, alpha, beta):
    """E[S_{n,1}^alpha * S_{n,2}^beta].

    Exact Fraction for integer exponents, double-precision gamma evaluation
    otherwise.
    """
    if n < 1:
        raise SpacingsError("need n >= 1")
    if alpha < 0 or beta < 0:
        raise SpacingsError("exponents must be non-negative")
    if float(alpha).is_integer() and float(beta).is_integer():
        a, b = int(alpha), int(beta)
        return Fraction(factorial(n) * factorial(a) * factorial(b), factorial(n + a + b))
    return math.exp(
        math.lgamma(n + 1)
        + math.lgamma(alpha + 1)
        + math.lgamma(beta + 1)
        - math.lgamma(n + 1 + alpha + beta)
    )


def moment_D(k: int) -> Fraction:
    """Exact E[D^k] for the core diameter of three uniform points."""
    if k < 0:
        raise SpacingsError("k must be >= 0")
    return Fraction(1, 2**k) * Fraction(6, (k + 1) * (k + 2) * (k + 3))


def moment_mu(k: int) -> Fraction:
    """Exact E[mu^k] for the core mean of three uniform points."""
    if k < 0:
        raise SpacingsError("k must be >= 0")
    inner = 3 * k - 5 + Fraction(3 ** (k + 3) - 1, 4 ** (k + 1))
    return 4 * inner / ((k + 1) * (k + 2) * (k + 3))


def _w_moment(k: int) -> Fraction:
    """E[W^k] for W = S1 + S2/4 (three uniform points)."""
    return Fraction(8) * (1 - Fraction(1, 4 ** (k + 1))) / ((k + 1) * (k + 2) * (k + 3))


def moment_mu_via_w(k: int) -> Fraction:
    """Independent route to E[mu^k] through the W representation.

    mu equals W or 1-W with a fair coin, so
    E[mu^k] = (E[W^k] + sum_j C(k,j) (-1)^j E[W^j]) / 2.
    """
    if k < 0:
        raise SpacingsError("k must be >= 0")
    reflected = sum(comb(k, j) * (-1) ** j * _w_moment(j) for j in range(k + 1))
    return (_w_moment(k) + reflected) / 2


def _w_mixed(i: int, b: int) -> Fraction:
    """E[W^i * S2^b] with W = S1 + S2/4."""
    return sum(
        comb(i, m) * Fraction(1, 4**m) * mixed_moment(3, i - m, b + m)
        for m in range(i + 1)
    )


def joint_moment_mu_D(a: int, b: int) -> Fraction:
    """Exact joint moment E[mu^a * D^b] for the three-point uniform start."""
    if a < 0 or b < 0:
        raise SpacingsError("exponents must be non-negative")
    direct = _w_mixed(a, b)
    reflected = sum(comb(a, i) * (-1) ** i * _w_mixed(i, b) for i in range(a + 1))
    return Fraction(1, 2 ** (b + 1)) * (direct + reflected)


# ---------------------------------------------------------------------------
# the uniform-start (mu, D) law


def init_law_mu_D(rng: np.random.Generator) -> tuple[float, float]:
    """Sample the (core mean, core diameter) of three iid uniform points.

    Uses the spacing representation: (mu, D) equals (S1 + S2/4, S2/2) or its
    reflection (1 - S1 - S2/4, S2/2) with a fair coin.
    """
    s = sample_spacings(3, rng)
    w = s[0] + 0.25 * s[1]
    d = 0.5 * s[1]
    if rng.random() < 0.5:
        return w, d
    return 1.0 - w, d


def init_law_mu_D_batch(size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    s = sample_spacings_batch(3, size, rng)
    w = s[:, 0] + 0.25 * s[:, 1]
    d = 0.5 * s[:, 1]
    flip = rng.random(size) < 0.5
    mu = np.where(flip, 1.0 - w, w)
    return mu, d


def density_D(r):
    """Density of the three-point core diameter, 6(1-2r)^2 on [0, 1/2].

    D equals half a single spacing in law, whose density is 3(1-s)^2; the
    change of variables contributes the factor 2 (the k-th moments
    2^-k * 6/((k+1)(k+2)(k+3)) pin the normalization).
    """
    r = np.asarray(r, dtype=float)
    out = np.where((r >= 0.0) & (r <= 0.5), 6.0 * (1.0 - 2.0 * r) ** 2, 0.0)
    return float(out) if out.ndim == 0 else out


def density_W(r):
    """Density of W = S1 + S2/4; piecewise quadratic on [0, 1]."""
    r = np.asarray(r, dtype=float)
    low = 4.0 * (1.0 - r) ** 2 - 4.0 * (1.0 - 4.0 * r) ** 2
    high = 4.0 * (1.0 - r) ** 2
    out = np.where(r < 0.25, low, high)
    out = np.where((r < 0.0) | (r > 1.0), 0.0, out)
    return float(out) if out.ndim == 0 else out


def density_mu(r):
    """Density of the three-point core mean; symmetric piecewise quadratic."""
    r = np.asarray(r, dtype=float)
    low = 4.0 * r * (3.0 * (1.0 - r) - 4.0 * r)
    mid = 2.0 - 4.0 * r * (1.0 - r)
    high = 4.0 * (1.0 - r) * (3.0 * r - 4.0 * (1.0 - r))
    out = np.where(r < 0.25, low, np.where(r <= 0.75, mid, high))
    out = np.where((r < 0.0) | (r > 1.0), 0.0, out)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# distributional identities for spacing minima


def _ks_two_sample(x: np.ndarray, y: np.ndarray) -> float:
    x = np.sort(x)
    y = np.sort(y)
    grid = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, grid, side="right") / x.size
    cdf_y = np.searchsorted(y, grid, side="right") / y.size
    return float(np.abs(cdf_x - cdf_y).max())


@dataclass(frozen=True)
class MinIdentityReport:
    """Two-sample KS distances for the spacing-minimum identities."""

    n: int
    n_draws: int
    threshold: float
    ks_min_pair: float          # min{S1,S2} vs S1/2
    ks_joint_first: float       # S1 marginal in the joint identity
    ks_joint_min: float         # min{S2,S3} vs S2/2
    ks_joint_product: float     # S1*min{S2,S3} vs S1*S2/2

    @property
    def passed(self) -> bool:
        worst = max(self.ks_min_pair, self.ks_joint_first,
                    self.ks_joint_min, self.ks_joint_product)
        return worst < self.threshold


def check_min_identities(n: int, n_draws: int, rng: np.random.Generator) -> MinIdentityReport:
    """Monte Carlo check of min{S_{n,1},S_{n,2}} = S_{n,1}/2 in law and of
    the joint identity (S_{n,1}, min{S_{n,2},S_{n,3}}) = (S_{n,1}, S_{n,2}/2).

    Each side is sampled independently and compared by two-sample KS at
    threshold 3/sqrt(n_draws).  The joint identity needs n >= 2.
    """
    if n < 1:
        raise SpacingsError("need n >= 1")
    threshold = 3.0 / math.sqrt(n_draws)

    lhs = sample_spacings_batch(n, n_draws, rng)
    rhs = sample_spacings_batch(n, n_draws, rng)
    ks_min_pair = _ks_two_sample(
        np.minimum(lhs[:, 0], lhs[:, 1]), 0.5 * rhs[:, 0]
    )

    if n >= 2:
        lhs = sample_spacings_batch(n, n_draws, rng)
        rhs = sample_spacings_batch(n, n_draws, rng)
        l_first, l_min = lhs[:, 0], np.minimum(lhs[:, 1], lhs[:, 2])
        r_first, r_min = rhs[:, 0], 0.5 * rhs[:, 1]
        ks_first = _ks_two_sample(l_first, r_first)
        ks_min = _ks_two_sample(l_min, r_min)
        ks_prod = _ks_two_sample(l_first * l_min, r_first * r_min)
    else:
        ks_first = ks_min = ks_prod = 0.0

    return MinIdentityReport(
        n=n,
        n_draws=n_draws,
        threshold=threshold,
        ks_min_pair=ks_min_pair,
        ks_joint_first=ks_first,
        ks_joint_min=ks_min,
        ks_joint_product=ks_prod,
    )
