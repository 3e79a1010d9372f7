"""Geometric measures of a point configuration.

Everything here is a pure function of an (n, d) array of points plus, where
tie-breaking matters, an explicit random generator.  The central quantities:

- ``barycentre``: component-wise mean of the points.
- ``sum_sq_distances``: G, the sum of squared distances to the barycentre
  (n times the squared radius of gyration).
- ``order_by_distance``: points sorted by distance to the barycentre; the
  last point in that order is the *extreme* point, the rest form the *core*.
- ``lyapunov_F``: G evaluated on the core, the monotone functional driving
  the replacement dynamics.
- ``diameter``: max pairwise distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GeometryError(ValueError):
    """Raised for configurations outside an operation's domain."""


def as_points(config) -> np.ndarray:
    """Coerce a Configuration or array-like into a float (n, d) array."""
    if isinstance(config, Configuration):
        return config.points
    pts = np.asarray(config, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise GeometryError(f"points must be an (n, d) array, got shape {pts.shape}")
    return pts


@dataclass(frozen=True)
class Configuration:
    """An ordered collection of n points in R^d.

    Coordinates are never clamped: the modified replacement rule can move
    points outside the unit cube, which is part of the model.
    """

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise GeometryError(f"need an (n>=1, d>=1) point array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def has_distinct_points(self) -> bool:
        pts = self.points
        for i in range(pts.shape[0]):
            if np.any(np.all(pts[i + 1 :] == pts[i], axis=1)):
                return False
        return True


@dataclass(frozen=True)
class OrderedConfiguration:
    """A configuration sorted by distance to its barycentre.

    ``points_by_distance[-1]`` is the extreme point, ``points_by_distance[:-1]``
    the core.  ``permutation`` maps sorted position -> original index.
    """

    points_by_distance: np.ndarray
    barycentre: np.ndarray
    permutation: np.ndarray

    @property
    def extreme(self) -> np.ndarray:
        return self.points_by_distance[-1]

    @property
    def core(self) -> np.ndarray:
        return self.points_by_distance[:-1]


@dataclass(frozen=True)
class CoreSummary:
    """Per-step summary of the core: its mean, diameter D and Lyapunov value F."""

    core_mean: np.ndarray
    core_diameter: float
    lyapunov: float


def barycentre(config) -> np.ndarray:
    """Component-wise arithmetic mean of the points."""
    pts = as_points(config)
    if pts.shape[0] == 0:
        raise GeometryError("barycentre of an empty configuration is undefined")
    return pts.mean(axis=0)


def sum_sq_distances(config) -> float:
    """G = sum of squared Euclidean distances to the barycentre."""
    pts = as_points(config)
    if pts.shape[0] == 0:
        raise GeometryError("G of an empty configuration is undefined")
    mu = pts.mean(axis=0)
    return float(((pts - mu) ** 2).sum())

def sum_sq_distances_pairwise(config) -> float:
    """G via the pairwise form (1/n) * sum_{i<j} ||x_i - x_j||^2.

    Equal to :func:`sum_sq_distances` up to rounding; kept as an independent
    cross-check route.
    """
    pts = as_points(config)
    n = pts.shape[0]
    if n == 0:
        raise GeometryError("G of an empty configuration is undefined")
    total = 0.0
    for i in range(1, n):
        total += float(((pts[:i] - pts[i]) ** 2).sum())
    return total / n


def diameter(config) -> float:
    """Max pairwise Euclidean distance (0 for a single point)."""
    pts = as_points(config)
    n = pts.shape[0]
    if n == 0:
        raise GeometryError("diameter of an empty configuration is undefined")
    best = 0.0
    for i in range(1, n):
        d2 = ((pts[:i] - pts[i]) ** 2).sum(axis=1).max()
        if d2 > best:
            best = float(d2)
    return float(np.sqrt(best))


def order_by_distance(config, tie_rng: np.random.Generator) -> OrderedConfiguration:
    """Sort points by distance to the barycentre, breaking exact ties at random.

    Ties are detected by exact equality of squared distances (near-ties are
    measure zero in the continuous model; exact ones arise in crafted
    configurations) and the tied block is permuted uniformly using
    ``tie_rng``.
    """
    pts = as_points(config)
    if pts.shape[0] == 0:
        raise GeometryError("cannot order an empty configuration")
    mu = pts.mean(axis=0)
    d2 = ((pts - mu) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")
    # shuffle within blocks of exactly equal distance
    i = 0
    n = len(order)
    while i < n:
        j = i + 1
        while j < n and d2[order[j]] == d2[order[i]]:
            j += 1
        if j - i > 1:
            order[i:j] = tie_rng.permutation(order[i:j])
        i = j
    return OrderedConfiguration(
        points_by_distance=pts[order], barycentre=mu, permutation=order
    )


def lyapunov_F(config, tie_rng: np.random.Generator) -> float:
    """F = G of the core (the configuration with its extreme point removed)."""
    pts = as_points(config)
    if pts.shape[0] < 2:
        raise GeometryError("F needs at least 2 points (the core must be non-empty)")
    ordered = order_by_distance(pts, tie_rng)
    return sum_sq_distances(ordered.core)


def core_summary(config, tie_rng: np.random.Generator) -> CoreSummary:
    """Mean, diameter and Lyapunov value of the core in one pass."""
    pts = as_points(config)
    if pts.shape[0] < 2:
        raise GeometryError("core summary needs at least 2 points")
    core = order_by_distance(pts, tie_rng).core
    return CoreSummary(
        core_mean=core.mean(axis=0),
        core_diameter=diameter(core),
        lyapunov=sum_sq_distances(core),
    )
