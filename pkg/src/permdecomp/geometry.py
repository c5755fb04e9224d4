"""Centroids, spreads and branch trajectories."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .io import write_csv
from .spaces import as_points

MIN_NORM2 = 1e-20


def _position_weights(psi, measure=None):
    """Scalar position measure of ``psi``: ``(points (K, d), weights (K,))``."""
    if measure is None:
        if not hasattr(psi, "grid"):
            raise InvalidInputError("finite-dimensional states need an explicit measure")
        return psi.grid.x[:, None], psi.density() * psi.grid.dx
    w = measure.reduce_atoms(np.abs(measure.coefficients(psi.data)) ** 2)[0]
    return as_points(measure.points), w


def _checked(w):
    total = float(w.sum())
    if total < MIN_NORM2:
        raise InvalidInputError(f"state norm^2 {total:.3g} is too small for a centroid")
    return total


def centroid(psi, measure=None) -> np.ndarray | float:
    """Density-weighted mean position (a float in one dimension)."""
    pts, w = _position_weights(psi, measure)
    c = (w @ pts) / _checked(w)
    return float(c[0]) if c.size == 1 else c


def spread(psi, measure=None, metric: Optional["ConfigMetric"] = None) -> float:
    """Root-mean-square distance from the centroid."""
    pts, w = _position_weights(psi, measure)
    total = _checked(w)
    c = (w @ pts) / total
    if metric is None:
        d2 = ((pts - c) ** 2).sum(axis=1)
    else:
        d2 = metric.distance(pts, c) ** 2
    return float(np.sqrt(max(w @ d2 / total, 0.0)))


class ConfigMetric:
    """Mass-weighted distance on the configuration space of several particles.

    Configurations are flat vectors ``(x_1, ..., x_N)`` with ``x_i`` in
    R^spatial_dim.
    """

    def __init__(self, masses: Sequence[float], spatial_dim: int = 1):
        self.masses = np.asarray(masses, dtype=float).reshape(-1)
        if self.masses.size < 1 or np.any(self.masses <= 0):
            raise InvalidInputError("masses must be positive")
        self.spatial_dim = int(spatial_dim)

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def dim(self) -> int:
        return self.masses.size * self.spatial_dim

    def distance(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        diff = (x - y).reshape(*np.broadcast_shapes(x.shape, y.shape)[:-1],
                               self.masses.size, self.spatial_dim)
        return np.sqrt(((diff ** 2).sum(-1) @ self.masses) / self.total_mass)

    def __call__(self, x, y):
        return self.distance(x, y)

    def merge(self, i: int, j: int) -> "ConfigMetric":
        """Metric with particle ``j`` absorbed into particle ``i``."""
        m = self.masses.copy()
        m[i] += m[j]
        return ConfigMetric(np.delete(m, j), self.spatial_dim)

    def drop_particle(self, x, j: int) -> np.ndarray:
        """Configuration with particle ``j``'s coordinates removed."""
        x = np.asarray(x, dtype=float)
        k = self.spatial_dim
        return np.concatenate([x[..., :j * k], x[..., (j + 1) * k:]], axis=-1)


def euclidean(points, x):
    return np.sqrt(((as_points(points) - np.asarray(x, dtype=float)) ** 2).sum(axis=1))


@dataclass(frozen=True)
class SpreadResult:
    sigma: float
    minimizer: np.ndarray
    ties: bool
    tied_candidates: np.ndarray


def _tau(pts, w, total, metric, x):
    return float(np.sqrt(max(w @ metric(pts, x) ** 2 / total, 0.0)))


def general_spread(psi, metric: Callable = euclidean, candidates=None, measure=None,
                   refine_steps: int = 6, tie_tol: float = 1e-8) -> SpreadResult:
    """Minimise ``tau(x)``, the rms ``metric``-distance to ``x``, over a search grid.

    The best candidate is refined on successively finer local grids.  When
    several coarse candidates are within ``tie_tol`` of the minimum and not
    adjacent to each other, ``ties`` is set and the minimiser is not unique.
    """
    pts, w = _position_weights(psi, measure)
    total = _checked(w)
    cand = as_points(pts if candidates is None else candidates)
    if len(cand) == 0:
        raise InvalidInputError("search grid is empty")
    taus = np.array([_tau(pts, w, total, metric, c) for c in cand])
    best = int(np.argmin(taus))
    tied = cand[taus <= taus[best] + tie_tol * max(1.0, taus[best])]

    spacing = []
    for k in range(cand.shape[1]):
        u = np.unique(cand[:, k])
        spacing.append(np.diff(u).min() if len(u) > 1 else 1.0)
    h = np.asarray(spacing)
    ties = bool(np.any(np.abs(tied - cand[best]).max(axis=0) > 1.5 * h)) if len(tied) > 1 \
        else False

    x, tau = cand[best].copy(), taus[best]
    offsets = np.linspace(-1.0, 1.0, 11)
    for _ in range(refine_steps):
        for step in itertools.product(offsets, repeat=len(x)):
            trial = x + np.asarray(step) * h
            val = _tau(pts, w, total, metric, trial)
            if val < tau:
                x, tau = trial, val
        h = h / 5
    return SpreadResult(tau, x, ties, tied)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        if np.any(np.diff(t) <= 0):
            raise InvalidInputError("trajectory times must be strictly increasing")
        p = np.asarray(self.points, dtype=float)
        if len(p) != len(t):
            raise InvalidInputError("one point per time is required")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", p)


def branch_trajectory(T, branch, time_grid, measure=None) -> Trajectory:
    """Centroid of the element a branch occupies at each sampled time."""
    from .tree import branch_state

    times = np.asarray(time_grid, dtype=float)
    pts = [centroid(branch_state(T, branch, t), measure) for t in times]
    return Trajectory(times, np.asarray(pts))


def write_trajectories_csv(path, items) -> None:
    """``items``: iterable of ``(branch_id, probability, Trajectory)``."""
    rows = []
    for bid, prob, traj in items:
        for t, x in zip(traj.times, traj.points):
            rows.append([t, *np.atleast_1d(x), int(bid), prob])
    first = np.atleast_1d(items[0][2].points[0]) if items else np.zeros(1)
    cols = ["x"] if first.size == 1 else [f"x_{k}" for k in range(first.size)]
    write_csv(path, ["t", *cols, "branch_id", "prob"], rows)
