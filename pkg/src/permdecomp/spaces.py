"""Regions of an outcome space R^d and discrete scalar measures on it.

Regions are lightweight predicates.  Primitive closed regions (point sets,
boxes, closed half-spaces and their unions) also know their Euclidean
distance function, which is what the dilation construction in
:mod:`permdecomp.measurelab` needs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

BOUNDARY_TOL = 1e-12


def as_points(points) -> np.ndarray:
    """Coerce to a float ``(K, d)`` array; 1-D input is read as K points in R^1."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr[:, None]
    if arr.ndim != 2:
        raise InvalidInputError(f"points must be 1-D or 2-D, got shape {arr.shape}")
    return arr


class Region:
    """Measurable subset of R^d described by a membership predicate."""

    is_closed = False

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def distance(self, points) -> np.ndarray:
        """Euclidean distance from each point to the region."""
        raise NotImplementedError(f"{type(self).__name__} has no distance function")

    def boundary(self, points, tol: float = BOUNDARY_TOL) -> np.ndarray:
        """Points lying on the topological boundary (a superset is acceptable)."""
        raise NotImplementedError

    def __and__(self, other: "Region") -> "Region":
        return Intersection(self, other)

    def __or__(self, other: "Region") -> "Region":
        return Union(self, other)

    def __invert__(self) -> "Region":
        return Complement(self)


class Whole(Region):
    is_closed = True

    def contains(self, points):
        return np.ones(len(as_points(points)), dtype=bool)

    def distance(self, points):
        return np.zeros(len(as_points(points)))

    def boundary(self, points, tol=BOUNDARY_TOL):
        return np.zeros(len(as_points(points)), dtype=bool)

    def __invert__(self):
        return Empty()

    def __repr__(self):
        return "Whole()"


class Empty(Region):
    is_closed = True

    def contains(self, points):
        return np.zeros(len(as_points(points)), dtype=bool)

    def distance(self, points):
        return np.full(len(as_points(points)), np.inf)

    def boundary(self, points, tol=BOUNDARY_TOL):
        return np.zeros(len(as_points(points)), dtype=bool)

    def __invert__(self):
        return Whole()

    def __repr__(self):
        return "Empty()"


class PointSet(Region):
    """A finite set of points; closed, and equal to its own boundary."""

    is_closed = True

    def __init__(self, points, tol: float = BOUNDARY_TOL):
        self.points = as_points(points)
        self.tol = tol

    def distance(self, points):
        pts = as_points(points)
        if len(self.points) == 0:
            return np.full(len(pts), np.inf)
        diff = pts[:, None, :] - self.points[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=-1)).min(axis=1)

    def contains(self, points):
        return self.distance(points) <= self.tol

    def boundary(self, points, tol=BOUNDARY_TOL):
        return self.distance(points) <= max(tol, self.tol)

    def __repr__(self):
        return f"PointSet({len(self.points)} points)"


class Box(Region):
    """Closed axis-aligned box ``lo <= x <= hi``; bounds may be infinite."""

    is_closed = True

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape:
            raise InvalidInputError("box bounds must have matching shapes")

    def contains(self, points):
        pts = as_points(points)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def distance(self, points):
        pts = as_points(points)
        gap = np.maximum(np.maximum(self.lo - pts, pts - self.hi), 0.0)
        return np.sqrt((gap ** 2).sum(axis=1))

    def boundary(self, points, tol=BOUNDARY_TOL):
        pts = as_points(points)
        touching = (np.abs(pts - self.lo) <= tol) | (np.abs(pts - self.hi) <= tol)
        return self.contains(pts) & touching.any(axis=1)

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"


class HalfSpace(Region):
    """``{x : normal . x <= offset}``, or ``<`` when ``strict``."""

    def __init__(self, normal, offset: float, strict: bool = False):
        self.normal = np.atleast_1d(np.asarray(normal, dtype=float))
        self.offset = float(offset)
        self.strict = strict
        self.is_closed = not strict

    def _level(self, points):
        return as_points(points) @ self.normal - self.offset

    def contains(self, points):
        lev = self._level(points)
        return lev < 0 if self.strict else lev <= 0

    def distance(self, points):
        if self.strict:
            raise NotImplementedError("distance is only used for closed regions")
        return np.maximum(self._level(points), 0.0) / np.linalg.norm(self.normal)

    def boundary(self, points, tol=BOUNDARY_TOL):
        return np.abs(self._level(points)) <= tol * np.linalg.norm(self.normal)

    def __invert__(self):
        return HalfSpace(-self.normal, -self.offset, strict=not self.strict)

    def __repr__(self):
        op = "<" if self.strict else "<="
        return f"HalfSpace({self.normal.tolist()} . x {op} {self.offset})"


class Union(Region):
    def __init__(self, *parts: Region):
        self.parts = parts
        self.is_closed = all(p.is_closed for p in parts)

    def contains(self, points):
        pts = as_points(points)
        out = np.zeros(len(pts), dtype=bool)
        for p in self.parts:
            out |= p.contains(pts)
        return out

    def distance(self, points):
        pts = as_points(points)
        out = np.full(len(pts), np.inf)
        for p in self.parts:
            out = np.minimum(out, p.distance(pts))
        return out

    def boundary(self, points, tol=BOUNDARY_TOL):
        pts = as_points(points)
        out = np.zeros(len(pts), dtype=bool)
        for p in self.parts:
            out |= p.boundary(pts, tol)
        return out

    def __repr__(self):
        return "Union(" + ", ".join(map(repr, self.parts)) + ")"


class Intersection(Region):
    def __init__(self, *parts: Region):
        self.parts = parts
        self.is_closed = all(p.is_closed for p in parts)

    def contains(self, points):
        pts = as_points(points)
        out = np.ones(len(pts), dtype=bool)
        for p in self.parts:
            out &= p.contains(pts)
        return out

    def boundary(self, points, tol=BOUNDARY_TOL):
        pts = as_points(points)
        edge = np.zeros(len(pts), dtype=bool)
        closure = np.ones(len(pts), dtype=bool)
        for p in self.parts:
            b = p.boundary(pts, tol)
            edge |= b
            closure &= p.contains(pts) | b
        return edge & closure

    def __repr__(self):
        return "Intersection(" + ", ".join(map(repr, self.parts)) + ")"


class Complement(Region):
    def __init__(self, part: Region):
        self.part = part

    def contains(self, points):
        return ~self.part.contains(points)

    def boundary(self, points, tol=BOUNDARY_TOL):
        return self.part.boundary(points, tol)

    def __invert__(self):
        return self.part

    def __repr__(self):
        return f"Complement({self.part!r})"


class Dilation(Region):
    """Closed dilation ``{x : d(x, base) <= delta}`` of a region with a distance."""

    is_closed = True

    def __init__(self, base: Region, delta: float):
        if delta < 0:
            raise InvalidInputError("dilation radius must be nonnegative")
        self.base = base
        self.delta = float(delta)

    def contains(self, points):
        return self.base.distance(points) <= self.delta

    def distance(self, points):
        return np.maximum(self.base.distance(points) - self.delta, 0.0)

    def boundary(self, points, tol=BOUNDARY_TOL):
        if self.delta == 0.0:
            return self.base.boundary(points, tol)
        return np.abs(self.base.distance(points) - self.delta) <= tol

    def __repr__(self):
        return f"Dilation({self.base!r}, {self.delta:.6g})"


def interval(lo: float = -np.inf, hi: float = np.inf, *, closed_lo: bool = True,
             closed_hi: bool = True) -> Region:
    """One-dimensional interval with chosen endpoint closedness."""
    parts = []
    if np.isfinite(lo):
        parts.append(HalfSpace([-1.0], -lo, strict=not closed_lo))
    if np.isfinite(hi):
        parts.append(HalfSpace([1.0], hi, strict=not closed_hi))
    if not parts:
        return Whole()
    if len(parts) == 1:
        return parts[0]
    if closed_lo and closed_hi:
        return Box([lo], [hi])
    return Intersection(*parts)


def as_mask(region, points) -> np.ndarray:
    """Membership mask for a :class:`Region` or an explicit boolean mask."""
    pts = as_points(points)
    if isinstance(region, Region):
        return region.contains(pts)
    mask = np.asarray(region, dtype=bool)
    if mask.shape != (len(pts),):
        raise InvalidInputError(
            f"mask has shape {mask.shape}, expected ({len(pts)},)")
    return mask


@dataclass(frozen=True, eq=False)
class DiscreteScalarMeasure:
    """Nonnegative weights on finitely many points of R^d."""

    points: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = as_points(self.points)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(w) != len(pts):
            raise InvalidInputError("one weight per support point is required")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidInputError("weights must be finite and nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def mass(self, region) -> float:
        return float(self.weights[as_mask(region, self.points)].sum())

    def boundary_mass(self, region: Region, tol: float = BOUNDARY_TOL) -> float:
        return float(self.weights[region.boundary(self.points, tol)].sum())

    def support_in(self, region) -> PointSet:
        """The charged atoms lying in ``region``, as a closed point set."""
        mask = as_mask(region, self.points) & (self.weights > 0)
        return PointSet(self.points[mask])


def symmetric_difference_norm(weights: np.ndarray, mask_a: np.ndarray,
                              mask_b: np.ndarray) -> float:
    """``||G(A)Psi - G(B)Psi||`` from the scalar measure ``G_Psi`` alone.

    ``G(A) - G(B) = G(A \\ B) - G(B \\ A)`` with orthogonal ranges, so the
    squared norm is ``G_Psi`` of the symmetric difference.
    """
    return float(np.sqrt(weights[mask_a ^ mask_b].sum()))


def cover_check(masks: Sequence[np.ndarray]) -> tuple[bool, bool]:
    """(pairwise disjoint, covering) for a family of masks over the same points."""
    counts = np.sum(np.asarray(masks, dtype=int), axis=0)
    return bool(np.all(counts <= 1)), bool(np.all(counts >= 1))
