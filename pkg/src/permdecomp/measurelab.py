"""Continuity-set surrogates, the constructive partition with its error
certificate, and weak-convergence checks for discrete scalar measures."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, NotFoundError
from .spaces import (Complement, Dilation, DiscreteScalarMeasure, Intersection, PointSet,
                     Region, Union, Whole, as_mask, cover_check, symmetric_difference_norm)

MAX_EXACT_SUBSETS = 12
LEVELS = 64
DISTANCE_TOL = 1e-12


@dataclass(frozen=True)
class Surrogate:
    """A region close to ``base`` in the measure whose boundary carries no mass."""

    region: Region
    level: int
    delta: float
    mass_difference: float
    boundary_mass: float


def _as_region(region, mu: DiscreteScalarMeasure) -> Region:
    if isinstance(region, Region):
        return region
    return PointSet(mu.points[as_mask(region, mu.points)])


def _has_distance(region: Region, points) -> bool:
    if not region.is_closed:
        return False
    try:
        region.distance(points[:1])
    except NotImplementedError:
        return False
    return True


def continuity_surrogate(mu: DiscreteScalarMeasure, region, eps: float,
                         delta_max: float | None = None, levels: int = LEVELS) -> Surrogate:
    """Dilate ``region`` to a set with mass-free boundary, within ``eps**2`` of its mass.

    Closed regions with a distance function are dilated directly.  Otherwise
    the charged atoms of the region (a closed set of the same measure) are
    dilated.  Radii ``delta_max * 2**-k`` landing on an atom's distance are
    skipped, so the chosen level has no mass on its boundary.
    """
    if not eps > 0:
        raise InvalidInputError("eps must be positive")
    region = _as_region(region, mu)
    base_mass = mu.mass(region)
    bmass = mu.boundary_mass(region)
    if bmass == 0 or eps ** 2 >= mu.total:
        return Surrogate(region, 0, 0.0, 0.0, bmass)

    # Dilating the region itself fails when rounding leaves an atom at distance
    # ~0 outside it; its charged support is then the base (same measure).
    bases = [region] if _has_distance(region, mu.points) else []
    bases.append(mu.support_in(region))
    member = as_mask(region, mu.points)
    for base in bases:
        dist = base.distance(mu.points)
        finite = dist[np.isfinite(dist)]
        top = delta_max if delta_max is not None else \
            (float(finite.max()) + 1.0 if finite.size else 1.0)
        for k in range(levels):
            delta = top * 2.0 ** -k
            if np.any(np.abs(dist - delta) <= DISTANCE_TOL * max(1.0, delta)):
                continue
            diff = float(mu.weights[(dist <= delta) ^ member].sum())
            if diff <= eps ** 2:
                dil = Dilation(base, delta)
                return Surrogate(dil, k, delta, diff, mu.boundary_mass(dil))
    raise NotFoundError(f"no dilation level within {levels} halvings brings the mass "
                        f"difference below eps^2 = {eps ** 2:.3g} (base mass {base_mass:.3g})")


@dataclass
class Certificate:
    n: int
    delta: float
    epsilon: float
    max_subset_residual: float
    per_stage_residuals: list
    stage_bounds: list
    subsets_checked: int
    subsets_total: int
    is_partition: bool
    passed: bool = False
    surrogate_levels: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"n": self.n, "delta": self.delta, "epsilon": self.epsilon,
                "max_subset_residual": self.max_subset_residual,
                "per_stage_residuals": list(self.per_stage_residuals),
                "stage_bounds": list(self.stage_bounds),
                "subsets_checked": self.subsets_checked,
                "subsets_total": self.subsets_total,
                "is_partition": self.is_partition, "passed": self.passed}


@dataclass
class PartitionResult:
    regions: list
    masks: np.ndarray
    certificate: Certificate


def continuity_partition(mu: DiscreteScalarMeasure, partition: Sequence, eps: float,
                         rng=None, sampled_subsets: int = 4096) -> PartitionResult:
    """Replace a partition by one made of continuity-set surrogates.

    Each of the first ``n - 1`` parts is swapped for a surrogate within
    ``delta = eps / (2 (n-1)**2)``; the new parts are the successive
    differences and the last part is the remaining complement.  The
    certificate records ``||G(Delta_I) Psi - G(Sigma_I) Psi||`` over subsets
    ``I`` (all of them up to 12 parts, a random sample beyond) and the
    per-part residuals against their stagewise bounds.
    """
    regions = [_as_region(r, mu) for r in partition]
    n = len(regions)
    if n < 1:
        raise InvalidInputError("partition is empty")
    pts, w = mu.points, mu.weights
    base_masks = np.array([r.contains(pts) for r in regions])
    disjoint, covering = cover_check(base_masks)
    if not (disjoint and covering):
        raise InvalidInputError("base regions do not partition the support")

    delta = eps / (2 * (n - 1) ** 2) if n > 1 else 0.0
    surrogates = [continuity_surrogate(mu, r, delta) for r in regions[:-1]]
    sigma, used = [], []
    for s in surrogates:
        sigma.append(Intersection(s.region, Complement(Union(*used))) if used else s.region)
        used.append(s.region)
    sigma.append(Complement(Union(*used)) if used else Whole())
    masks = np.array([r.contains(pts) for r in sigma])
    disjoint, covering = cover_check(masks)

    stage = [symmetric_difference_norm(w, base_masks[i], masks[i]) for i in range(n)]
    bounds = [(2 * i - 1) * delta for i in range(1, n)] + [(n - 1) ** 2 * delta]

    total_subsets = (1 << n) - 1
    if n <= MAX_EXACT_SUBSETS:
        subsets = np.arange(1, 1 << n)
    else:
        rng = np.random.default_rng(rng)
        subsets = np.unique(rng.integers(1, 1 << n, size=sampled_subsets))
    bits = ((subsets[:, None] >> np.arange(n)) & 1).astype(bool)
    resid = [symmetric_difference_norm(w, base_masks[b].any(axis=0), masks[b].any(axis=0))
             for b in bits]
    worst = float(max(resid, default=0.0))
    slack = 1e-12 * max(1.0, np.sqrt(mu.total))
    cert = Certificate(n, delta, eps, worst, stage, bounds, len(subsets), total_subsets,
                       disjoint and covering, surrogate_levels=[s.level for s in surrogates])
    cert.passed = (cert.is_partition and worst <= eps + slack
                   and all(r <= b + slack for r, b in zip(stage, bounds)))
    return PartitionResult(sigma, masks, cert)


@dataclass
class WeakConvergenceResult:
    times: np.ndarray
    residuals: np.ndarray
    sup_residuals: np.ndarray
    converges: bool
    offending_regions: list
    warnings: list = field(default_factory=list)


def weak_convergence_check(family, limit: DiscreteScalarMeasure, regions: Sequence,
                           tol: float, times=None) -> WeakConvergenceResult:
    """Compare ``G_t(region)`` with ``G(region)`` over test regions.

    ``family`` is a sequence of measures or a callable ``t -> measure``
    (then ``times`` is required).  The verdict is positive when every
    region's final residual is within ``tol`` and the supremum over regions
    has not grown from first to last sample.
    """
    if callable(family):
        if times is None:
            raise InvalidInputError("times are required for a callable family")
        measures = [family(t) for t in times]
    else:
        measures = list(family)
        times = np.arange(len(measures)) if times is None else times
    times = np.asarray(times, dtype=float)
    regions = list(regions)
    warnings = [f"test region {j} has limit mass {limit.boundary_mass(r):.3g} on its boundary"
                for j, r in enumerate(regions)
                if isinstance(r, Region) and limit.boundary_mass(r) > 0]
    target = np.array([limit.mass(r) for r in regions])
    residuals = np.array([[abs(m.mass(r) - target[j]) for j, r in enumerate(regions)]
                          for m in measures])
    sup = residuals.max(axis=1) if residuals.size else np.zeros(len(measures))
    offending = [j for j in range(len(regions)) if residuals[-1, j] > tol]
    converges = not offending and sup[-1] <= sup[0] + tol
    return WeakConvergenceResult(times, residuals, sup, converges, offending, warnings)


def position_family(states_at: Callable, times, scale_by_time: bool = True):
    """Scalar position measures of ``states_at(t)``, with points divided by ``t``.

    With ``scale_by_time`` this is the measure ``F_t`` induces on velocity
    space for a grid state.
    """
    out = []
    for t in times:
        psi = states_at(t)
        x = psi.grid.x / t if scale_by_time else psi.grid.x
        out.append(DiscreteScalarMeasure(x, psi.density() * psi.grid.dx))
    return out
