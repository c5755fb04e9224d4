"""Decompositions of a state, their partial order, Born weights and w_G.

A measure backend is any object with ``coefficients``, ``reduce_atoms``,
``points`` and ``project`` (see :mod:`permdecomp.partition`):
:class:`~permdecomp.finite.AtomicSpectralMeasure`,
:class:`~permdecomp.wavegrid.PositionMeasure` and
:class:`~permdecomp.wavegrid.MomentumMeasure`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from . import partition
from .errors import InvalidInputError
from .partition import WReport
from .spaces import as_mask
from .wavegrid import GridWavefunction, MomentumMeasure, PositionMeasure

RANK_TOL = 1e-10
SUM_TOL = 1e-8
ORTHO_TOL = 1e-6


class Decomposition:
    """Linearly independent states summing to a parent state.

    Elements keep their given order for indexing, but two decompositions
    compare as sets (:meth:`same_as`).
    """

    def __init__(self, elements: Sequence, check_rank: bool = True):
        elements = tuple(elements)
        if not elements:
            raise InvalidInputError("a decomposition needs at least one element")
        kind = type(elements[0])
        if any(type(e) is not kind for e in elements):
            raise InvalidInputError("decomposition elements must share one backend")
        shapes = {e.data.shape for e in elements}
        if len(shapes) != 1:
            raise InvalidInputError("decomposition elements differ in dimension")
        if isinstance(elements[0], GridWavefunction):
            if len({(e.grid, e.mass, e.hbar) for e in elements}) != 1:
                raise InvalidInputError("grid states must share grid, mass and hbar")
        self.elements = elements
        self.matrix = np.stack([e.data for e in elements])
        self.matrix.setflags(write=False)
        if check_rank:
            sv = np.linalg.svd(self.matrix, compute_uv=False)
            if sv[0] == 0 or sv[-1] <= RANK_TOL * sv[0]:
                raise InvalidInputError("decomposition elements are linearly dependent")

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    @property
    def weight(self) -> float:
        return self.elements[0].weight

    @property
    def total(self):
        return self.elements[0].with_data(self.matrix.sum(axis=0))

    def subset_sum(self, members):
        idx = list(members)
        return self.elements[0].with_data(self.matrix[idx].sum(axis=0))

    def norms2(self) -> np.ndarray:
        return (np.abs(self.matrix) ** 2).sum(axis=1) * self.weight

    def gram(self) -> np.ndarray:
        return self.matrix.conj() @ self.matrix.T * self.weight

    def max_overlap(self) -> float:
        """Largest normalised ``|<Psi_i|Psi_j>|`` over distinct pairs."""
        if len(self) < 2:
            return 0.0
        g = self.gram()
        d = np.sqrt(np.real(np.diag(g)))
        norm = np.abs(g) / np.outer(d, d)
        np.fill_diagonal(norm, 0.0)
        return float(norm.max())

    def is_orthogonal(self, tol: float = ORTHO_TOL) -> bool:
        return self.max_overlap() <= tol

    def evolve(self, propagator, t: float) -> "Decomposition":
        return Decomposition([propagator(e, t) for e in self.elements], check_rank=False)

    def same_as(self, other: "Decomposition", tol: float = SUM_TOL) -> bool:
        """Equality as unordered sets of vectors."""
        if len(self) != len(other) or self.matrix.shape != other.matrix.shape:
            return False
        unused = list(range(len(other)))
        for row in self.matrix:
            scale = max(np.linalg.norm(row), 1e-300)
            hit = next((j for j in unused
                        if np.linalg.norm(other.matrix[j] - row) <= tol * scale), None)
            if hit is None:
                return False
            unused.remove(hit)
        return True

    def __repr__(self):
        return f"Decomposition(n={len(self)}, kind={type(self.elements[0]).__name__})"


def from_masks(measure, psi, masks) -> Decomposition:
    """Exact decomposition ``{G(mask_i) psi}`` of ``psi``."""
    return Decomposition([measure.project(psi, as_mask(m, measure.points)) for m in masks])


@dataclass(frozen=True)
class CoarseningMap:
    """Surjection from fine element indices to coarse element indices."""

    grouping: tuple
    n_coarse: int

    def __post_init__(self):
        g = tuple(int(i) for i in self.grouping)
        object.__setattr__(self, "grouping", g)
        if sorted(set(g)) != list(range(self.n_coarse)):
            raise InvalidInputError("coarsening map must be onto 0..n_coarse-1")

    def groups(self) -> list[list[int]]:
        out = [[] for _ in range(self.n_coarse)]
        for fine, coarse in enumerate(self.grouping):
            out[coarse].append(fine)
        return out

    def apply(self, D: Decomposition) -> Decomposition:
        if len(D) != len(self.grouping):
            raise InvalidInputError("map and decomposition sizes differ")
        return Decomposition([D.subset_sum(g) for g in self.groups()])


def is_finer(D: Decomposition, coarse: Decomposition, tol: float = SUM_TOL
             ) -> Optional[CoarseningMap]:
    """The unique map witnessing ``D`` finer than ``coarse``, or ``None``.

    Each coarse element is expanded in the (independent) fine elements by
    least squares; the expansion must have 0/1 coefficients, every fine
    element must be used exactly once, and the rounded expansion must
    reproduce the coarse element within ``tol`` relative.
    """
    if D.matrix.shape[1:] != coarse.matrix.shape[1:]:
        return None
    A = D.matrix.T
    coeffs, *_ = np.linalg.lstsq(A, coarse.matrix.T, rcond=None)
    picks = np.rint(coeffs.real).astype(int)
    if np.any((picks != 0) & (picks != 1)) or np.any(picks.sum(axis=1) != 1):
        return None
    recon = picks.T.astype(complex) @ D.matrix
    for j, row in enumerate(coarse.matrix):
        if np.linalg.norm(recon[j] - row) > tol * max(np.linalg.norm(row), 1e-300):
            return None
    return CoarseningMap(tuple(np.argmax(picks, axis=1)), len(coarse))


@dataclass(frozen=True)
class BornMeasure:
    probabilities: np.ndarray
    orthogonal: bool
    max_overlap: float


def born_measure(D: Decomposition, tol: float = ORTHO_TOL) -> BornMeasure:
    """``||Psi_i||^2 / ||sum D||^2``; ``orthogonal`` flags whether that is a true distribution."""
    total = D.total.norm2()
    if total <= 0:
        raise InvalidInputError("parent state has zero norm")
    overlap = D.max_overlap()
    return BornMeasure(D.norms2() / total, overlap <= tol, overlap)


def _measure_for(psi1, representation: str):
    if representation == "position":
        return PositionMeasure(psi1.grid)
    if representation == "momentum":
        return MomentumMeasure(psi1.grid, psi1.hbar, psi1.mass)
    raise InvalidInputError(f"unknown representation {representation!r}")


def w_two_spatial(psi1, psi2, representation: str = "position") -> WReport:
    """Exact w for two grid states from the overlap of their densities.

    The witness is the Hahn mask: 0 where the first density is at least the
    second.
    """
    if psi1.norm2() <= 0 or psi2.norm2() <= 0:
        raise InvalidInputError("both states must be nonzero")
    measure = _measure_for(psi1, representation)
    return partition.hahn_two(partition.subset_masses(measure, np.stack([psi1.data, psi2.data])))


def w_two_from_log_densities(log_d1, log_d2, cell) -> tuple[float, float]:
    """Two-element w from log densities on a quadrature grid: ``(value, log value)``.

    ``cell`` is a uniform spacing or an array of per-point quadrature
    weights.  Stays finite when the overlap integral underflows double
    precision.
    """
    log_d1, log_d2 = np.asarray(log_d1, float), np.asarray(log_d2, float)
    log_cell = np.log(np.broadcast_to(np.asarray(cell, dtype=float), log_d1.shape))
    log_overlap = logsumexp(np.minimum(log_d1, log_d2) + log_cell)
    log_norm2 = min(logsumexp(log_d1 + log_cell), logsumexp(log_d2 + log_cell))
    log_w = 0.5 * (log_overlap - log_norm2)
    return math.exp(log_w), log_w


def w_general(measure, D: Decomposition, exact: bool = False,
              max_atoms: int = partition.MAX_EXACT_ATOMS) -> WReport:
    """w_G of ``D``: Hahn for two elements, heuristic bound or exact search beyond."""
    if len(D) < 2:
        raise InvalidInputError("w_G needs at least two elements")
    masses = partition.subset_masses(measure, D.matrix)
    return partition.minimise(masses, len(D), exact=exact, max_atoms=max_atoms)


def _check_times(time_grid) -> np.ndarray:
    times = np.asarray(time_grid, dtype=float).reshape(-1)
    if times.size == 0:
        raise InvalidInputError("time grid is empty")
    if times[0] != 0 or np.any(np.diff(times) < 0):
        raise InvalidInputError("time grid must start at 0 and be nondecreasing")
    return times


def evolve_along(D: Decomposition, propagator, times):
    """Yield ``(t, U(t) D)`` for increasing ``times``, stepping incrementally."""
    current, prev = D, 0.0
    for t in times:
        if t != prev:
            current = current.evolve(propagator, t - prev)
            prev = t
        yield t, current


def w_curve(measure, D: Decomposition, propagator, time_grid, exact: bool = False
            ) -> list[WReport]:
    return [w_general(measure, Dt, exact=exact)
            for _, Dt in evolve_along(D, propagator, time_grid)]


def w_plus(measure, D: Decomposition, propagator, time_grid, exact: bool = False
           ) -> WReport:
    """Largest w over the sampled times (a lower bound on the true supremum)."""
    times = _check_times(time_grid)
    reports = w_curve(measure, D, propagator, times, exact=exact)
    best = int(np.argmax([r.value for r in reports]))
    rep = reports[best]
    rep.achieving_time = float(times[best])
    rep.certified = all(r.certified for r in reports)
    rep.notes = (f"supremum sampled at {len(times)} times up to t={times[-1]:.6g}; "
                 "the true supremum may be larger",)
    return rep
