"""The inf-over-partitions in w_G, reduced to labellings of measure atoms.

Every spectral measure used in this package is atomic: a finite family of
orthogonal projections (grid cells, momentum modes, finite-dimensional
eigenspaces).  A partition of the outcome space into ``n`` parts is then a
labelling of atoms, and all quantities in the objective are sums of the
per-atom masses ``||P_k Psi_S||**2`` over subset-sums ``Psi_S``.  This module
builds that mass table and runs the exact and heuristic searches over it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import InvalidInputError, ResourceLimitError

MAX_EXACT_ATOMS = 14
METHODS = ("exact-two", "heuristic", "brute-force", "trivial")


def subset_matrix(n: int) -> np.ndarray:
    """``(2**n, n)`` 0/1 matrix; row ``S`` selects the elements in bitmask ``S``."""
    return ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(float)


def subset_masses(measure, data: np.ndarray) -> np.ndarray:
    """Mass table ``(K, 2**n)`` of all subset-sums of the rows of ``data``."""
    data = np.asarray(data)
    coeffs = measure.coefficients(data)
    sq = np.abs(subset_matrix(len(data)) @ coeffs) ** 2
    return np.ascontiguousarray(measure.reduce_atoms(sq).T)


def run_length(labels) -> list[list[int]]:
    labels = np.asarray(labels)
    if labels.size == 0:
        return []
    edges = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], edges])
    lengths = np.diff(np.concatenate([starts, [labels.size]]))
    return [[int(labels[s]), int(c)] for s, c in zip(starts, lengths)]


def run_length_decode(runs) -> np.ndarray:
    return np.concatenate([np.full(c, lab, dtype=np.int64) for lab, c in runs]) \
        if runs else np.zeros(0, dtype=np.int64)


@dataclass
class WReport:
    """Value of w_G together with how it was obtained.

    ``witness`` labels every atom with the element index whose region
    contains it; for the heuristic it is the best partition found, so
    ``value`` is an upper bound on the infimum.
    """

    value: float
    method: str
    certified: bool
    witness: np.ndarray = field(repr=False)
    worst_subset: Optional[int] = None
    achieving_time: Optional[float] = None
    notes: tuple = ()

    def to_dict(self) -> dict:
        out = {
            "value": float(self.value),
            "method": self.method,
            "certified": bool(self.certified),
            "witness": run_length(self.witness),
        }
        if self.achieving_time is not None:
            out["achieving_time"] = float(self.achieving_time)
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _check(masses: np.ndarray, n: int) -> None:
    if n < 2:
        raise InvalidInputError("w_G needs a decomposition with at least two elements")
    den = masses.sum(axis=0)
    scale = den.max() if den.size else 0.0
    if scale <= 0 or np.any(den[1:(1 << n) - 1] <= 1e-30 * scale):
        raise InvalidInputError(
            "some partial sum Psi_I vanishes; the elements are linearly dependent")


def evaluate(masses: np.ndarray, labels, n: int) -> tuple[float, int]:
    """Objective value (not squared) and worst subset for a given labelling."""
    val2, worst = kernels.objective(masses, np.asarray(labels, dtype=np.int64), n)
    return float(np.sqrt(max(val2, 0.0))), int(worst)


def hahn_two(masses: np.ndarray) -> WReport:
    """Exact two-element value via the Hahn set of ``mu_1 - mu_2``.

    Atoms where the first element's mass is at least the second's go to the
    first element (ties included); the value is tie-invariant.
    """
    _check(masses, 2)
    mu1, mu2 = masses[:, 1], masses[:, 2]
    labels = np.where(mu1 >= mu2, 0, 1).astype(np.int64)
    overlap = np.minimum(mu1, mu2).sum()
    value = float(np.sqrt(overlap / min(mu1.sum(), mu2.sum())))
    return WReport(value, "exact-two", True, labels, worst_subset=1)


def heuristic(masses: np.ndarray, n: int) -> WReport:
    """Argmax-density assignment followed by one local-improvement sweep."""
    _check(masses, n)
    singles = masses[:, 1 << np.arange(n)]
    labels = np.argmax(singles, axis=1).astype(np.int64)
    val2, labels = kernels.local_improve(masses, labels, n)
    value, worst = evaluate(masses, labels, n)
    return WReport(value, "heuristic", False, np.asarray(labels), worst_subset=worst)


def brute_force(masses: np.ndarray, n: int, max_atoms: int = MAX_EXACT_ATOMS) -> WReport:
    """Exact infimum by exhaustive (branch-and-bound) search over labellings.

    Atoms carrying no mass for any subset cannot change the objective and
    are labelled 0 without being enumerated.
    """
    _check(masses, n)
    charged = np.flatnonzero(masses.max(axis=1) > 0)
    if len(charged) > max_atoms:
        raise ResourceLimitError(
            f"{len(charged)} charged atoms exceed the enumeration bound {max_atoms}")
    sub = masses[charged]
    order = np.argsort(-sub.sum(axis=1), kind="stable")
    sub = np.ascontiguousarray(sub[order])
    start = heuristic(sub, n).witness
    _, found, _ = kernels.brute_force(sub, n, start)
    labels = np.zeros(len(masses), dtype=np.int64)
    labels[charged[order]] = found
    value, worst = evaluate(masses, labels, n)
    return WReport(value, "brute-force", True, labels, worst_subset=worst)


def minimise(masses: np.ndarray, n: int, exact: bool = False,
             max_atoms: int = MAX_EXACT_ATOMS) -> WReport:
    """Dispatch: Hahn formula for two elements, else brute force or heuristic."""
    if n == 2:
        return hahn_two(masses)
    if exact:
        return brute_force(masses, n, max_atoms)
    return heuristic(masses, n)
