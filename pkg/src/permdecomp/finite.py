"""Exact finite-dimensional backend.

State vectors in C^dim, spectral measures with finitely many atoms, and the
exhaustive oracles (brute-force w_G, exact-partition search) that the
decomposition properties are checked against.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import partition
from .errors import InvalidInputError
from .partition import WReport
from .spaces import DiscreteScalarMeasure, Region, as_mask, as_points

ALGEBRA_TOL = 1e-10
IDENTITY_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitude vector over a finite outcome basis."""

    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size < 1:
            raise InvalidInputError("a state vector needs at least one amplitude")
        if not np.all(np.isfinite(amp)):
            raise InvalidInputError("amplitudes must be finite")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def data(self) -> np.ndarray:
        return self.amplitudes

    weight = 1.0

    def with_data(self, data) -> "StateVector":
        return StateVector(data)

    def norm2(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def inner(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __add__(self, other):
        return StateVector(self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        return StateVector(self.amplitudes - other.amplitudes)

    def __mul__(self, scalar):
        return StateVector(self.amplitudes * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"StateVector(dim={self.dim}, norm={self.norm():.6g})"


class AtomicSpectralMeasure:
    """Projection-valued measure concentrated on finitely many points.

    Parameters
    ----------
    points : array_like, shape (K,) or (K, d)
        Pairwise distinct atom locations in R^d.
    projectors : array_like, shape (K, dim, dim)
        Orthogonal projections, pairwise orthogonal, summing to the identity.
        Zero projectors are allowed (atoms of measure zero).
    """

    def __init__(self, points, projectors, tol: float = ALGEBRA_TOL):
        self.points = as_points(points)
        proj = np.array(projectors, dtype=complex)
        if proj.ndim != 3 or proj.shape[1] != proj.shape[2]:
            raise InvalidInputError("projectors must have shape (K, dim, dim)")
        if len(proj) != len(self.points):
            raise InvalidInputError("one projector per atom point is required")
        self.projectors = proj
        self.tol = tol
        self._validate()
        bases, owner = [], []
        for k, p in enumerate(proj):
            vals, vecs = np.linalg.eigh(p)
            keep = vals > 0.5
            bases.append(vecs[:, keep])
            owner.extend([k] * int(keep.sum()))
        self._basis = np.hstack(bases)
        self._owner = np.asarray(owner, dtype=np.int64)
        self._indicator = np.zeros((self.n_atoms, len(owner)))
        self._indicator[self._owner, np.arange(len(owner))] = 1.0

    def _validate(self):
        P, tol = self.projectors, self.tol
        eye = np.eye(self.dim)
        for k, p in enumerate(P):
            if np.abs(p @ p - p).max() > tol or np.abs(p - p.conj().T).max() > tol:
                raise InvalidInputError(f"atom {k} is not an orthogonal projection")
        for i in range(len(P)):
            for j in range(i + 1, len(P)):
                if np.abs(P[i] @ P[j]).max() > tol:
                    raise InvalidInputError(f"atoms {i} and {j} are not orthogonal")
        if np.abs(P.sum(axis=0) - eye).max() > tol:
            raise InvalidInputError("projectors do not sum to the identity")
        diff = self.points[:, None, :] - self.points[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1)) + np.eye(len(P))
        if np.any(dist == 0):
            raise InvalidInputError("atom points must be pairwise distinct")

    @classmethod
    def from_basis(cls, points, unitary, groups: Sequence[Sequence[int]], **kw):
        """Atoms spanned by groups of columns of a unitary matrix."""
        U = np.asarray(unitary, dtype=complex)
        projs = []
        for cols in groups:
            Q = U[:, list(cols)]
            projs.append(Q @ Q.conj().T)
        return cls(points, projs, **kw)

    @property
    def dim(self) -> int:
        return self.projectors.shape[1]

    @property
    def n_atoms(self) -> int:
        return len(self.projectors)

    # backend protocol used by permdecomp.partition
    def coefficients(self, data: np.ndarray) -> np.ndarray:
        return np.atleast_2d(data) @ self._basis.conj()

    def reduce_atoms(self, sq: np.ndarray) -> np.ndarray:
        return sq @ self._indicator.T

    def projector(self, region) -> np.ndarray:
        mask = as_mask(region, self.points)
        return self.projectors[mask].sum(axis=0) if mask.any() else np.zeros((self.dim,) * 2)

    def project(self, state: StateVector, atom_mask) -> StateVector:
        return state.with_data(self.projector(atom_mask) @ state.data)

    def __repr__(self):
        return f"AtomicSpectralMeasure(dim={self.dim}, atoms={self.n_atoms})"


def _check_dim(G: AtomicSpectralMeasure, psi: StateVector):
    if psi.dim != G.dim:
        raise InvalidInputError(f"state has dim {psi.dim}, measure acts on dim {G.dim}")


def apply_measure(G: AtomicSpectralMeasure, region, psi: StateVector) -> StateVector:
    """``G(region) psi``; ``region`` is a :class:`Region` or an atom mask."""
    _check_dim(G, psi)
    return G.project(psi, as_mask(region, G.points))


def measure_scalar(G: AtomicSpectralMeasure, psi: StateVector) -> DiscreteScalarMeasure:
    """The scalar measure ``<psi|G(.)|psi>`` as weights on the atom points."""
    _check_dim(G, psi)
    weights = G.reduce_atoms(np.abs(G.coefficients(psi.data)) ** 2)[0]
    return DiscreteScalarMeasure(G.points, weights)


def _polarization_family(dim: int):
    eye = np.eye(dim, dtype=complex)
    for i in range(dim):
        yield eye[i]
        for j in range(i + 1, dim):
            yield eye[i] + eye[j]
            yield eye[i] + 1j * eye[j]


def polarization_equal(G: AtomicSpectralMeasure, H: AtomicSpectralMeasure,
                       trials: int = 16, rng=None, tol: float = IDENTITY_TOL) -> bool:
    """Decide ``G == H`` by comparing the scalar measures ``G_psi`` and ``H_psi``.

    ``psi`` runs over the basis-spanning family ``e_i, e_i + e_j, e_i + i e_j``
    (which determines every matrix element by polarization) and ``trials``
    random vectors.  Atoms are matched by location, so listing order is
    irrelevant.
    """
    if G.dim != H.dim:
        raise InvalidInputError("measures act on spaces of different dimension")
    rng = np.random.default_rng(rng)
    merged = list(map(tuple, G.points))
    index = {p: i for i, p in enumerate(merged)}
    h_slots = []
    for p in map(tuple, H.points):
        if p not in index:
            index[p] = len(merged)
            merged.append(p)
        h_slots.append(index[p])
    g_slots = np.arange(G.n_atoms)
    h_slots = np.asarray(h_slots)

    vectors = list(_polarization_family(G.dim))
    vectors += list(rng.normal(size=(trials, G.dim)) + 1j * rng.normal(size=(trials, G.dim)))
    for v in vectors:
        psi = StateVector(v)
        mg = np.zeros(len(merged))
        mh = np.zeros(len(merged))
        np.add.at(mg, g_slots, measure_scalar(G, psi).weights)
        np.add.at(mh, h_slots, measure_scalar(H, psi).weights)
        if np.abs(mg - mh).max() > tol * max(1.0, psi.norm2()):
            return False
    return True


def _element_data(D) -> np.ndarray:
    if hasattr(D, "matrix"):
        return D.matrix
    return np.stack([np.asarray(getattr(e, "data", e), dtype=complex) for e in D])


def brute_force_w(G: AtomicSpectralMeasure, D, max_atoms: int = partition.MAX_EXACT_ATOMS
                  ) -> WReport:
    """Ground-truth w_G by exhaustive search over atom labellings.

    ``D`` is a :class:`~permdecomp.decomposition.Decomposition` or a sequence
    of state vectors.  Raises :class:`ResourceLimitError` beyond ``max_atoms``
    charged atoms and :class:`InvalidInputError` when some partial sum vanishes.
    """
    data = _element_data(D)
    if data.shape[1] != G.dim:
        raise InvalidInputError("decomposition and measure dimensions differ")
    masses = partition.subset_masses(G, data)
    return partition.brute_force(masses, len(data), max_atoms)


def exact_partition(G: AtomicSpectralMeasure, D, tol: float = 1e-9):
    """Look for atom labels with ``Psi_i = G(Delta_i) Psi`` for every element.

    Works on vectors directly, independently of the mass-table search: an
    exact decomposition leaves at most one element with a nonzero component
    in each atom, so each atom is labelled by its dominant component and the
    resulting partition is checked.  Returns ``labels`` or ``None``.
    """
    data = _element_data(D)
    total = data.sum(axis=0)
    comps = np.stack([[G.projectors[k] @ v for v in data] for k in range(G.n_atoms)])
    labels = np.argmax(np.linalg.norm(comps, axis=2), axis=1)
    for i, v in enumerate(data):
        target = G.projectors[labels == i].sum(axis=0) @ total if np.any(labels == i) \
            else np.zeros_like(total)
        if np.linalg.norm(v - target) > tol * np.linalg.norm(v):
            return None
    return labels


def exact_partition_enumerated(G: AtomicSpectralMeasure, D, tol: float = 1e-9):
    """Same question as :func:`exact_partition`, by trying every labelling."""
    import itertools

    data = _element_data(D)
    total = data.sum(axis=0)
    n = len(data)
    norms = np.linalg.norm(data, axis=1)
    for labels in itertools.product(range(n), repeat=G.n_atoms):
        labels = np.asarray(labels)
        ok = True
        for i in range(n):
            target = G.projector(labels == i) @ total
            if np.linalg.norm(data[i] - target) > tol * norms[i]:
                ok = False
                break
        if ok:
            return labels
    return None


class MatrixPropagator:
    """``U(t) = exp(-i H t / hbar)`` for a Hermitian matrix ``H``."""

    def __init__(self, hamiltonian, hbar: float = 1.0):
        H = np.asarray(hamiltonian, dtype=complex)
        if np.abs(H - H.conj().T).max() > ALGEBRA_TOL * max(1.0, np.abs(H).max()):
            raise InvalidInputError("Hamiltonian must be Hermitian")
        self.hamiltonian = H
        self.hbar = hbar
        self._energies, self._modes = np.linalg.eigh(H)

    def matrix(self, t: float) -> np.ndarray:
        phase = np.exp(-1j * self._energies * t / self.hbar)
        return (self._modes * phase) @ self._modes.conj().T

    def __call__(self, state: StateVector, t: float) -> StateVector:
        if t == 0:
            return state
        return state.with_data(self.matrix(t) @ state.data)
