"""Random instances for the property suite and the tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomposition import Decomposition
from .finite import AtomicSpectralMeasure, MatrixPropagator, StateVector
from .spaces import DiscreteScalarMeasure, HalfSpace, Intersection, interval
from .tree import SpatialTree, TreeNode
from .decomposition import CoarseningMap


def random_unitary(rng, dim: int) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, dim: int, scale: float = 1.0) -> np.ndarray:
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (z + z.conj().T) / 2


def random_vector(rng, dim: int) -> np.ndarray:
    return rng.normal(size=dim) + 1j * rng.normal(size=dim)


def random_measure(rng, dim: int, n_charged: int | None = None, n_null: int = 0,
                   point_dim: int = 1, unitary=None) -> AtomicSpectralMeasure:
    """Atoms spanned by random groups of columns of a random unitary, plus null atoms."""
    n_charged = n_charged or int(rng.integers(2, dim + 1))
    U = random_unitary(rng, dim) if unitary is None else unitary
    cuts = np.sort(rng.choice(np.arange(1, dim), size=n_charged - 1, replace=False))
    groups = np.split(rng.permutation(dim), cuts)
    projs = [U[:, g] @ U[:, g].conj().T for g in groups]
    projs += [np.zeros((dim, dim), dtype=complex)] * n_null
    order = rng.permutation(len(projs))
    points = rng.permutation(len(projs) * 4)[:len(projs)].astype(float)
    if point_dim > 1:
        points = np.column_stack([points] + [rng.normal(size=len(projs))
                                             for _ in range(point_dim - 1)])
    return AtomicSpectralMeasure(points, [projs[i] for i in order])


def exact_decomposition(rng, G: AtomicSpectralMeasure, psi: np.ndarray, n: int):
    """``{G(Delta_i) psi}`` for a random labelling whose parts all carry weight.

    Returns ``(D, labels)`` or ``None`` when ``psi`` has too few charged atoms.
    """
    charged = [k for k in range(G.n_atoms) if np.linalg.norm(G.projectors[k] @ psi) > 1e-6]
    if len(charged) < n:
        return None
    labels = rng.integers(0, n, size=G.n_atoms)
    chosen = rng.permutation(charged)[:n]
    labels[chosen] = np.arange(n)
    parts = [G.projector(labels == i) @ psi for i in range(n)]
    return Decomposition([StateVector(p) for p in parts]), labels


def zero_sum_noise(rng, n: int, dim: int, size: float) -> np.ndarray:
    z = rng.normal(size=(n, dim)) + 1j * rng.normal(size=(n, dim))
    z -= z.mean(axis=0)
    return size * z / np.linalg.norm(z)


@dataclass
class FiniteInstance:
    G: AtomicSpectralMeasure
    D: Decomposition
    kind: str
    H: np.ndarray


def random_finite_instance(rng, max_dim: int = 6, max_atoms: int = 14) -> FiniteInstance:
    """A measure, a decomposition (exact, perturbed-exact or generic) and a commuting H."""
    while True:
        dim = int(rng.integers(2, max_dim + 1))
        n_charged = int(rng.integers(2, dim + 1))
        n_null = int(rng.integers(0, min(3, max_atoms - n_charged) + 1))
        G = random_measure(rng, dim, n_charged, n_null)
        psi = random_vector(rng, dim)
        n = int(rng.integers(2, min(4, n_charged) + 1))
        kind = rng.choice(["exact", "perturbed", "generic"], p=[0.35, 0.35, 0.3])
        try:
            if kind == "generic":
                D = Decomposition([StateVector(v) for v in
                                   np.vstack([random_vector(rng, dim) for _ in range(n)])])
            else:
                made = exact_decomposition(rng, G, psi, n)
                if made is None:
                    continue
                D, _ = made
                if kind == "perturbed":
                    size = 10 ** rng.uniform(-5, 0) * np.linalg.norm(psi)
                    D = Decomposition([StateVector(v) for v in
                                       D.matrix + zero_sum_noise(rng, n, dim, size)])
        except ValueError:
            continue
        energies = rng.normal(size=G.n_atoms)
        H = sum(e * P for e, P in zip(energies, G.projectors))
        return FiniteInstance(G, D, str(kind), H)


def random_grouping(rng, n: int, n_coarse: int) -> CoarseningMap:
    g = np.concatenate([np.arange(n_coarse), rng.integers(0, n_coarse, size=n - n_coarse)])
    return CoarseningMap(tuple(rng.permutation(g)), n_coarse)


def _split(rng, v: np.ndarray, parts: int) -> list:
    if parts == 1:
        return [v]
    pieces = [random_vector(rng, v.size) * np.linalg.norm(v) / np.sqrt(v.size)
              for _ in range(parts - 1)]
    return pieces + [v - sum(pieces)]


def random_tree(rng, dim: int = 8, max_depth: int = 3, max_leaves: int = 8,
                orthogonal: bool | None = None) -> SpatialTree:
    """Random refinement tree over a finite system with a random Hamiltonian.

    Orthogonal trees are built from their leaves backwards (leaves are
    projections onto disjoint coordinate groups at the final time); generic
    trees split elements forwards into random independent pieces.
    """
    if orthogonal is None:
        orthogonal = bool(rng.integers(0, 2))
    prop = MatrixPropagator(random_hermitian(rng, dim))
    depth = int(rng.integers(1, max_depth + 1))
    times = np.cumsum(rng.uniform(0.1, 1.5, size=depth)) - rng.uniform(0, 0.1)
    times[0] = max(times[0], 0.0)
    leaves = int(rng.integers(2, max_leaves + 1))
    sizes = sorted(int(k) for k in rng.integers(1, leaves + 1, size=depth - 1)) + [leaves]
    sizes = [1] + sizes

    if orthogonal:
        return _orthogonal_tree(rng, prop, dim, times, sizes[1:])
    root = random_vector(rng, dim)
    nodes = []
    prev = [prop.matrix(times[0]) @ root]
    for i, t in enumerate(times):
        if i:
            U = prop.matrix(t - times[i - 1])
            prev = [U @ v for v in prev]
        counts = _allocate(rng, len(prev), sizes[i + 1])
        elems, grouping = [], []
        for j, (v, c) in enumerate(zip(prev, counts)):
            pieces = _split(rng, v, c)
            elems += pieces
            grouping += [j] * c
        D = Decomposition([StateVector(e) for e in elems])
        nodes.append(TreeNode(float(t), D, CoarseningMap(tuple(grouping), len(prev))))
        prev = elems
    return SpatialTree(StateVector(root), nodes, prop)


def _allocate(rng, n_parents: int, n_children: int) -> list:
    counts = np.ones(n_parents, dtype=int)
    for _ in range(max(0, n_children - n_parents)):
        counts[rng.integers(0, n_parents)] += 1
    return list(counts)


def _orthogonal_tree(rng, prop, dim, times, sizes) -> SpatialTree:
    n_leaves = int(sizes[-1])
    final = random_vector(rng, dim)
    Q = random_unitary(rng, dim)
    cuts = np.sort(rng.choice(np.arange(1, dim), size=n_leaves - 1, replace=False))
    groups = np.split(np.arange(dim), cuts)
    level = [Q[:, g] @ (Q[:, g].conj().T @ final) for g in groups]
    levels, groupings = [level], []
    for s in reversed(sizes[:-1]):
        perm = rng.permutation(len(level))
        counts = _allocate(rng, int(s), len(level))
        parent_of = np.repeat(np.arange(int(s)), counts)[np.argsort(perm)]
        level = [sum(level[k] for k in range(len(level)) if parent_of[k] == p)
                 for p in range(int(s))]
        levels.append(level)
        groupings.append(tuple(parent_of))
    levels.reverse()
    groupings.reverse()
    nodes = []
    t_last = times[-1]
    for i, t in enumerate(times):
        U = prop.matrix(t - t_last)
        D = Decomposition([StateVector(U @ v) for v in levels[i]])
        lineage = CoarseningMap((0,) * len(D), 1) if i == 0 else \
            CoarseningMap(groupings[i - 1], len(levels[i - 1]))
        nodes.append(TreeNode(float(t), D, lineage))
    root = StateVector(prop.matrix(-t_last) @ final)
    return SpatialTree(root, nodes, prop)


@dataclass
class PartitionInstance:
    measure: DiscreteScalarMeasure
    regions: list
    eps: float


def random_partition_instance(rng, max_parts: int = 6, n_atoms: int = 64) -> PartitionInstance:
    """Scalar measure with atoms on region boundaries and a partition into up to 6 parts.

    One-dimensional instances cut the line at atom positions with random
    endpoint closedness; two-dimensional ones peel off half-planes.
    """
    n = int(rng.integers(2, max_parts + 1))
    eps = float(10 ** rng.uniform(-3, -0.5))
    if rng.random() < 0.5:
        pts = np.sort(rng.uniform(-1, 1, size=n_atoms))
        w = rng.random(n_atoms) * 10.0 ** rng.integers(-8, 0, size=n_atoms)
        cuts = np.sort(rng.choice(pts[1:-1], size=n - 1, replace=False))
        regions, lo, closed_lo = [], -np.inf, True
        for c in cuts:
            closed = bool(rng.integers(0, 2))
            regions.append(interval(lo, c, closed_lo=closed_lo, closed_hi=closed))
            lo, closed_lo = c, not closed
        regions.append(interval(lo, np.inf, closed_lo=closed_lo))
        return PartitionInstance(DiscreteScalarMeasure(pts, w), regions, eps)
    pts = rng.uniform(-1, 1, size=(n_atoms, 2))
    w = rng.random(n_atoms) * 10.0 ** rng.integers(-8, 0, size=n_atoms)
    regions, rest = [], []
    for _ in range(n - 1):
        theta = rng.uniform(0, 2 * np.pi)
        normal = np.array([np.cos(theta), np.sin(theta)])
        anchor = pts[rng.integers(0, n_atoms)]
        half = HalfSpace(normal, float(normal @ anchor), strict=bool(rng.integers(0, 2)))
        regions.append(Intersection(half, *[~r for r in rest]) if rest else half)
        rest.append(half)
    regions.append(Intersection(*[~r for r in rest]))
    return PartitionInstance(DiscreteScalarMeasure(pts, w), regions, eps)
