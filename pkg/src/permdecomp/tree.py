"""Trees of successively finer decompositions and their branches."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .decomposition import (CoarseningMap, Decomposition, ORTHO_TOL, SUM_TOL,
                            born_measure, is_finer, w_general)
from .errors import InvalidInputError
from .partition import WReport


@dataclass(frozen=True)
class TreeNode:
    """Decomposition at time ``t``.

    ``lineage`` maps each element index to the index of the element of the
    previous node, evolved to ``t``, that contains it (for the first node,
    the evolved root, index 0).
    """

    t: float
    decomposition: Decomposition
    lineage: Optional[CoarseningMap] = None


@dataclass(frozen=True)
class SpatialTree:
    root: object
    nodes: tuple
    propagator: Callable

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))

    @classmethod
    def from_decompositions(cls, root, stages: Sequence, propagator, tol: float = SUM_TOL):
        """Build a tree from ``(t, D)`` pairs, discovering lineage maps.

        A stage whose lineage cannot be found keeps ``lineage=None`` and is
        reported by :func:`validate_tree`.
        """
        nodes, prev_t, prev = [], 0.0, Decomposition([root])
        for t, D in stages:
            lineage = is_finer(D, prev.evolve(propagator, t - prev_t), tol)
            nodes.append(TreeNode(float(t), D, lineage))
            prev_t, prev = t, D
        return cls(root, nodes, propagator)

    @property
    def times(self) -> list[float]:
        return [n.t for n in self.nodes]

    @property
    def leaves(self) -> Optional[Decomposition]:
        return self.nodes[-1].decomposition if self.nodes else None

    def evolved_root(self, t: float):
        return self.propagator(self.root, t)


@dataclass
class TreeReport:
    valid: bool
    violations: list = field(default_factory=list)
    worst_sum_residual: float = 0.0
    worst_lineage_residual: float = 0.0
    leaves_orthogonal: bool = False
    all_orthogonal: bool = False


def _rel(a, b) -> float:
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def validate_tree(T: SpatialTree, tol: float = SUM_TOL) -> TreeReport:
    """Check ordering, sums and lineage of every node; never raises."""
    rep = TreeReport(valid=True)
    times = T.times
    if times and times[0] < 0:
        rep.violations.append("first time is negative")
    for i in range(1, len(times)):
        if not times[i] > times[i - 1]:
            rep.violations.append(f"times not strictly increasing at node {i}")

    prev = Decomposition([T.root])
    prev_t = 0.0
    for i, node in enumerate(T.nodes):
        D = node.decomposition
        carried = prev.evolve(T.propagator, node.t - prev_t)
        sum_res = _rel(D.matrix.sum(axis=0), T.evolved_root(node.t).data)
        rep.worst_sum_residual = max(rep.worst_sum_residual, sum_res)
        if sum_res > tol:
            rep.violations.append(f"node {i}: elements do not sum to the evolved root "
                                  f"(residual {sum_res:.3g})")
        lineage = node.lineage
        if lineage is None:
            lineage = is_finer(D, carried, tol)
        if lineage is None or len(lineage.grouping) != len(D) or lineage.n_coarse != len(carried):
            rep.violations.append(f"node {i}: not a refinement of the previous node")
        else:
            for j, grp in enumerate(lineage.groups()):
                res = _rel(D.matrix[grp].sum(axis=0), carried.matrix[j])
                rep.worst_lineage_residual = max(rep.worst_lineage_residual, res)
                if res > tol:
                    rep.violations.append(
                        f"node {i}: lineage group {j} misses its parent (residual {res:.3g})")
        prev, prev_t = D, node.t

    if T.nodes:
        rep.leaves_orthogonal = T.leaves.is_orthogonal(ORTHO_TOL)
        rep.all_orthogonal = all(n.decomposition.is_orthogonal(ORTHO_TOL) for n in T.nodes)
        if rep.leaves_orthogonal and not rep.all_orthogonal:
            rep.violations.append("orthogonal leaves but a non-orthogonal ancestor")
    else:
        rep.leaves_orthogonal = rep.all_orthogonal = True
    rep.valid = not rep.violations
    return rep


def _node_at(T: SpatialTree, t: float) -> int:
    """Index of the last node with ``t_i <= t``, or -1 before the first."""
    return bisect.bisect_right(T.times, t) - 1


def hat_T(T: SpatialTree, t: float) -> Decomposition:
    """The decomposition the tree assigns to time ``t``."""
    if t < 0:
        raise InvalidInputError("t must be nonnegative")
    i = _node_at(T, t)
    if i < 0:
        return Decomposition([T.evolved_root(t)])
    node = T.nodes[i]
    if t == node.t:
        return node.decomposition
    return node.decomposition.evolve(T.propagator, t - node.t)


@dataclass(frozen=True)
class Branch:
    """Lineage path ``path[i]`` = element index occupied at node ``i``."""

    leaf_index: int
    path: tuple
    probability: float


def branches(T: SpatialTree, require_orthogonal: bool = False) -> list[Branch]:
    """One branch per leaf, with Born probabilities of the leaves."""
    rep = validate_tree(T)
    if not rep.valid:
        raise InvalidInputError("invalid tree: " + "; ".join(rep.violations))
    if not T.nodes:
        return [Branch(0, (), 1.0)]
    if require_orthogonal and not rep.leaves_orthogonal:
        raise InvalidInputError("leaves are not orthogonal")
    lineages = []
    prev = Decomposition([T.root])
    prev_t = 0.0
    for node in T.nodes:
        lin = node.lineage or is_finer(node.decomposition,
                                       prev.evolve(T.propagator, node.t - prev_t))
        lineages.append(lin)
        prev, prev_t = node.decomposition, node.t
    probs = born_measure(T.leaves).probabilities
    out = []
    for leaf in range(len(T.leaves)):
        path = [leaf]
        for i in range(len(T.nodes) - 1, 0, -1):
            path.append(lineages[i].grouping[path[-1]])
        out.append(Branch(leaf, tuple(reversed(path)), float(probs[leaf])))
    return out


def branch_state(T: SpatialTree, b: Branch, t: float):
    """The element of ``hat_T(T, t)`` that the branch occupies at ``t``."""
    i = _node_at(T, t)
    if i < 0:
        return T.evolved_root(t)
    node = T.nodes[i]
    elem = node.decomposition[b.path[i]]
    return elem if t == node.t else T.propagator(elem, t - node.t)


def branch_index_at(T: SpatialTree, b: Branch, t: float) -> int:
    """Index of the branch's element within ``hat_T(T, t)`` (0 before the first node)."""
    i = _node_at(T, t)
    return 0 if i < 0 else b.path[i]


def w_plus_tree(T: SpatialTree, measure, time_grid, exact: bool = False) -> WReport:
    """Largest w of ``hat_T(T, t)`` over sampled ``t``.

    Single-element decompositions have no nonempty proper subsets and
    contribute 0.  The result is cross-checked against the maximum over
    nodes of ``w(U(t - t_i) D_i)`` for samples ``t >= t_i``; both agree for
    exact w values.
    """
    times = np.asarray(time_grid, dtype=float)
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) < 0):
        raise InvalidInputError("time grid must be nonempty, nonnegative and nondecreasing")
    values, certified = [], True
    for t in times:
        D = hat_T(T, t)
        if len(D) < 2:
            values.append(0.0)
            continue
        r = w_general(measure, D, exact=exact)
        certified &= r.certified
        values.append(r.value)
    per_node = []
    for node in T.nodes:
        vals = [0.0 if len(node.decomposition) < 2 else
                w_general(measure, node.decomposition.evolve(T.propagator, t - node.t),
                          exact=exact).value
                for t in times if t >= node.t]
        per_node.append(max(vals, default=0.0))
    node_max = max(per_node, default=0.0)
    best = int(np.argmax(values))
    agree = abs(node_max - values[best]) <= 1e-9 * max(1.0, node_max)
    notes = (f"supremum sampled at {len(times)} times; the true supremum may be larger",
             f"max over nodes of their own forward w: {node_max:.17g}"
             + ("" if agree else " (disagrees with the sampled tree value)"))
    if exact:
        method = "brute-force"
    elif all(len(n.decomposition) <= 2 for n in T.nodes):
        method = "exact-two"
    else:
        method = "heuristic"
    # the value is a max over time rather than one partition, so no witness
    return WReport(values[best], method, certified and agree, np.zeros(0, dtype=np.int64),
                   achieving_time=float(times[best]), notes=notes)


def tree_to_json(T: SpatialTree, centroid_fn: Optional[Callable] = None) -> dict:
    """Serializable summary ``{root_norm2, nodes: [{t, elements: [...]}]}``.

    Element ids are assigned in node order starting at 1 (the root is 0);
    ``parent_id`` is the id of the containing element of the previous node.
    """
    if centroid_fn is None:
        from .geometry import centroid as centroid_fn
    out = {"root_norm2": float(T.root.norm2()), "nodes": []}
    prev_ids = [0]
    next_id = 1
    for node in T.nodes:
        D = node.decomposition
        lineage = node.lineage
        if lineage is None and len(prev_ids) == 1:
            lineage = CoarseningMap((0,) * len(D), 1)
        total = D.total.norm2()
        ids, elements = [], []
        for j, e in enumerate(D):
            c = centroid_fn(e)
            elements.append({
                "id": next_id,
                "parent_id": prev_ids[lineage.grouping[j]] if lineage else None,
                "norm2": float(e.norm2()),
                "prob": float(e.norm2() / total),
                "centroid": [float(v) for v in np.atleast_1d(c)],
            })
            ids.append(next_id)
            next_id += 1
        out["nodes"].append({"t": float(node.t), "elements": elements})
        prev_ids = ids
    return out
