"""Pure-Python/numpy versions of the partition-search kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature
and semantics; :mod:`permdecomp.kernels` picks one at import time.

Shared conventions
------------------
``masses`` is a C-contiguous ``(K, 2**n)`` float64 array where
``masses[k, S]`` is the squared norm of the subset-sum ``Psi_S`` restricted to
atom ``k``.  ``labels`` assigns each atom to one of the ``n`` elements.  For a
labelling, subset ``I`` (bitmask) accumulates

    num[I] = sum_k  masses[k, ~I]  if labels[k] in I  else  masses[k, I]

which is ``||Psi_I - G(Delta_I) Psi||**2``.  The objective is
``max_I num[I] / den[I]`` over nonempty proper ``I`` with
``den[I] = sum_k masses[k, I]``.
"""
from __future__ import annotations

import numpy as np


def _term_table(masses: np.ndarray, n: int) -> np.ndarray:
    """Contribution of each atom under each label, shape ``(K, n, M)``."""
    M = 1 << n
    subsets = np.arange(M)
    comp = masses[:, (M - 1) ^ subsets]
    inside = ((subsets[None, :] >> np.arange(n)[:, None]) & 1).astype(bool)
    return np.where(inside[None, :, :], comp[:, None, :], masses[:, None, :])


def objective(masses, labels, n):
    """Return ``(max ratio squared, worst subset)`` for a labelling."""
    masses = np.asarray(masses, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    M = 1 << n
    subsets = np.arange(M)
    inside = ((subsets[None, :] >> labels[:, None]) & 1).astype(bool)
    num = np.where(inside, masses[:, (M - 1) ^ subsets], masses).sum(axis=0)
    den = masses.sum(axis=0)
    ratio = num[1:M - 1] / den[1:M - 1]
    worst = int(np.argmax(ratio))
    return float(ratio[worst]), worst + 1


def local_improve(masses, labels, n):
    """One sweep of single-atom reassignments.

    Atoms are visited in index order; an atom moves to the label giving the
    largest strict decrease of the objective.  Returns
    ``(ratio squared, new labels)``.
    """
    masses = np.asarray(masses, dtype=np.float64)
    labels = np.array(labels, dtype=np.int64, copy=True)
    K = masses.shape[0]
    M = 1 << n
    full = M - 1
    subsets = np.arange(M)
    comp_idx = full ^ subsets
    bits = ((subsets[None, :] >> np.arange(n)[:, None]) & 1).astype(bool)
    inv_den = 1.0 / masses.sum(axis=0)[1:M - 1]

    def term(k, lab):
        return np.where(bits[lab], masses[k, comp_idx], masses[k])

    num = np.zeros(M)
    for k in range(K):
        num += term(k, labels[k])
    current = float(np.max(num[1:M - 1] * inv_den))
    for k in range(K):
        base = num - term(k, labels[k])
        best_lab, best_val = labels[k], current
        for lab in range(n):
            if lab == labels[k]:
                continue
            val = float(np.max((base + term(k, lab))[1:M - 1] * inv_den))
            if val < best_val:
                best_lab, best_val = lab, val
        if best_lab != labels[k]:
            labels[k] = best_lab
            num = base + term(k, best_lab)
            current = best_val
    return current, labels


def brute_force(masses, n, init_labels):
    """Exact minimisation over all labellings by depth-first branch and bound.

    ``init_labels`` seeds the incumbent.  A branch is cut when its lower
    bound (assigned contributions plus, for every unassigned atom, the
    cheaper of its two possible contributions) cannot beat the incumbent.
    Returns ``(ratio squared, labels, nodes visited)``.
    """
    masses = np.ascontiguousarray(masses, dtype=np.float64)
    K = masses.shape[0]
    M = 1 << n
    terms = _term_table(masses, n)
    cheapest = terms.min(axis=1)
    suffix = np.zeros((K + 1, M))
    for k in range(K - 1, -1, -1):
        suffix[k] = suffix[k + 1] + cheapest[k]
    inv_den = 1.0 / masses.sum(axis=0)[1:M - 1]

    best_labels = np.array(init_labels, dtype=np.int64, copy=True)
    best = [objective(masses, best_labels, n)[0]]
    labels = np.zeros(K, dtype=np.int64)
    nodes = [0]

    def dfs(depth, num):
        nodes[0] += 1
        if depth == K:
            val = float(np.max(num[1:M - 1] * inv_den))
            if val < best[0]:
                best[0] = val
                best_labels[:] = labels
            return
        candidates = []
        for lab in range(n):
            new = num + terms[depth, lab]
            bound = float(np.max((new + suffix[depth + 1])[1:M - 1] * inv_den))
            candidates.append((bound, lab, new))
        candidates.sort(key=lambda c: (c[0], c[1]))
        for bound, lab, new in candidates:
            if bound >= best[0]:
                break
            labels[depth] = lab
            dfs(depth + 1, new)

    dfs(0, np.zeros(M))
    return best[0], best_labels, nodes[0]
