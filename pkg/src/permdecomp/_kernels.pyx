# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled partition-search kernels; see ``_kernels_py.py`` for semantics."""
import numpy as np


cdef inline double _term(const double[:, ::1] masses, Py_ssize_t k, long long lab,
                         Py_ssize_t subset, Py_ssize_t full) nogil:
    if (subset >> lab) & 1:
        return masses[k, full ^ subset]
    return masses[k, subset]


cdef double _max_ratio(const double[::1] num, const double[::1] inv_den,
                       Py_ssize_t M) nogil:
    cdef Py_ssize_t s
    cdef double best = -1.0, r
    for s in range(1, M - 1):
        r = num[s] * inv_den[s]
        if r > best:
            best = r
    return best


def objective(masses, labels, int n):
    cdef const double[:, ::1] m = np.ascontiguousarray(masses, dtype=np.float64)
    cdef const long long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t K = m.shape[0], M = 1 << n, full = M - 1, k, s
    cdef double[::1] num = np.zeros(M)
    cdef double[::1] den = np.zeros(M)
    cdef double best = -1.0, r
    cdef Py_ssize_t worst = 1
    with nogil:
        for k in range(K):
            for s in range(M):
                num[s] += _term(m, k, lab[k], s, full)
                den[s] += m[k, s]
        for s in range(1, M - 1):
            r = num[s] / den[s]
            if r > best:
                best = r
                worst = s
    return best, int(worst)


def local_improve(masses, labels, int n):
    cdef const double[:, ::1] m = np.ascontiguousarray(masses, dtype=np.float64)
    out = np.array(labels, dtype=np.int64, copy=True)
    cdef long long[::1] lab = out
    cdef Py_ssize_t K = m.shape[0], M = 1 << n, full = M - 1, k, s
    cdef long long l, best_lab
    cdef double[::1] num = np.zeros(M)
    cdef double[::1] base = np.zeros(M)
    cdef double[::1] cand = np.zeros(M)
    cdef double[::1] inv_den = np.zeros(M)
    cdef double current, best_val, val, d
    with nogil:
        for s in range(M):
            d = 0.0
            for k in range(K):
                d = d + m[k, s]
            inv_den[s] = 1.0 / d if d != 0.0 else 0.0
        for k in range(K):
            for s in range(M):
                num[s] += _term(m, k, lab[k], s, full)
        current = _max_ratio(num, inv_den, M)
        for k in range(K):
            for s in range(M):
                base[s] = num[s] - _term(m, k, lab[k], s, full)
            best_lab = lab[k]
            best_val = current
            for l in range(n):
                if l == lab[k]:
                    continue
                for s in range(M):
                    cand[s] = base[s] + _term(m, k, l, s, full)
                val = _max_ratio(cand, inv_den, M)
                if val < best_val:
                    best_val = val
                    best_lab = l
            if best_lab != lab[k]:
                lab[k] = best_lab
                for s in range(M):
                    num[s] = base[s] + _term(m, k, best_lab, s, full)
                current = best_val
    return current, out


cdef struct _Search:
    Py_ssize_t K
    Py_ssize_t M
    Py_ssize_t n
    double best
    long nodes


cdef void _dfs(_Search* st, Py_ssize_t depth,
               const double[:, :, ::1] terms, const double[:, ::1] suffix,
               const double[::1] inv_den, double[:, ::1] num_stack,
               double[:, :, ::1] cand_stack, double[:, ::1] bound_stack,
               long long[:, ::1] order_stack,
               long long[::1] labels, long long[::1] best_labels) nogil:
    cdef Py_ssize_t s, i, j, M = st.M, n = st.n
    cdef long long lab, tmp
    cdef double val, b
    st.nodes += 1
    if depth == st.K:
        val = _max_ratio(num_stack[depth], inv_den, M)
        if val < st.best:
            st.best = val
            for i in range(st.K):
                best_labels[i] = labels[i]
        return
    for lab in range(n):
        b = -1.0
        for s in range(M):
            cand_stack[depth, lab, s] = num_stack[depth, s] + terms[depth, lab, s]
            if 0 < s < M - 1:
                val = (cand_stack[depth, lab, s] + suffix[depth + 1, s]) * inv_den[s]
                if val > b:
                    b = val
        bound_stack[depth, lab] = b
        order_stack[depth, lab] = lab
    # insertion sort of labels by (bound, label)
    for i in range(1, n):
        tmp = order_stack[depth, i]
        j = i - 1
        while j >= 0 and bound_stack[depth, order_stack[depth, j]] > bound_stack[depth, tmp]:
            order_stack[depth, j + 1] = order_stack[depth, j]
            j -= 1
        order_stack[depth, j + 1] = tmp
    for i in range(n):
        lab = order_stack[depth, i]
        if bound_stack[depth, lab] >= st.best:
            break
        labels[depth] = lab
        for s in range(M):
            num_stack[depth + 1, s] = cand_stack[depth, lab, s]
        _dfs(st, depth + 1, terms, suffix, inv_den, num_stack, cand_stack,
             bound_stack, order_stack, labels, best_labels)


def brute_force(masses, int n, init_labels):
    m_arr = np.ascontiguousarray(masses, dtype=np.float64)
    cdef Py_ssize_t K = m_arr.shape[0], M = 1 << n, full = M - 1
    subsets = np.arange(M)
    comp = m_arr[:, full ^ subsets]
    inside = ((subsets[None, :] >> np.arange(n)[:, None]) & 1).astype(bool)
    terms_arr = np.ascontiguousarray(
        np.where(inside[None, :, :], comp[:, None, :], m_arr[:, None, :]))
    cheapest = terms_arr.min(axis=1)
    suffix_arr = np.zeros((K + 1, M))
    suffix_arr[:K] = np.cumsum(cheapest[::-1], axis=0)[::-1]
    den = m_arr.sum(axis=0)
    inv_den_arr = np.zeros(M)
    inv_den_arr[1:M - 1] = 1.0 / den[1:M - 1]

    best_labels_arr = np.array(init_labels, dtype=np.int64, copy=True)
    init_val, _ = objective(m_arr, best_labels_arr, n)
    cdef _Search st
    st.K = K
    st.M = M
    st.n = n
    st.best = init_val
    st.nodes = 0
    num_stack = np.zeros((K + 1, M))
    cand_stack = np.zeros((max(K, 1), n, M))
    bound_stack = np.zeros((max(K, 1), n))
    order_stack = np.zeros((max(K, 1), n), dtype=np.int64)
    labels_arr = np.zeros(K, dtype=np.int64)
    cdef const double[:, :, ::1] terms = terms_arr
    cdef const double[:, ::1] suffix = suffix_arr
    cdef const double[::1] inv_den = inv_den_arr
    cdef double[:, ::1] ns = num_stack
    cdef double[:, :, ::1] cs = cand_stack
    cdef double[:, ::1] bs = bound_stack
    cdef long long[:, ::1] os_ = order_stack
    cdef long long[::1] lab = labels_arr
    cdef long long[::1] best_lab = best_labels_arr
    with nogil:
        _dfs(&st, 0, terms, suffix, inv_den, ns, cs, bs, os_, lab, best_lab)
    return st.best, best_labels_arr, int(st.nodes)
