# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np

from libc.math cimport fabs, sqrt, INFINITY

BACKEND = "cython"


cdef bint _target_less(const double[:, ::1] g, const Py_ssize_t[:, ::1] pm,
                       Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    # gt[pm[a]] < gt[pm[b]] lexicographically, x before y, point by point
    cdef Py_ssize_t j, c
    cdef double x, y
    for j in range(pm.shape[1]):
        for c in range(2):
            x = g[pm[a, j], c]
            y = g[pm[b, j], c]
            if x < y:
                return True
            if x > y:
                return False
    return False


def best_permutation_costs(preds, gt, perms):
    cdef const double[:, :, ::1] p = np.ascontiguousarray(preds, dtype=np.float64)
    cdef const double[:, ::1] g = np.ascontiguousarray(gt, dtype=np.float64)
    cdef const Py_ssize_t[:, ::1] pm = np.ascontiguousarray(perms, dtype=np.intp)
    cdef Py_ssize_t n = p.shape[0], nv = p.shape[1], k = pm.shape[0]
    cdef Py_ssize_t i, m, j, gj
    cdef double s, best_s
    cdef Py_ssize_t best_m
    costs = np.empty(n, dtype=np.float64)
    idx = np.empty(n, dtype=np.intp)
    cdef double[::1] c_view = costs
    cdef Py_ssize_t[::1] i_view = idx
    with nogil:
        for i in range(n):
            best_s = INFINITY
            best_m = 0
            for m in range(k):
                s = 0.0
                for j in range(nv):
                    gj = pm[m, j]
                    s = s + (fabs(p[i, j, 0] - g[gj, 0]) + fabs(p[i, j, 1] - g[gj, 1]))
                if s < best_s or (s == best_s and _target_less(g, pm, m, best_m)):
                    best_s = s
                    best_m = m
            c_view[i] = best_s
            i_view[i] = best_m
    return costs, idx


cdef double _mean_nearest(const double[:, ::1] a, const double[:, ::1] b) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double best, d, dx, dy, total = 0.0
    for i in range(a.shape[0]):
        best = INFINITY
        for j in range(b.shape[0]):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            d = sqrt(dx * dx + dy * dy)
            if d < best:
                best = d
        total = total + best
    return total / a.shape[0]


def chamfer(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double ab, ba
    with nogil:
        ab = _mean_nearest(av, bv)
        ba = _mean_nearest(bv, av)
    return 0.5 * (ab + ba)


def lsa_square(cost):
    cdef const double[:, ::1] a = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(n + 1)
    p_arr = np.zeros(n + 1, dtype=np.intp)
    way_arr = np.zeros(n + 1, dtype=np.intp)
    minv_arr = np.empty(n + 1)
    used_arr = np.empty(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr, v = v_arr, minv = minv_arr
    cdef Py_ssize_t[::1] row_of_col = p_arr, way = way_arr
    cdef unsigned char[::1] used = used_arr
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur
    with nogil:
        for i in range(1, n + 1):
            row_of_col[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = row_of_col[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = (a[i0 - 1, j - 1] - u[i0]) - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[row_of_col[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if row_of_col[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                row_of_col[j0] = row_of_col[j1]
                j0 = j1
                if j0 == 0:
                    break
    col_of_row = np.empty(n, dtype=np.intp)
    col_of_row[p_arr[1:] - 1] = np.arange(n)
    return col_of_row, u_arr[1:].copy(), v_arr[1:].copy()
