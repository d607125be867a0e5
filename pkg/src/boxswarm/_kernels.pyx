# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_kernels_py``.

Results must match the pure-Python module: same algorithm, same iteration
order, same tie-breaking.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()

# lexicographic order of permutations(range(4))
cdef int PERMS[24][4]
PERMS[:] = [
    [0, 1, 2, 3], [0, 1, 3, 2], [0, 2, 1, 3], [0, 2, 3, 1], [0, 3, 1, 2], [0, 3, 2, 1],
    [1, 0, 2, 3], [1, 0, 3, 2], [1, 2, 0, 3], [1, 2, 3, 0], [1, 3, 0, 2], [1, 3, 2, 0],
    [2, 0, 1, 3], [2, 0, 3, 1], [2, 1, 0, 3], [2, 1, 3, 0], [2, 3, 0, 1], [2, 3, 1, 0],
    [3, 0, 1, 2], [3, 0, 2, 1], [3, 1, 0, 2], [3, 1, 2, 0], [3, 2, 0, 1], [3, 2, 1, 0],
]


def lsa(cost):
    cdef const double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], m = c.shape[1]
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(m + 1)
    cdef double[::1] minv = np.empty(m + 1)
    cdef Py_ssize_t[::1] p = np.zeros(m + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(m + 1, dtype=np.intp)
    cdef cnp.uint8_t[::1] used = np.zeros(m + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur, ui0
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] o = out

    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(m + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            ui0 = u[i0]
            delta = INFINITY
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    for j in range(1, m + 1):
        if p[j]:
            o[p[j] - 1] = j - 1
    return out


def box_cost_matrix(corners1, corners2):
    cdef const double[:, :, ::1] a = np.ascontiguousarray(corners1, dtype=np.float64)
    cdef const double[:, :, ::1] b = np.ascontiguousarray(corners2, dtype=np.float64)
    cdef Py_ssize_t n1 = a.shape[0], n2 = b.shape[0]
    cost_arr = np.empty((n1, n2))
    match_arr = np.empty((n1, n2, 4), dtype=np.intp)
    cdef double[:, ::1] cost = cost_arr
    cdef Py_ssize_t[:, :, ::1] match = match_arr
    cdef double d[4][4]
    cdef double dx, dy, total, best
    cdef Py_ssize_t i, j, k, l, q, arg

    for i in range(n1):
        for j in range(n2):
            for k in range(4):
                for l in range(4):
                    dx = a[i, k, 0] - b[j, l, 0]
                    dy = a[i, k, 1] - b[j, l, 1]
                    d[k][l] = sqrt(dx * dx + dy * dy)
            best = INFINITY
            arg = 0
            for q in range(24):
                total = ((d[0][PERMS[q][0]] + d[1][PERMS[q][1]]) + d[2][PERMS[q][2]]) + d[3][PERMS[q][3]]
                if total < best:
                    best = total
                    arg = q
            cost[i, j] = best
            for k in range(4):
                match[i, j, k] = PERMS[arg][k]
    return cost_arr, match_arr
