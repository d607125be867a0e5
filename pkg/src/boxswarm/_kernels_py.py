"""Pure-Python/numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable, and kept as the
reference the extension is tested against.
"""

from itertools import permutations

import numpy as np

# All 24 corner permutations in lexicographic order; argmin picks the first
# minimum, which fixes tie-breaking identically in both backends.
CORNER_PERMS = np.array(list(permutations(range(4))), dtype=np.intp)


def lsa(cost):
    """Rectangular Hungarian (shortest augmenting path with potentials).

    ``cost`` is an (n, m) float array with n <= m.  Returns an int array of
    length n holding the column assigned to each row.
    """
    c = np.asarray(cost, dtype=np.float64)
    n, m = c.shape
    rows = c.tolist()
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)  # p[j]: row (1-based) matched to column j, 0 = free
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = rows[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
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
    out = np.empty(n, dtype=np.intp)
    for j in range(1, m + 1):
        if p[j]:
            out[p[j] - 1] = j - 1
    return out


def box_cost_matrix(corners1, corners2):
    """All-pairs corner-matching costs between two sets of 4-corner polygons.

    Returns ``(C, match)`` where ``C[i, j]`` is the minimum total Euclidean
    distance over the 24 corner bijections between polygon i of the first set
    and polygon j of the second, and ``match[i, j, k]`` is the corner of
    polygon j that corner k of polygon i is matched to.
    """
    a = np.asarray(corners1, dtype=np.float64)
    b = np.asarray(corners2, dtype=np.float64)
    diff = a[:, None, :, None, :] - b[None, :, None, :, :]
    d = np.sqrt(diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1])
    # d: (n1, n2, 4, 4); gather d[..., k, perm[k]] for every permutation
    picked = d[:, :, np.arange(4), CORNER_PERMS]  # (n1, n2, 24, 4)
    totals = ((picked[..., 0] + picked[..., 1]) + picked[..., 2]) + picked[..., 3]
    best = np.argmin(totals, axis=2)
    cost = np.take_along_axis(totals, best[..., None], axis=2)[..., 0]
    return cost, CORNER_PERMS[best]
