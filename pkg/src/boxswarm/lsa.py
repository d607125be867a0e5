"""Exact linear sum assignment and a brute-force oracle for it."""

import math
from itertools import permutations

import numpy as np

from boxswarm import kernels
from boxswarm.errors import InvalidMatrix, TooLarge

BRUTE_FORCE_MAX = 9


def _check(cost):
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
        raise InvalidMatrix(f"cost must be a non-empty 2-D matrix, got shape {c.shape}")
    if c.shape[0] > c.shape[1]:
        raise InvalidMatrix(f"more rows than columns ({c.shape[0]} > {c.shape[1]}); pad the columns")
    if not np.isfinite(c).all():
        raise InvalidMatrix("cost matrix has non-finite entries")
    return c


def assignment_cost(cost, assignment):
    """Correctly rounded total of ``cost[i, assignment[i]]``."""
    c = np.asarray(cost, dtype=np.float64)
    return math.fsum(c[i, j] for i, j in enumerate(assignment))


def solve_lsa(cost):
    """Minimum-cost injective row-to-column assignment.

    Returns ``(assignment, total_cost)`` where ``assignment[i]`` is the column
    of row ``i``.  Rectangular matrices with more columns than rows are
    handled natively.
    """
    c = _check(cost)
    assignment = kernels.lsa(c)
    return assignment, assignment_cost(c, assignment)


def brute_force_lsa(cost):
    """Enumerate every injective assignment; ties go to the lexicographically smallest."""
    c = _check(cost)
    m, n = c.shape
    if n > BRUTE_FORCE_MAX:
        raise TooLarge(f"brute force limited to {BRUTE_FORCE_MAX} columns, got {n}")
    perms = np.array(list(permutations(range(n), m)), dtype=np.intp)
    totals = c[np.arange(m), perms].sum(axis=1)
    # Candidates within rounding of the minimum are re-summed exactly so the
    # reported optimum does not depend on summation order.
    lo = totals.min()
    near = np.flatnonzero(totals <= lo + 1e-9 * max(1.0, abs(lo)))
    exact = [assignment_cost(c, perms[k]) for k in near]
    best = near[int(np.argmin(exact))]
    return perms[best].copy(), min(exact)
