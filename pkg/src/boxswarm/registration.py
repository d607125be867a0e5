"""Box-level ICP between two agents' detections, and ring-wise identity consensus.

Each iteration matches every box of the moving set against every box of the
fixed set by solving a 4x4 corner assignment per pair, solves a second
assignment over the resulting pair costs, and refits a similarity transform on
all matched corners.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from boxswarm import kernels
from boxswarm.errors import CountMismatch, RegistrationPairError
from boxswarm.geometry import SimilarityTransform, corners_array, estimate_similarity
from boxswarm.lsa import assignment_cost, solve_lsa

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 50
# ICP from the identity stalls beyond roughly 30 degrees of relative rotation
# on sparse scenes; seeds every 45 degrees keep every rotation in some basin.
DEFAULT_ROTATION_STARTS = 8


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Boxes seen by one agent, as (N, 4, 2) corners plus parallel identity labels.

    Corners are usually those of axis-aligned boxes, but any quadrilateral is
    accepted so that exactly transformed sets can be registered.
    """

    corners: np.ndarray
    ids: tuple

    def __post_init__(self):
        c = np.asarray(self.corners, dtype=np.float64)
        if c.ndim != 3 or c.shape[1:] != (4, 2):
            raise ValueError(f"corners must have shape (N, 4, 2), got {c.shape}")
        if len(self.ids) != len(c):
            raise ValueError(f"{len(self.ids)} ids for {len(c)} boxes")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique within a box set")
        if not np.isfinite(c).all():
            raise ValueError("non-finite corner coordinates")
        c.setflags(write=False)
        object.__setattr__(self, "corners", c)
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))

    @classmethod
    def from_boxes(cls, boxes, ids=None):
        if ids is None:
            ids = range(len(boxes))
        return cls(corners_array(boxes) if len(boxes) else np.empty((0, 4, 2)), tuple(ids))

    def __len__(self):
        return len(self.ids)

    def bounds(self):
        """Axis-aligned extent of each polygon as an (N, 4) array of x_min, y_min, x_max, y_max."""
        lo = self.corners.min(axis=1)
        hi = self.corners.max(axis=1)
        return np.concatenate([lo, hi], axis=1)

    def centers(self):
        return self.corners.mean(axis=1)

    def relabeled(self, ids):
        return BoxSet(self.corners, tuple(ids))


@dataclass
class RegistrationResult:
    transform: SimilarityTransform
    matching: np.ndarray  # matching[i] = index in set 2 of set-1 box i
    converged: bool
    iterations: int
    final_cost: float  # mean matched corner distance, pixels
    corner_match: np.ndarray = field(repr=False)  # (N, 4): corner of matched box
    trace: list = field(default_factory=list, repr=False)


def box_pair_cost(b1, b2):
    """Total corner-to-corner distance of the best corner bijection between two quadrilaterals."""
    p = np.asarray(b1, dtype=np.float64).reshape(4, 2)
    q = np.asarray(b2, dtype=np.float64).reshape(4, 2)
    d = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2)
    return solve_lsa(d)[::-1]


def _correspond(moving, fixed):
    cost, corner = kernels.box_cost_matrix(moving, fixed)
    sigma = kernels.lsa(cost)
    n = len(sigma)
    mean_cost = assignment_cost(cost, sigma) / (4 * n)
    return sigma, corner[np.arange(n), sigma], mean_cost


def _initial_transforms(src, dst, rotation_starts):
    """Identity first, then centroid/spread-aligned seeds at evenly spaced rotations."""
    yield SimilarityTransform.identity()
    if rotation_starts <= 1:
        return
    a = src.reshape(-1, 2)
    b = dst.reshape(-1, 2)
    mu_a = a.mean(axis=0)
    mu_b = b.mean(axis=0)
    spread_a = float(np.sum((a - mu_a) ** 2))
    spread_b = float(np.sum((b - mu_b) ** 2))
    scale = math.sqrt(spread_b / spread_a) if spread_a > 0 and spread_b > 0 else 1.0
    for k in range(rotation_starts):
        theta = 2 * math.pi * k / rotation_starts
        yield SimilarityTransform.about(mu_a, theta, scale, tuple(mu_b - mu_a))


def _icp_from(src, dst, T, tol, max_iter, with_scale):
    sigma, cmatch, cost = _correspond(T.apply(src), dst)
    trace = [cost]
    converged = False
    iterations = 0
    for _ in range(max_iter):
        moved = T.apply(src)
        targets = dst[sigma[:, None], cmatch]  # (n, 4, 2), aligned with moved corners
        step = estimate_similarity(moved.reshape(-1, 2), targets.reshape(-1, 2), with_scale)
        T_new = step.compose(T)
        sigma_new, cmatch_new, cost_new = _correspond(T_new.apply(src), dst)
        iterations += 1
        if cost_new > cost:
            converged = True
            break
        repeated = np.array_equal(sigma_new, sigma) and np.array_equal(cmatch_new, cmatch)
        decrease = cost - cost_new
        T, sigma, cmatch, cost = T_new, sigma_new, cmatch_new, cost_new
        trace.append(cost)
        if repeated or decrease < tol:
            converged = True
            break
    return RegistrationResult(
        transform=T,
        matching=sigma,
        converged=converged,
        iterations=iterations,
        final_cost=cost,
        corner_match=cmatch,
        trace=trace,
    )


def box_icp(set1, set2, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, with_scale=True,
            rotation_starts=DEFAULT_ROTATION_STARTS):
    """Align ``set1`` onto ``set2``; returns the accumulated transform and box matching.

    Each run stops when the mean matched-corner cost decreases by less than
    ``tol``, when the correspondences (box matching and per-box corner
    matching) repeat, or after ``max_iter`` refits.  A refit that would raise
    the cost is rejected, so the cost trace never increases.

    The first run starts from the identity.  With ``rotation_starts > 1`` the
    search is repeated from that many rotation seeds (centroids and spreads
    aligned) and the run with the lowest final cost wins; ties keep the
    earlier run.  ``rotation_starts=1`` runs from the identity only.
    """
    if len(set1) != len(set2):
        raise CountMismatch(f"box counts differ: {len(set1)} vs {len(set2)}")
    if len(set1) < 2:
        raise CountMismatch("registration needs at least two boxes per set")
    if not tol > 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter at least 1")
    src = set1.corners
    dst = set2.corners
    best = None
    for T0 in _initial_transforms(src, dst, rotation_starts):
        result = _icp_from(src, dst, T0, tol, max_iter, with_scale)
        if best is None or result.final_cost < best.final_cost:
            best = result
    return best


def relabel_from_predecessor(pred, own, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """One ring step: register ``pred`` (carrying consensus labels) onto ``own``.

    Returns ``(relabeled_own, mapping, result)`` where ``mapping`` sends each of
    ``own``'s original ids to its consensus label.
    """
    result = box_icp(pred, own, tol=tol, max_iter=max_iter)
    labels = [None] * len(own)
    for i, j in enumerate(result.matching):
        labels[j] = pred.ids[i]
    mapping = {own.ids[j]: labels[j] for j in range(len(own))}
    return own.relabeled(labels), mapping, result


@dataclass
class RingResult:
    labels: list  # labels[k]: dict view-k id -> consensus id (view 0's ids)
    consensus_ok: bool
    pair_results: list  # RegistrationResult for pairs (0,1), ..., (n-2,n-1), (n-1,0)
    failing_pair: tuple = None


def ring_register(views, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Propagate view 0's identities around the ring and check they come back unchanged."""
    n = len(views)
    if n < 2:
        raise ValueError("ring registration needs at least two views")
    counts = {len(v) for v in views}
    if len(counts) != 1:
        raise CountMismatch(f"views disagree on box count: {sorted(counts)}")

    labels = [{i: i for i in views[0].ids}]
    pair_results = []
    carried = views[0]
    for k in range(1, n + 1):
        target = views[k % n]
        try:
            carried_next, mapping, result = relabel_from_predecessor(carried, target, tol, max_iter)
        except Exception as exc:
            raise RegistrationPairError((k - 1, k % n), exc) from exc
        pair_results.append(result)
        if k < n:
            labels.append(mapping)
            carried = carried_next
        else:
            closing = mapping
    consensus_ok = all(closing[i] == i for i in views[0].ids)
    failing = None
    if not consensus_ok:
        worst = int(np.argmax([r.final_cost for r in pair_results]))
        failing = (worst, (worst + 1) % n)
    return RingResult(labels, consensus_ok, pair_results, failing)


def success_model(s_det, s_reg, n):
    """Ring-wide success probability ``(s_det**2 * s_reg) ** n``."""
    for name, val in (("s_det", s_det), ("s_reg", s_reg)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} must be a probability, got {val}")
    if n < 1:
        raise ValueError("n must be at least 1")
    return (s_det * s_det * s_reg) ** n


def matching_accuracy(result, truth):
    """Fraction of set-1 boxes matched to their true set-2 index."""
    truth = np.asarray(truth)
    return float(np.mean(result.matching == truth))


def rotation_error(result, theta):
    d = result.transform.theta - theta
    return abs(math.atan2(math.sin(d), math.cos(d)))
