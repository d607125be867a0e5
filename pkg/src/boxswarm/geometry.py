"""Bounding boxes, planar similarity transforms and their least-squares fit."""

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from boxswarm.errors import DegenerateInput


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in image pixel coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box coordinates {vals}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"empty or inverted box {vals}")

    @property
    def center(self):
        return Point2((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)

    @property
    def size(self):
        return (self.x_max - self.x_min, self.y_max - self.y_min)

    @classmethod
    def hull(cls, points):
        """Smallest axis-aligned box containing ``points`` (shape (k, 2))."""
        pts = np.asarray(points, dtype=np.float64)
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        return cls(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def corners(box):
    """Corners of ``box`` in fixed counter-clockwise order starting at (x_min, y_min)."""
    return [
        Point2(box.x_min, box.y_min),
        Point2(box.x_max, box.y_min),
        Point2(box.x_max, box.y_max),
        Point2(box.x_min, box.y_max),
    ]


def corners_array(boxes):
    """Stack the corners of ``boxes`` into an (N, 4, 2) float array."""
    out = np.empty((len(boxes), 4, 2))
    for i, b in enumerate(boxes):
        out[i] = ((b.x_min, b.y_min), (b.x_max, b.y_min), (b.x_max, b.y_max), (b.x_min, b.y_max))
    return out


@dataclass(frozen=True)
class SimilarityTransform:
    """Planar similarity ``p -> scale * R(theta) @ p + (tx, ty)``."""

    theta: float = 0.0
    tx: float = 0.0
    ty: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive and finite, got {self.scale}")

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def about(cls, center, theta=0.0, scale=1.0, shift=(0.0, 0.0)):
        """Rotate and scale about ``center``, then translate by ``shift``."""
        cx, cy = center
        c, s = math.cos(theta), math.sin(theta)
        tx = cx + shift[0] - scale * (c * cx - s * cy)
        ty = cy + shift[1] - scale * (s * cx + c * cy)
        return cls(theta, tx, ty, scale)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        a, b = m[0, 0], m[1, 0]
        scale = math.hypot(a, b)
        return cls(math.atan2(b, a), float(m[0, 2]), float(m[1, 2]), scale)

    @property
    def matrix(self):
        c = self.scale * math.cos(self.theta)
        s = self.scale * math.sin(self.theta)
        return np.array([[c, -s, self.tx], [s, c, self.ty], [0.0, 0.0, 1.0]])

    def compose(self, other):
        """The transform applying ``other`` first, then ``self``."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        tx = self.scale * (c * other.tx - s * other.ty) + self.tx
        ty = self.scale * (s * other.tx + c * other.ty) + self.ty
        theta = math.atan2(math.sin(self.theta + other.theta), math.cos(self.theta + other.theta))
        return SimilarityTransform(theta, tx, ty, self.scale * other.scale)

    def inverse(self):
        inv_s = 1.0 / self.scale
        c, s = math.cos(self.theta), math.sin(self.theta)
        # R^T (-t) / scale
        tx = -inv_s * (c * self.tx + s * self.ty)
        ty = -inv_s * (-s * self.tx + c * self.ty)
        return SimilarityTransform(-self.theta, tx, ty, inv_s)

    def apply(self, points):
        """Map an array of points with trailing dimension 2."""
        pts = np.asarray(points, dtype=np.float64)
        c = self.scale * math.cos(self.theta)
        s = self.scale * math.sin(self.theta)
        x = pts[..., 0]
        y = pts[..., 1]
        return np.stack([c * x - s * y + self.tx, s * x + c * y + self.ty], axis=-1)


def apply_transform(T, p):
    c = T.scale * math.cos(T.theta)
    s = T.scale * math.sin(T.theta)
    return Point2(c * p[0] - s * p[1] + T.tx, s * p[0] + c * p[1] + T.ty)


def transform_box_points(T, boxes):
    """Map each box's corners through ``T``.

    ``boxes`` is a sequence of :class:`BoundingBox` or an (N, 4, 2) corner
    array.  The result is an (N, 4, 2) array of general quadrilaterals with
    the corner order of the input preserved.
    """
    if isinstance(boxes, np.ndarray):
        pts = boxes
    else:
        pts = corners_array(boxes)
    return T.apply(pts)


def estimate_similarity(P1, P2, with_scale=True):
    """Least-squares similarity mapping ``P1`` onto ``P2``.

    Closed form: subtract centroids, take the rotation angle from the summed
    dot and cross products, and the scale from their magnitude over the
    spread of ``P1``.
    """
    a = np.asarray(P1, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(P2, dtype=np.float64).reshape(-1, 2)
    if a.shape != b.shape:
        raise ValueError(f"point sets differ in size: {a.shape} vs {b.shape}")
    if len(a) < 2:
        raise DegenerateInput("need at least two point pairs")
    mu_a = a.mean(axis=0)
    mu_b = b.mean(axis=0)
    x = a - mu_a
    y = b - mu_b
    spread = float(np.sum(x * x))
    if not spread > 1e-24 * max(1.0, float(np.sum(mu_a * mu_a))):
        raise DegenerateInput("source points coincide; rotation is undefined")
    dot = float(np.sum(x[:, 0] * y[:, 0] + x[:, 1] * y[:, 1]))
    cross = float(np.sum(x[:, 0] * y[:, 1] - x[:, 1] * y[:, 0]))
    theta = math.atan2(cross, dot)
    if with_scale:
        scale = math.hypot(dot, cross) / spread
        if not scale > 0:
            raise DegenerateInput("target points coincide; scale collapses to zero")
    else:
        scale = 1.0
    c, s = scale * math.cos(theta), scale * math.sin(theta)
    tx = mu_b[0] - (c * mu_a[0] - s * mu_a[1])
    ty = mu_b[1] - (s * mu_a[0] + c * mu_a[1])
    return SimilarityTransform(theta, float(tx), float(ty), scale)


def alignment_residual(T, P1, P2):
    """Sum of squared distances between ``T(P1)`` and ``P2``."""
    d = T.apply(np.asarray(P1, dtype=np.float64).reshape(-1, 2)) - np.asarray(P2, dtype=np.float64).reshape(-1, 2)
    return float(np.sum(d * d))


__all__: Sequence[str] = [
    "Point2",
    "BoundingBox",
    "SimilarityTransform",
    "corners",
    "corners_array",
    "apply_transform",
    "transform_box_points",
    "estimate_similarity",
    "alignment_residual",
]
