"""Synthetic whale scenes, view poses and a stochastic stand-in for the detector."""

import math
from dataclasses import dataclass, field

import numpy as np

from boxswarm.geometry import BoundingBox, SimilarityTransform, corners_array
from boxswarm.registration import BoxSet


@dataclass(frozen=True)
class Scene:
    boxes: tuple  # BoundingBox per whale, world pixels
    extent: float  # side of the square world frame, pixels

    def __post_init__(self):
        if len(self.boxes) < 1:
            raise ValueError("a scene needs at least one whale")
        for b in self.boxes:
            if b.x_min < 0 or b.y_min < 0 or b.x_max > self.extent or b.y_max > self.extent:
                raise ValueError(f"box {b} outside the {self.extent}px world")

    @property
    def ids(self):
        return tuple(range(len(self.boxes)))

    def corners(self):
        return corners_array(self.boxes)

    def center(self):
        c = self.corners().reshape(-1, 2)
        return (c.min(axis=0) + c.max(axis=0)) / 2

    def size(self):
        """Side of the scene's bounding region (largest of width and height)."""
        c = self.corners().reshape(-1, 2)
        return float((c.max(axis=0) - c.min(axis=0)).max())


def make_scene(n_whales=9, extent=4096.0, rng=None, spread=0.3, length=(160.0, 320.0), aspect=(2.5, 4.0)):
    """Elongated, well-separated boxes scattered around the middle of the world frame.

    ``spread`` is the half-width of the placement region as a fraction of the
    extent.
    """
    rng = np.random.default_rng(rng)
    half = spread * extent
    mid = extent / 2
    boxes = []
    centers = []
    min_gap = 1.2 * length[1]
    attempts = 0
    while len(boxes) < n_whales:
        attempts += 1
        if attempts > 100000:
            raise RuntimeError("could not place whales; lower n_whales or raise spread")
        cx, cy = rng.uniform(mid - half, mid + half, size=2)
        if any(math.hypot(cx - x, cy - y) < min_gap for x, y in centers):
            continue
        long_side = rng.uniform(*length)
        short_side = long_side / rng.uniform(*aspect)
        w, h = (long_side, short_side) if rng.random() < 0.5 else (short_side, long_side)
        boxes.append(BoundingBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2))
        centers.append((cx, cy))
    return Scene(tuple(boxes), float(extent))


@dataclass(frozen=True)
class ViewRegime:
    """Bounds for random view poses, relative to the scene."""

    max_rotation: float = math.pi / 4
    max_shift_frac: float = 0.2  # translation norm bound, fraction of scene size
    scale_range: tuple = (0.8, 1.25)
    max_shear: float = 0.1


@dataclass(frozen=True)
class ViewPose:
    transform: SimilarityTransform  # world -> image
    shear: float = 0.0  # horizontal shear about the scene center, applied before the transform


def sample_pose(scene, rng, regime=ViewRegime()):
    """Random pose rotating/scaling about the scene center, inside ``regime``."""
    center = scene.center()
    theta = rng.uniform(-regime.max_rotation, regime.max_rotation)
    lo, hi = regime.scale_range
    scale = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    r = regime.max_shift_frac * scene.size() * math.sqrt(rng.random())
    phi = rng.uniform(-math.pi, math.pi)
    shift = (r * math.cos(phi), r * math.sin(phi))
    shear = rng.uniform(-regime.max_shear, regime.max_shear)
    return ViewPose(SimilarityTransform.about(center, theta, scale, shift), shear)


@dataclass(frozen=True)
class SyntheticDetector:
    s_det: float = 1.0  # per-box detection probability
    jitter: float = 0.0  # std of per-corner Gaussian noise, pixels
    fp_rate: float = 0.0  # chance of a spurious box per true box

    def __post_init__(self):
        for name in ("s_det", "fp_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.jitter < 0:
            raise ValueError("jitter must be non-negative")


@dataclass(frozen=True)
class AgentView:
    pose: ViewPose
    observed: BoxSet
    truth: tuple = field(default=())  # scene id of each observed box, -1 for false positives


def _shear(points, shear, center):
    out = np.array(points, dtype=np.float64, copy=True)
    out[..., 0] += shear * (out[..., 1] - center[1])
    return out


def render_view(scene, pose, detector, rng):
    """What one agent's detector reports from ``pose``.

    Every whale is kept independently with probability ``s_det``; kept boxes
    are sheared, mapped into the image, corner-jittered and re-boxed as the
    axis-aligned hull.  Detections are listed in random order with local ids
    ``0..k-1``.
    """
    rng = np.random.default_rng(rng)
    keep = rng.random(len(scene.boxes)) < detector.s_det
    pts = _shear(scene.corners(), pose.shear, scene.center())
    pts = pose.transform.apply(pts)
    if detector.jitter > 0:
        pts = pts + rng.normal(0.0, detector.jitter, size=pts.shape)
    hulls = []
    truth = []
    for i in np.flatnonzero(keep):
        hulls.append(BoundingBox.hull(pts[i]))
        truth.append(int(i))
    if detector.fp_rate > 0:
        sizes = [b.size for b in scene.boxes]
        for _ in range(len(scene.boxes)):
            if rng.random() < detector.fp_rate:
                w, h = sizes[rng.integers(len(sizes))]
                x, y = rng.uniform(0, scene.extent - max(w, h), size=2)
                hulls.append(BoundingBox(x, y, x + w, y + h))
                truth.append(-1)
    order = rng.permutation(len(hulls))
    boxes = [hulls[k] for k in order]
    return AgentView(pose, BoxSet.from_boxes(boxes), tuple(truth[k] for k in order))


def view_in_frame(view, extent):
    """True if every observed box lies inside the ``extent`` x ``extent`` image."""
    if len(view.observed) == 0:
        return True
    c = view.observed.corners
    return bool(c.min() >= 0 and c.max() <= extent)
