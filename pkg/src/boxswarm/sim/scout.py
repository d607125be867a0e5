"""Spiral search pattern and the frame-buffer detection trigger."""

import math
from collections import deque

import numpy as np

from boxswarm.errors import EmptyBuffer

DEFAULT_THRESHOLD = 0.8
DEFAULT_WINDOW = 10


def spiral_waypoints(center, spacing, turns, points_per_turn=16):
    """Archimedean spiral ``r = spacing * phi / (2 pi)``, sampled uniformly in ``phi``.

    Returns ``turns * points_per_turn + 1`` points from the center out to
    ``phi = 2 pi turns``.
    """
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    if turns < 1 or points_per_turn < 1:
        raise ValueError("turns and points_per_turn must be at least 1")
    n = int(turns * points_per_turn)
    phi = 2.0 * math.pi * np.arange(n + 1) / points_per_turn
    r = spacing * phi / (2.0 * math.pi)
    cx, cy = center
    return np.stack([cx + r * np.cos(phi), cy + r * np.sin(phi)], axis=1)


def detection_trigger(buffer, threshold=DEFAULT_THRESHOLD):
    """True when the share of positive frames in ``buffer`` reaches ``threshold``."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    buffer = list(buffer)
    if not buffer:
        raise EmptyBuffer("detection trigger needs at least one frame")
    return sum(bool(f) for f in buffer) >= threshold * len(buffer)


class FrameBuffer:
    """Sliding window of per-frame detection flags; only judged once full."""

    def __init__(self, window=DEFAULT_WINDOW, threshold=DEFAULT_THRESHOLD):
        if window < 1:
            raise ValueError("window must be at least 1")
        self.frames = deque(maxlen=window)
        self.threshold = threshold

    def push(self, positive):
        self.frames.append(bool(positive))
        return self.triggered()

    def triggered(self):
        if len(self.frames) < self.frames.maxlen:
            return False
        return detection_trigger(self.frames, self.threshold)


def frame_has_detection(scene, waypoint, footprint, s_det, rng):
    """Whether the scout's detector fires on a frame centered at ``waypoint``.

    A frame is positive when some whale center lies in the square footprint
    and the detector catches it (probability ``s_det`` per visible whale).
    """
    half = footprint / 2
    centers = scene.corners().mean(axis=1)
    inside = np.all(np.abs(centers - np.asarray(waypoint)) <= half, axis=1)
    hits = rng.random(len(centers)) < s_det
    return bool(np.any(inside & hits))
