"""Polyline path geometry: arc length, projection, tangents, lateral offsets."""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(theta, TWO_PI)
    if wrapped <= -math.pi:
        wrapped += TWO_PI
    return wrapped


class PolylinePath:
    """A path defined by a polyline centerline with a constant half-width.

    Provides arc-length parameterization, nearest-point projection with a
    signed lateral offset (positive to the left of the travel direction),
    and vectorized distance queries used by the raster sensor.
    """

    def __init__(self, points, half_width: float):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
            raise ValueError("path needs at least two 2D points")
        if half_width <= 0:
            raise ValueError("half_width must be positive")
        self.points = pts
        self.half_width = float(half_width)
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 0):
            raise ValueError("path contains a zero-length segment")
        self._seg = seg
        self._seg_len = seg_len
        self._cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.total_length = float(self._cum[-1])

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def goal(self) -> np.ndarray:
        return self.points[-1]

    def point_at(self, s: float) -> np.ndarray:
        """Centerline point at arc length s (clamped to the path extent)."""
        s = min(max(s, 0.0), self.total_length)
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self._seg) - 1)
        t = (s - self._cum[i]) / self._seg_len[i]
        return self.points[i] + t * self._seg[i]

    def tangent_angle_at(self, s: float) -> float:
        s = min(max(s, 0.0), self.total_length)
        i = int(np.searchsorted(self._cum, s, side="right") - 1)
        i = min(i, len(self._seg) - 1)
        return math.atan2(self._seg[i, 1], self._seg[i, 0])

    def project(self, x: float, y: float) -> tuple[float, float, float]:
        """Project a point onto the centerline.

        Returns (arc_length, signed_lateral, tangent_angle). Lateral is
        positive when the point lies to the left of the path direction.
        Ties between segments resolve to the lower segment index.
        """
        px = x - self.points[:-1, 0]
        py = y - self.points[:-1, 1]
        t = (px * self._seg[:, 0] + py * self._seg[:, 1]) / (self._seg_len**2)
        t = np.clip(t, 0.0, 1.0)
        fx = self.points[:-1, 0] + t * self._seg[:, 0]
        fy = self.points[:-1, 1] + t * self._seg[:, 1]
        d2 = (x - fx) ** 2 + (y - fy) ** 2
        i = int(np.argmin(d2))
        s = float(self._cum[i] + t[i] * self._seg_len[i])
        tangent = math.atan2(self._seg[i, 1], self._seg[i, 0])
        ux, uy = self._seg[i] / self._seg_len[i]
        lateral = ux * (y - fy[i]) - uy * (x - fx[i])
        return s, float(lateral), tangent

    def distance_to_centerline(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Unsigned distance from each query point to the centerline (vectorized)."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        px = xs[..., None] - self.points[:-1, 0]
        py = ys[..., None] - self.points[:-1, 1]
        t = (px * self._seg[:, 0] + py * self._seg[:, 1]) / (self._seg_len**2)
        t = np.clip(t, 0.0, 1.0)
        dx = px - t * self._seg[:, 0]
        dy = py - t * self._seg[:, 1]
        return np.sqrt(np.min(dx * dx + dy * dy, axis=-1))
