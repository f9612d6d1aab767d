"""Ground-plane geometry primitives: point-in-polygon, homography, headings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Raised for degenerate geometric input."""


@dataclass(frozen=True)
class Point2:
    """A point on the ground plane, in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def distance_to(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x, self.y)


Segment = Tuple[Point2, Point2]
Polygon = Sequence[Point2]

# Tolerance for on-boundary tests; positions are meters, so this is 1 um.
_EPS = 1e-6


def _on_segment(p: Point2, a: Point2, b: Point2) -> bool:
    cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
    seg_len = math.hypot(b.x - a.x, b.y - a.y)
    if seg_len == 0.0:
        return p.distance_to(a) <= _EPS
    if abs(cross) / seg_len > _EPS:
        return False
    dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)
    return -_EPS * seg_len <= dot <= seg_len * seg_len + _EPS * seg_len


def point_in_polygon(p: Point2, poly: Polygon) -> bool:
    """Ray-cast membership test; points on the boundary count as inside."""
    if len(poly) < 3:
        raise GeometryError(f"polygon needs >=3 vertices, got {len(poly)}")
    n = len(poly)
    for i in range(n):
        if _on_segment(p, poly[i], poly[(i + 1) % n]):
            return True
    inside = False
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if (a.y > p.y) != (b.y > p.y):
            x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y)
            if p.x < x_cross:
                inside = not inside
    return inside


def polygon_is_simple(poly: Polygon) -> bool:
    """True when no two non-adjacent edges intersect."""
    n = len(poly)
    if n < 3:
        return False

    def _segments_cross(p1, p2, p3, p4):
        def orient(a, b, c):
            v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
            return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

        o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
        o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
        return o1 != o2 and o3 != o4

    for i in range(n):
        for j in range(i + 1, n):
            # adjacent edges share a vertex; skip them
            if abs(i - j) <= 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]):
                return False
    return True


def apply_homography(h: np.ndarray, p_image: Tuple[float, float]) -> Point2:
    """Project an image-space point through a 3x3 homography to ground meters."""
    h = np.asarray(h, dtype=float)
    if h.shape != (3, 3):
        raise GeometryError(f"homography must be 3x3, got {h.shape}")
    u, v = p_image
    hx, hy, w = h @ np.array([u, v, 1.0])
    if abs(w) < 1e-12:
        raise GeometryError(f"point ({u}, {v}) maps to infinity (w={w})")
    return Point2(float(hx / w), float(hy / w))


def normalize_heading(dx: float, dy: float) -> float:
    """Heading of (dx, dy) in radians, [0, 2*pi), counter-clockwise from +x."""
    if dx == 0.0 and dy == 0.0:
        raise GeometryError("heading undefined for zero displacement")
    return math.atan2(dy, dx) % TWO_PI


def signed_heading_delta(h_from: float, h_to: float) -> float:
    """Smallest signed rotation taking h_from to h_to, in (-pi, pi]."""
    d = (h_to - h_from) % TWO_PI
    if d > math.pi:
        d -= TWO_PI
    return d


def point_segment_distance(p: Point2, seg: Segment) -> float:
    a, b = seg
    abx, aby = b.x - a.x, b.y - a.y
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return p.distance_to(a)
    t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / denom
    t = max(0.0, min(1.0, t))
    return math.hypot(p.x - (a.x + t * abx), p.y - (a.y + t * aby))
