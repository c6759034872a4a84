"""Small 2D/3D geometry helpers shared by the structural and layout stages.

Coordinates are meters in a right-handed, z-up frame. Polygons are lists of
(x, y) vertices; closed loops do not repeat the first vertex.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

Vec2 = tuple[float, float]
Vec3 = tuple[float, float, float]


def rot2(yaw: float) -> np.ndarray:
    """2x2 counterclockwise rotation matrix about +z."""
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


def rotate_xy(point: Sequence[float], yaw: float) -> Vec2:
    c, s = math.cos(yaw), math.sin(yaw)
    x, y = point[0], point[1]
    return (c * x - s * y, s * x + c * y)


def yaw_to_face(direction: Sequence[float]) -> float:
    """Yaw that turns the local front axis (0, -1) toward ``direction``."""
    dx, dy = direction[0], direction[1]
    return math.atan2(dx, -dy)


def snap_yaw(yaw: float, step: float = math.pi / 2) -> float:
    return round(yaw / step) * step


def aabb_of_points(points: Iterable[Sequence[float]]) -> tuple[Vec3, Vec3]:
    arr = np.asarray(list(points), dtype=float)
    if arr.size == 0:
        raise ValueError("empty point set has no bounding box")
    if arr.shape[1] == 2:
        arr = np.hstack([arr, np.zeros((len(arr), 1))])
    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    return (tuple(lo), tuple(hi))


def aabb_union(a: tuple[Vec3, Vec3], b: tuple[Vec3, Vec3]) -> tuple[Vec3, Vec3]:
    lo = tuple(min(a[0][i], b[0][i]) for i in range(3))
    hi = tuple(max(a[1][i], b[1][i]) for i in range(3))
    return (lo, hi)  # type: ignore[return-value]


def aabb_contains(outer: tuple[Vec3, Vec3], inner: tuple[Vec3, Vec3], eps: float = 1e-9) -> bool:
    return all(inner[0][i] >= outer[0][i] - eps for i in range(3)) and all(
        inner[1][i] <= outer[1][i] + eps for i in range(3)
    )


def rects_overlap_xy(a_min, a_max, b_min, b_max, eps: float = 1e-9) -> bool:
    """Strict interior overlap of two xy rectangles (touching edges do not count)."""
    if a_max[0] <= b_min[0] + eps or b_max[0] <= a_min[0] + eps:
        return False
    if a_max[1] <= b_min[1] + eps or b_max[1] <= a_min[1] + eps:
        return False
    return True


def interval_overlap(a0: float, a1: float, b0: float, b1: float) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def polygon_area(poly: Sequence[Vec2]) -> float:
    """Signed area; positive for counterclockwise winding."""
    total = 0.0
    n = len(poly)
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        total += x0 * y1 - x1 * y0
    return total / 2.0


def ensure_ccw(poly: Sequence[Vec2]) -> list[Vec2]:
    pts = list(poly)
    if polygon_area(pts) < 0:
        pts.reverse()
    return pts


def point_in_polygon(point: Sequence[float], poly: Sequence[Vec2], eps: float = 1e-12) -> bool:
    """Ray-cast containment test; boundary points count as inside."""
    x, y = point[0], point[1]
    n = len(poly)
    inside = False
    for i in range(n):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % n]
        # on-segment check
        if min(x0, x1) - eps <= x <= max(x0, x1) + eps and min(y0, y1) - eps <= y <= max(y0, y1) + eps:
            cross = (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0)
            if abs(cross) <= eps * max(1.0, abs(x1 - x0) + abs(y1 - y0)):
                return True
        if (y0 > y) != (y1 > y):
            t = (y - y0) / (y1 - y0)
            xi = x0 + t * (x1 - x0)
            if x < xi:
                inside = not inside
    return inside


def segments_properly_intersect(p1: Vec2, p2: Vec2, p3: Vec2, p4: Vec2) -> bool:
    """True when the open segments cross at a single interior point."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


def polygon_is_simple(poly: Sequence[Vec2]) -> bool:
    n = len(poly)
    for i in range(n):
        a1, a2 = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = poly[j], poly[(j + 1) % n]
            if segments_properly_intersect(a1, a2, b1, b2):
                return False
    return True


def ear_clip(poly: Sequence[Vec2]) -> list[tuple[int, int, int]]:
    """Triangulate a simple polygon into index triples (O(n^2) ear clipping)."""
    pts = list(poly)
    n = len(pts)
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    ccw = polygon_area(pts) > 0
    indices = list(range(n))
    if not ccw:
        indices.reverse()

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def in_triangle(p, a, b, c):
        d1 = cross(a, b, p)
        d2 = cross(b, c, p)
        d3 = cross(c, a, p)
        return d1 >= -1e-12 and d2 >= -1e-12 and d3 >= -1e-12

    triangles: list[tuple[int, int, int]] = []
    guard = 0
    while len(indices) > 3:
        guard += 1
        if guard > 10 * n * n:
            raise ValueError("ear clipping failed; polygon may be degenerate")
        found = False
        m = len(indices)
        for k in range(m):
            i0, i1, i2 = indices[k - 1], indices[k], indices[(k + 1) % m]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if cross(a, b, c) <= 1e-12:
                continue
            if any(
                in_triangle(pts[j], a, b, c)
                for j in indices
                if j not in (i0, i1, i2)
            ):
                continue
            triangles.append((i0, i1, i2))
            indices.pop(k)
            found = True
            break
        if not found:
            raise ValueError("no ear found; polygon is not simple")
    triangles.append(tuple(indices))  # type: ignore[arg-type]
    return triangles


def arc_radius(chord: float, sagitta: float) -> float:
    """Circle radius from a chord length and its sagitta (chord height)."""
    if sagitta <= 0:
        raise ValueError("sagitta must be positive")
    return (chord * chord / 4.0 + sagitta * sagitta) / (2.0 * sagitta)


def discretize_arc(start: Vec2, end: Vec2, h_chord: float, segments: int) -> list[Vec2]:
    """Sample an arc between two points into ``segments`` chords.

    The arc bulges to the right of start->end for positive ``h_chord`` and to
    the left for negative values; ``|h_chord|`` is the sagitta. Returns
    ``segments + 1`` points including exact copies of the endpoints.
    """
    if segments < 1:
        raise ValueError("segments must be >= 1")
    sx, sy = start
    ex, ey = end
    if abs(h_chord) < 1e-12:
        return [
            (sx + (ex - sx) * k / segments, sy + (ey - sy) * k / segments)
            for k in range(segments + 1)
        ]
    chord = math.hypot(ex - sx, ey - sy)
    if abs(h_chord) >= chord / 2.0:
        raise ValueError("chord height must stay below half the chord length")
    h = abs(h_chord)
    radius = arc_radius(chord, h)
    mid = ((sx + ex) / 2.0, (sy + ey) / 2.0)
    # unit normal to the right of the start->end direction
    dx, dy = (ex - sx) / chord, (ey - sy) / chord
    nx, ny = dy, -dx
    side = 1.0 if h_chord > 0 else -1.0
    center = (mid[0] - side * nx * (radius - h), mid[1] - side * ny * (radius - h))
    a0 = math.atan2(sy - center[1], sx - center[0])
    a1 = math.atan2(ey - center[1], ex - center[0])
    sweep = a1 - a0
    while sweep <= -math.pi:
        sweep += 2 * math.pi
    while sweep > math.pi:
        sweep -= 2 * math.pi
    pts: list[Vec2] = [start]
    for k in range(1, segments):
        a = a0 + sweep * k / segments
        pts.append((center[0] + radius * math.cos(a), center[1] + radius * math.sin(a)))
    pts.append(end)
    return pts
