"""Plan-view geometry helpers: poses, oriented boxes, convex polygon math.

Everything here is pure and deterministic; the tracker, the grid projection
and the navigation-goal search all share these primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    r = theta % TWO_PI
    if r > math.pi:
        r -= TWO_PI
    return r


@dataclass(frozen=True)
class Pose2D:
    """Planar pose in meters/radians; theta is normalized to (-pi, pi]."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass(frozen=True)
class Box3:
    """Axis-aligned box given by min/max corners (used for template primitives)."""

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self) -> None:
        for lo, hi in zip(self.min_corner, self.max_corner):
            if not lo < hi:
                raise ValueError(f"degenerate box: {self.min_corner}..{self.max_corner}")

    @property
    def extents(self) -> tuple[float, float, float]:
        return tuple(hi - lo for lo, hi in zip(self.min_corner, self.max_corner))


@dataclass(frozen=True)
class OrientedBox3:
    """3D box with a yaw-only rotation: center, full dims (w, d, h), yaw."""

    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float

    def __post_init__(self) -> None:
        if min(self.dims) <= 0:
            raise ValueError(f"dims must be positive, got {self.dims}")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    def footprint(self) -> list[tuple[float, float]]:
        return rect_corners(self.center[0], self.center[1], self.dims[0], self.dims[1], self.yaw)

    @property
    def z_interval(self) -> tuple[float, float]:
        half = self.dims[2] / 2.0
        return (self.center[2] - half, self.center[2] + half)

    @property
    def volume(self) -> float:
        # shoelace area and interval-difference height so identical boxes give
        # bit-equal intersection and union volumes (IoU == 1.0 exactly)
        lo, hi = self.z_interval
        return polygon_area(self.footprint()) * (hi - lo)


def rect_corners(cx: float, cy: float, w: float, d: float, yaw: float) -> list[tuple[float, float]]:
    """CCW corners of a w x d rectangle centered at (cx, cy), rotated by yaw."""
    c, s = math.cos(yaw), math.sin(yaw)
    hw, hd = w / 2.0, d / 2.0
    out = []
    for lx, ly in ((hw, hd), (-hw, hd), (-hw, -hd), (hw, -hd)):
        out.append((cx + c * lx - s * ly, cy + s * lx + c * ly))
    return out


def polygon_area(pts: list[tuple[float, float]]) -> float:
    """Shoelace area (absolute value)."""
    n = len(pts)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        acc += x1 * y2 - x2 * y1
    return abs(acc) / 2.0


def clip_polygon(subject: list[tuple[float, float]], clip: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a polygon against a convex CCW clip polygon."""
    out = list(subject)
    n = len(clip)
    for i in range(n):
        if not out:
            return []
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp = out
        out = []

        def inside(p: tuple[float, float]) -> bool:
            return ex * (p[1] - ay) - ey * (p[0] - ax) >= 0.0

        def intersect(p: tuple[float, float], q: tuple[float, float]) -> tuple[float, float]:
            dx, dy = q[0] - p[0], q[1] - p[1]
            denom = ex * dy - ey * dx
            t = (ex * (ay - p[1]) - ey * (ax - p[0])) / denom
            return (p[0] + t * dx, p[1] + t * dy)

        for j in range(len(inp)):
            cur = inp[j]
            prev = inp[j - 1]
            if inside(cur):
                if not inside(prev):
                    out.append(intersect(prev, cur))
                out.append(cur)
            elif inside(prev):
                out.append(intersect(prev, cur))
    return out


def intersection_area(a: list[tuple[float, float]], b: list[tuple[float, float]]) -> float:
    return polygon_area(clip_polygon(a, b))


def point_in_convex_polygon(p: tuple[float, float], poly: list[tuple[float, float]]) -> bool:
    """Closed containment test for a CCW convex polygon."""
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) < 0.0:
            return False
    return True


def iou_3d(a: OrientedBox3, b: OrientedBox3) -> float:
    """3D IoU for yaw-oriented boxes: clipped footprint area x vertical overlap."""
    alo, ahi = a.z_interval
    blo, bhi = b.z_interval
    dz = min(ahi, bhi) - max(alo, blo)
    if dz <= 0.0:
        return 0.0
    inter = intersection_area(a.footprint(), b.footprint()) * dz
    if inter <= 0.0:
        return 0.0
    union = a.volume + b.volume - inter
    return inter / union


def convex_hull(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Monotone-chain convex hull, CCW, no repeated endpoint."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def point_segment_distance(p: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> float:
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.sqrt((p[0] - ax) ** 2 + (p[1] - ay) ** 2)
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / seg2
    t = max(0.0, min(1.0, t))
    qx, qy = ax + t * dx, ay + t * dy
    return math.sqrt((p[0] - qx) ** 2 + (p[1] - qy) ** 2)


def point_polygon_edge_distance(p: tuple[float, float], poly: list[tuple[float, float]]) -> float:
    """Distance from a point to the boundary of a polygon."""
    n = len(poly)
    return min(point_segment_distance(p, poly[i], poly[(i + 1) % n]) for i in range(n))
