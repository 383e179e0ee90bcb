"""Placement-area detection: RANSAC plane fit, then a clearance search.

The plane is fit from 3-point hypotheses scored by inlier count and refined
by a least-squares eigen refit over the winning inlier set.  Placement then
rasterizes the inlier hull at 2 cm, marks cells occupied where off-plane
points project from the band above the surface, and picks the free cell with
the largest distance to the nearest occupied cell or hull edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import convex_hull, point_in_convex_polygon, point_polygon_edge_distance

OCCUPANCY_BAND_M = 0.30
GRID_PITCH_M = 0.02
CLEARANCE_MARGIN_M = 0.02


class PlacementError(Exception):
    pass


class PlaneFitError(PlacementError):
    """Too few points or every sampled triple degenerate."""


class InsufficientSupportError(PlacementError):
    """Best hypothesis explains too small a fraction of the cloud."""


class NoSpaceError(PlacementError):
    """No free cell offers the required clearance."""


@dataclass(frozen=True)
class Plane:
    """Unit normal (n_z >= 0 by convention) and offset d with n.p + d = 0."""

    normal: tuple[float, float, float]
    d: float

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(v * v for v in self.normal))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"normal must be unit length, |n| = {norm}")

    def signed_distance(self, p) -> float:
        return self.normal[0] * p[0] + self.normal[1] * p[1] + self.normal[2] * p[2] + self.d


@dataclass(frozen=True)
class RansacParams:
    iterations: int = 200
    inlier_eps: float = 0.01
    min_inlier_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_eps <= 0:
            raise ValueError("inlier_eps must be positive")
        if not 0.0 <= self.min_inlier_fraction <= 1.0:
            raise ValueError("min_inlier_fraction must be in [0, 1]")


def load_cloud(text: str) -> np.ndarray:
    """Parse `x y z` triples, one per line; returns an (n, 3) float array."""
    points = []
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise PlacementError(f"line {i}: expected 3 values, got {len(parts)}")
        try:
            points.append([float(v) for v in parts])
        except ValueError:
            raise PlacementError(f"line {i}: non-numeric value in {line!r}") from None
    return np.asarray(points, dtype=np.float64).reshape(-1, 3)


def save_cloud(points: np.ndarray) -> str:
    return "".join(
        f"{float(x)!r} {float(y)!r} {float(z)!r}\n"
        for x, y, z in np.asarray(points, dtype=np.float64)
    )


def _orient(n: np.ndarray) -> np.ndarray:
    if n[2] < 0 or (n[2] == 0 and (n[1] < 0 or (n[1] == 0 and n[0] < 0))):
        n = -n
    return n + 0.0  # fold -0.0 into 0.0


def _refit(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares plane through points: smallest eigenvector of the covariance."""
    centroid = points.mean(axis=0)
    shifted = points - centroid
    cov = shifted.T @ shifted
    _, vecs = np.linalg.eigh(cov)
    n = _orient(vecs[:, 0])
    return n, float(-n @ centroid)


def ransac_plane(cloud: np.ndarray, params: RansacParams) -> tuple[Plane, np.ndarray]:
    """Best-of-N plane and its inlier indices; deterministic for a fixed seed."""
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("cloud must be an (n, 3) array")
    n_pts = len(pts)
    if n_pts < 3:
        raise PlaneFitError(f"need at least 3 points, got {n_pts}")

    rng = np.random.default_rng(params.seed)
    best_count = -1
    best_inliers: np.ndarray | None = None
    for _ in range(params.iterations):
        idx = rng.choice(n_pts, size=3, replace=False)
        a, b, c = pts[idx]
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            continue
        n = n / norm
        d = -n @ a
        dists = np.abs(pts @ n + d)
        inliers = dists <= params.inlier_eps
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None:
        raise PlaneFitError("every sampled triple was degenerate")
    if best_count < params.min_inlier_fraction * n_pts:
        raise InsufficientSupportError(
            f"best hypothesis explains {best_count}/{n_pts} points, "
            f"below fraction {params.min_inlier_fraction}"
        )
    inlier_idx = np.flatnonzero(best_inliers)
    n, d = _refit(pts[inlier_idx])
    return Plane((float(n[0]), float(n[1]), float(n[2])), d), inlier_idx


def plane_basis(plane: Plane) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic orthonormal (u, v, n) frame with u, v spanning the plane."""
    n = np.asarray(plane.normal)
    seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = seed - (seed @ n) * n
    u = u / np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v, n


def find_placement(
    cloud: np.ndarray,
    plane: Plane,
    inliers: np.ndarray,
    object_radius: float,
    pitch: float = GRID_PITCH_M,
    band: float = OCCUPANCY_BAND_M,
    margin: float = CLEARANCE_MARGIN_M,
) -> tuple[float, float, float]:
    """Free point on the plane with the largest clearance (>= radius + margin)."""
    if object_radius <= 0:
        raise ValueError("object_radius must be positive")
    pts = np.asarray(cloud, dtype=np.float64)
    u, v, n = plane_basis(plane)
    origin3 = -plane.d * n  # a point on the plane

    rel = pts - origin3
    s = rel @ u
    t = rel @ v
    h = pts @ n + plane.d

    inlier_mask = np.zeros(len(pts), dtype=bool)
    inlier_mask[np.asarray(inliers, dtype=int)] = True
    hull_pts = [(float(a), float(b)) for a, b in zip(s[inlier_mask], t[inlier_mask])]
    hull = convex_hull(hull_pts)
    if len(hull) < 3:
        raise NoSpaceError("inlier hull is degenerate")

    s_lo, t_lo = min(p[0] for p in hull), min(p[1] for p in hull)
    n_cols = max(1, math.ceil((max(p[0] for p in hull) - s_lo) / pitch))
    n_rows = max(1, math.ceil((max(p[1] for p in hull) - t_lo) / pitch))

    occupied = np.zeros((n_rows, n_cols), dtype=bool)
    above = ~inlier_mask & (h > 0) & (h <= band)
    for si, ti in zip(s[above], t[above]):
        col = math.floor((si - s_lo) / pitch)
        row = math.floor((ti - t_lo) / pitch)
        if 0 <= col < n_cols and 0 <= row < n_rows:
            occupied[row, col] = True

    in_hull = np.zeros((n_rows, n_cols), dtype=bool)
    edge_dist = np.zeros((n_rows, n_cols), dtype=np.float64)
    for row in range(n_rows):
        for col in range(n_cols):
            cs = s_lo + (col + 0.5) * pitch
            ct = t_lo + (row + 0.5) * pitch
            if point_in_convex_polygon((cs, ct), hull):
                in_hull[row, col] = True
                edge_dist[row, col] = point_polygon_edge_distance((cs, ct), hull)

    if occupied.any():
        obstacle_dist = ndimage.distance_transform_edt(~occupied) * pitch
    else:
        obstacle_dist = np.full((n_rows, n_cols), np.inf)
    clearance = np.minimum(obstacle_dist, edge_dist)
    clearance[~in_hull | occupied] = -1.0

    flat = int(np.argmax(clearance))  # row-major argmax = row-major tie-break
    row, col = divmod(flat, n_cols)
    if clearance[row, col] < object_radius + margin:
        raise NoSpaceError(
            f"best clearance {clearance[row, col]:.3f} m below "
            f"required {object_radius + margin:.3f} m"
        )
    cs = s_lo + (col + 0.5) * pitch
    ct = t_lo + (row + 0.5) * pitch
    p = origin3 + cs * u + ct * v
    return (float(p[0]), float(p[1]), float(p[2]))
