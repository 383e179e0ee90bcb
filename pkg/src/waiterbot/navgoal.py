"""Navigation-goal selection next to a piece of furniture.

Procedure: take the four points around the furniture footprint (edge
midpoints pushed out by robot radius + clearance), keep the one closest to
the robot, then search the grid window around it.  Each cell's risk is
augmented with a distance weight toward the candidate point, the weighted
values are summed over a square neighborhood per cell, and the admissible
cell (risk < 100, outside every footprint) with the lowest sum wins.

`select_goal` is the fast path (summed-area table); `brute_force_goal` is the
same contract as plain nested loops.  Both must return identical cells and
costs; the test suite enforces this exhaustively.  Keep the float expressions
(`sqrt(dx*dx + dy*dy)`, half-even rounding) in sync between the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .furniture import FurnitureInstance
from .geometry import Pose2D, point_in_convex_polygon
from .grid import RISK_MAX, CellIndex, GridMap, RiskField, cell_to_world, integral_image, window_sum


class NoGoalError(Exception):
    """No admissible cell in the candidate window."""


@dataclass(frozen=True)
class NavGoalParams:
    robot_radius: float = 0.25
    clearance: float = 0.2
    alpha: float = 10.0  # risk units added per meter of distance to the candidate
    window_half_width: float = 1.5
    neighborhood_radius: int | None = None  # cells; default ceil(robot_radius/res)

    def __post_init__(self) -> None:
        if min(self.robot_radius, self.clearance, self.alpha, self.window_half_width) < 0:
            raise ValueError("parameters must be non-negative")
        if self.window_half_width < self.robot_radius:
            raise ValueError("window_half_width must cover the robot radius")
        if self.neighborhood_radius is not None and self.neighborhood_radius < 0:
            raise ValueError("neighborhood_radius must be non-negative")

    def cell_neighborhood(self, resolution: float) -> int:
        if self.neighborhood_radius is not None:
            return self.neighborhood_radius
        return math.ceil(self.robot_radius / resolution)


@dataclass(frozen=True)
class NavGoal:
    cell: CellIndex
    pose: Pose2D
    cost: int


def candidate_points(instance: FurnitureInstance, params: NavGoalParams) -> list[tuple[float, float]]:
    """Four approach points (E, W, N, S edge midpoints pushed out by radius+clearance)."""
    off = params.robot_radius + params.clearance
    w, d = instance.dims[0], instance.dims[1]
    c, s = math.cos(instance.pose.theta), math.sin(instance.pose.theta)
    out = []
    for lx, ly in ((w / 2 + off, 0.0), (-w / 2 - off, 0.0), (0.0, d / 2 + off), (0.0, -d / 2 - off)):
        out.append((instance.pose.x + c * lx - s * ly, instance.pose.y + s * lx + c * ly))
    return out


def select_candidate(points: list[tuple[float, float]], robot_pose: Pose2D) -> tuple[float, float]:
    """Closest point to the robot; ties keep the earlier point (E, W, N, S order)."""
    best = points[0]
    best_d = math.dist(best, (robot_pose.x, robot_pose.y))
    for p in points[1:]:
        d = math.dist(p, (robot_pose.x, robot_pose.y))
        if d < best_d:
            best, best_d = p, d
    return best


def _axis_indices(center: float, half_width: float, origin: float, resolution: float,
                  size: int) -> list[int]:
    """Indices along one axis whose cell center lies within +-half_width of center."""
    lo = max(0, math.floor((center - half_width - origin) / resolution) - 1)
    hi = min(size - 1, math.floor((center + half_width - origin) / resolution) + 1)
    return [i for i in range(lo, hi + 1) if abs(origin + (i + 0.5) * resolution - center) <= half_width]


def _goal_from(grid: GridMap, target: FurnitureInstance, col: int, row: int, cost: int) -> NavGoal:
    cx, cy = cell_to_world(grid, CellIndex(col, row))
    heading = math.atan2(target.pose.y - cy, target.pose.x - cx)
    return NavGoal(CellIndex(col, row), Pose2D(cx, cy, heading), cost)


def select_goal(
    grid: GridMap,
    risk: RiskField,
    target: FurnitureInstance,
    robot_pose: Pose2D,
    params: NavGoalParams,
    instances: list[FurnitureInstance] | None = None,
) -> NavGoal:
    """Lowest-cost admissible cell near the candidate point (summed-area fast path)."""
    px, py = select_candidate(candidate_points(target, params), robot_pose)
    footprints = [inst.footprint() for inst in (instances if instances is not None else [target])]
    nr = params.cell_neighborhood(grid.resolution)
    whw = params.window_half_width
    res = grid.resolution
    ox, oy = grid.origin

    cols = _axis_indices(px, whw, ox, res, grid.width)
    rows = _axis_indices(py, whw, oy, res, grid.height)
    if not cols or not rows:
        raise NoGoalError("candidate window misses the map")

    # weighted totals over the window plus the neighborhood margin
    r0, r1 = max(0, rows[0] - nr), min(grid.height - 1, rows[-1] + nr)
    c0, c1 = max(0, cols[0] - nr), min(grid.width - 1, cols[-1] + nr)
    xs = ox + (np.arange(c0, c1 + 1) + 0.5) * res
    ys = oy + (np.arange(r0, r1 + 1) + 0.5) * res
    dx = xs[None, :] - px
    dy = ys[:, None] - py
    dists = np.sqrt(dx * dx + dy * dy)
    totals = risk.risk[r0 : r1 + 1, c0 : c1 + 1] + np.rint(params.alpha * dists).astype(np.int64)
    sat = integral_image(totals)

    best: tuple[int, float, int] | None = None
    best_cell = None
    for row in rows:
        for col in cols:
            if risk.risk[row, col] >= RISK_MAX:
                continue
            center = (ox + (col + 0.5) * res, oy + (row + 0.5) * res)
            if any(point_in_convex_polygon(center, fp) for fp in footprints):
                continue
            cost = window_sum(sat, col - c0, row - r0, nr)
            ddx = center[0] - px
            ddy = center[1] - py
            key = (cost, math.sqrt(ddx * ddx + ddy * ddy), row * grid.width + col)
            if best is None or key < best:
                best = key
                best_cell = (col, row)
    if best_cell is None:
        raise NoGoalError("no admissible cell in the candidate window")
    return _goal_from(grid, target, best_cell[0], best_cell[1], best[0])


def brute_force_goal(
    grid: GridMap,
    risk: RiskField,
    target: FurnitureInstance,
    robot_pose: Pose2D,
    params: NavGoalParams,
    instances: list[FurnitureInstance] | None = None,
) -> NavGoal:
    """Same contract as select_goal, as plain nested loops (reference oracle)."""
    px, py = select_candidate(candidate_points(target, params), robot_pose)
    footprints = [inst.footprint() for inst in (instances if instances is not None else [target])]
    nr = params.cell_neighborhood(grid.resolution)
    whw = params.window_half_width
    res = grid.resolution
    ox, oy = grid.origin

    def total(col: int, row: int) -> int:
        cx = ox + (col + 0.5) * res
        cy = oy + (row + 0.5) * res
        dx, dy = cx - px, cy - py
        return int(risk.risk[row, col]) + round(params.alpha * math.sqrt(dx * dx + dy * dy))

    best = None
    best_cell = None
    for row in range(grid.height):
        cy = oy + (row + 0.5) * res
        if abs(cy - py) > whw:
            continue
        for col in range(grid.width):
            cx = ox + (col + 0.5) * res
            if abs(cx - px) > whw:
                continue
            if int(risk.risk[row, col]) >= RISK_MAX:
                continue
            if any(point_in_convex_polygon((cx, cy), fp) for fp in footprints):
                continue
            cost = 0
            for nrow in range(max(0, row - nr), min(grid.height - 1, row + nr) + 1):
                for ncol in range(max(0, col - nr), min(grid.width - 1, col + nr) + 1):
                    cost += total(ncol, nrow)
            dx, dy = cx - px, cy - py
            key = (cost, math.sqrt(dx * dx + dy * dy), row * grid.width + col)
            if best is None or key < best:
                best = key
                best_cell = (col, row)
    if best_cell is None:
        raise NoGoalError("no admissible cell in the candidate window")
    return _goal_from(grid, target, best_cell[0], best_cell[1], best[0])
