"""Reference implementations used to cross-check the fast paths.

Everything in here is deliberately naive (plain loops, no acceleration
structures, no scipy) so the production code is validated against an
independent route.
"""

import math

import numpy as np

from waiterbot.grid import RISK_MAX, CellState


def naive_inflate(grid, radius: float) -> np.ndarray:
    """All-pairs distance check between cell centers."""
    h, w = grid.cells.shape
    seeds = [
        (col, row)
        for row in range(h)
        for col in range(w)
        if grid.cells[row, col] != CellState.FREE
    ]
    risk = np.zeros((h, w), dtype=np.int64)
    res = grid.resolution
    for row in range(h):
        for col in range(w):
            for scol, srow in seeds:
                d = math.sqrt(((col - scol) * res) ** 2 + ((row - srow) * res) ** 2)
                if d <= radius:
                    risk[row, col] = RISK_MAX
                    break
    return risk


def naive_window_sum(values: np.ndarray, col: int, row: int, r: int) -> int:
    h, w = values.shape
    total = 0
    for nrow in range(max(0, row - r), min(h - 1, row + r) + 1):
        for ncol in range(max(0, col - r), min(w - 1, col + r) + 1):
            total += int(values[nrow, ncol])
    return total


def relaxation_path_cost(risk: np.ndarray, start, goal) -> float | None:
    """Fixpoint relaxation over the 8-connected traversable graph."""
    h, w = risk.shape
    if risk[start[1], start[0]] >= RISK_MAX or risk[goal[1], goal[0]] >= RISK_MAX:
        return None
    dist = {(start[0], start[1]): 0.0}
    changed = True
    while changed:
        changed = False
        for (col, row), g in sorted(dist.items()):
            for dc in (-1, 0, 1):
                for dr in (-1, 0, 1):
                    if dc == 0 and dr == 0:
                        continue
                    nc, nr = col + dc, row + dr
                    if not (0 <= nc < w and 0 <= nr < h):
                        continue
                    if risk[nr, nc] >= RISK_MAX:
                        continue
                    ng = g + (math.sqrt(2.0) if dc and dr else 1.0)
                    if ng < dist.get((nc, nr), math.inf):
                        dist[(nc, nr)] = ng
                        changed = True
    return dist.get((goal[0], goal[1]))


def naive_clearance(occupied: np.ndarray, hull, pitch: float, s_lo: float, t_lo: float) -> np.ndarray:
    """Per-cell min distance to any occupied cell center or hull edge; -1 outside."""
    from waiterbot.geometry import point_in_convex_polygon, point_polygon_edge_distance

    n_rows, n_cols = occupied.shape
    occ_centers = [
        (s_lo + (col + 0.5) * pitch, t_lo + (row + 0.5) * pitch)
        for row in range(n_rows)
        for col in range(n_cols)
        if occupied[row, col]
    ]
    out = np.full((n_rows, n_cols), -1.0)
    for row in range(n_rows):
        for col in range(n_cols):
            if occupied[row, col]:
                continue
            cs = s_lo + (col + 0.5) * pitch
            ct = t_lo + (row + 0.5) * pitch
            if not point_in_convex_polygon((cs, ct), hull):
                continue
            best = point_polygon_edge_distance((cs, ct), hull)
            for os_, ot in occ_centers:
                d = math.sqrt((cs - os_) ** 2 + (ct - ot) ** 2)
                if d < best:
                    best = d
            out[row, col] = best
    return out
