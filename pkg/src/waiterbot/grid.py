"""Occupancy grid, obstacle inflation into a risk field, and window sums.

Grids are immutable snapshots: every "mutation" constructs a new map, so maps
and risk fields can be shared freely across threads.

Cell convention: cells[row, col]; cell (0, 0) has its corner at the map
origin and its center half a resolution further out.  The risk field keeps
the exact geometry of its source map and holds 100 inside the inflation
radius of any occupied/unknown cell, 0 elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, NamedTuple

import numpy as np
from scipy import ndimage

RISK_MAX = 100


class GridError(Exception):
    """Base class for grid failures."""


class BoundsError(GridError):
    """A point or cell index lies outside the map."""


class GridFormatError(GridError):
    """Malformed grid document; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class CellState(IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


GLYPHS = {CellState.FREE: ".", CellState.OCCUPIED: "#", CellState.UNKNOWN: "?"}
STATES = {g: s for s, g in GLYPHS.items()}


class CellIndex(NamedTuple):
    col: int
    row: int


@dataclass(frozen=True, eq=False)
class GridMap:
    """Fixed-resolution occupancy grid; cells is a (height, width) uint8 array."""

    resolution: float
    origin: tuple[float, float]
    cells: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.origin == other.origin
            and np.array_equal(self.cells, other.cells)
        )

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if self.cells.ndim != 2 or self.cells.size == 0:
            raise ValueError("cells must be a non-empty 2D array")
        c = np.ascontiguousarray(self.cells, dtype=np.uint8)
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    def in_bounds(self, c: CellIndex) -> bool:
        return 0 <= c.col < self.width and 0 <= c.row < self.height

    def state(self, c: CellIndex) -> CellState:
        if not self.in_bounds(c):
            raise BoundsError(f"cell {c} outside {self.width}x{self.height} map")
        return CellState(self.cells[c.row, c.col])

    def indices(self) -> Iterator[CellIndex]:
        for row in range(self.height):
            for col in range(self.width):
                yield CellIndex(col, row)

    def with_cells(self, cells: np.ndarray) -> "GridMap":
        return GridMap(self.resolution, self.origin, cells)


def world_to_cell(grid: GridMap, p: tuple[float, float]) -> CellIndex:
    """Cell containing world point p (floor semantics); raises BoundsError outside."""
    col = math.floor((p[0] - grid.origin[0]) / grid.resolution)
    row = math.floor((p[1] - grid.origin[1]) / grid.resolution)
    c = CellIndex(col, row)
    if not grid.in_bounds(c):
        raise BoundsError(f"point {p} outside map extent")
    return c


def cell_to_world(grid: GridMap, c: CellIndex) -> tuple[float, float]:
    """Center of cell c in world coordinates."""
    if not grid.in_bounds(c):
        raise BoundsError(f"cell {c} outside {grid.width}x{grid.height} map")
    return (
        grid.origin[0] + (c.col + 0.5) * grid.resolution,
        grid.origin[1] + (c.row + 0.5) * grid.resolution,
    )


@dataclass(frozen=True, eq=False)
class RiskField:
    """Per-cell risk on the same geometry as the source grid (0 or 100 here)."""

    resolution: float
    origin: tuple[float, float]
    risk: np.ndarray

    def __post_init__(self) -> None:
        r = np.ascontiguousarray(self.risk, dtype=np.int64)
        r.setflags(write=False)
        object.__setattr__(self, "risk", r)
        # summed-area table for O(1) window sums, cached once
        sat = np.zeros((r.shape[0] + 1, r.shape[1] + 1), dtype=np.int64)
        np.cumsum(np.cumsum(r, axis=0), axis=1, out=sat[1:, 1:])
        sat.setflags(write=False)
        object.__setattr__(self, "_sat", sat)

    @property
    def width(self) -> int:
        return self.risk.shape[1]

    @property
    def height(self) -> int:
        return self.risk.shape[0]

    def at(self, c: CellIndex) -> int:
        return int(self.risk[c.row, c.col])


def disc_offsets(radius: float, resolution: float) -> list[tuple[int, int]]:
    """Integer (dcol, drow) offsets whose center-to-center distance is <= radius."""
    reach = math.floor(radius / resolution) + 1
    out = []
    for dr in range(-reach, reach + 1):
        for dc in range(-reach, reach + 1):
            if math.sqrt((dc * resolution) ** 2 + (dr * resolution) ** 2) <= radius:
                out.append((dc, dr))
    return out


def inflate(grid: GridMap, radius: float) -> RiskField:
    """Risk field with 100 within `radius` of any OCCUPIED/UNKNOWN cell center."""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    seeds = grid.cells != CellState.FREE
    offsets = disc_offsets(radius, grid.resolution)
    reach = max(abs(v) for off in offsets for v in off) if offsets else 0
    size = 2 * reach + 1
    structure = np.zeros((size, size), dtype=bool)
    for dc, dr in offsets:
        structure[dr + reach, dc + reach] = True
    hit = ndimage.binary_dilation(seeds, structure=structure)
    risk = np.where(hit, RISK_MAX, 0).astype(np.int64)
    return RiskField(grid.resolution, grid.origin, risk)


def neighborhood_cost(field: RiskField, c: CellIndex, r: int) -> int:
    """Sum of risk over the (2r+1)^2 window centered at c, clipped to the map."""
    if r < 0:
        raise ValueError(f"window radius must be non-negative, got {r}")
    if not (0 <= c.col < field.width and 0 <= c.row < field.height):
        raise BoundsError(f"cell {c} outside {field.width}x{field.height} field")
    return window_sum(field._sat, c.col, c.row, r)


def window_sum(sat: np.ndarray, col: int, row: int, r: int) -> int:
    """Clipped square-window sum from a (h+1, w+1) summed-area table."""
    h, w = sat.shape[0] - 1, sat.shape[1] - 1
    r0, r1 = max(0, row - r), min(h - 1, row + r)
    c0, c1 = max(0, col - r), min(w - 1, col + r)
    return int(sat[r1 + 1, c1 + 1] - sat[r0, c1 + 1] - sat[r1 + 1, c0] + sat[r0, c0])


def integral_image(a: np.ndarray) -> np.ndarray:
    """(h+1, w+1) summed-area table of an integer array."""
    sat = np.zeros((a.shape[0] + 1, a.shape[1] + 1), dtype=np.int64)
    np.cumsum(np.cumsum(a, axis=0), axis=1, out=sat[1:, 1:])
    return sat


def save_grid(grid: GridMap) -> str:
    """Canonical text form: header line, then one glyph row per grid row."""
    lines = [
        f"gridmap v1 {grid.width} {grid.height} {grid.resolution!r} "
        f"{grid.origin[0]!r} {grid.origin[1]!r}"
    ]
    glyphs = np.array([GLYPHS[CellState.FREE], GLYPHS[CellState.OCCUPIED], GLYPHS[CellState.UNKNOWN]])
    for row in range(grid.height):
        lines.append("".join(glyphs[grid.cells[row]]))
    return "\n".join(lines) + "\n"


def load_grid(text: str) -> GridMap:
    """Parse the grid text format; raises GridFormatError naming the bad line."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise GridFormatError("empty document", 1)
    head = lines[0].split(" ")
    if len(head) != 7 or head[0] != "gridmap" or head[1] != "v1":
        raise GridFormatError(f"bad header {lines[0]!r}", 1)
    try:
        width, height = int(head[2]), int(head[3])
        resolution = float(head[4])
        origin = (float(head[5]), float(head[6]))
    except ValueError as e:
        raise GridFormatError(f"bad header field: {e}", 1) from None
    if width < 1 or height < 1 or resolution <= 0:
        raise GridFormatError("non-positive dimensions or resolution", 1)
    if len(lines) - 1 != height:
        raise GridFormatError(f"expected {height} rows, found {len(lines) - 1}", len(lines))
    cells = np.empty((height, width), dtype=np.uint8)
    for i, row_text in enumerate(lines[1:]):
        lineno = i + 2
        if len(row_text) != width:
            raise GridFormatError(f"row has {len(row_text)} glyphs, expected {width}", lineno)
        for j, g in enumerate(row_text):
            state = STATES.get(g)
            if state is None:
                raise GridFormatError(f"unknown glyph {g!r}", lineno)
            cells[i, j] = state
    return GridMap(resolution, origin, cells)
