"""Semi-dynamic furniture layer: template-scaled instances tracked by 3D IoU.

Detections carry a class label, a 3D center, dims and yaw.  Each class has a
unit-cube template whose primitives are scaled by the detected dims, so a
"table" keeps a free gap under its top slab in the collision world.  Tracking
associates detections to existing instances greedily by descending 3D IoU
(threshold 0.1); unmatched detections get fresh `<class>_<k>` ids that are
never reused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .geometry import (
    Box3,
    OrientedBox3,
    Pose2D,
    iou_3d,
    normalize_angle,
    point_in_convex_polygon,
    rect_corners,
)
from .grid import CellIndex, CellState, GridMap, cell_to_world

IOU_MATCH_THRESHOLD = 0.1


class FurnitureError(Exception):
    pass


class FurnitureNotFound(FurnitureError, LookupError):
    pass


class FrameOrderError(FurnitureError):
    """Detections arrived with a frame id not newer than the layer's."""


class TrackStatus(Enum):
    MATCHED = "matched"
    NEW = "new"


@dataclass(frozen=True)
class Detection3D:
    class_name: str
    center: tuple[float, float, float]
    dims: tuple[float, float, float]
    yaw: float
    frame_id: int

    def __post_init__(self) -> None:
        if min(self.dims) <= 0:
            raise ValueError(f"dims must be positive, got {self.dims}")
        if self.frame_id < 0:
            raise ValueError("frame_id must be non-negative")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    def box(self) -> OrientedBox3:
        return OrientedBox3(self.center, self.dims, self.yaw)


@dataclass(frozen=True)
class FurnitureTemplate:
    """Primitive boxes in unit space [0,1]^3, scaled componentwise on placement."""

    class_name: str
    primitives: tuple[Box3, ...]

    def __post_init__(self) -> None:
        if not self.primitives:
            raise ValueError("template needs at least one primitive")
        for p in self.primitives:
            if min(p.min_corner) < 0 or max(p.max_corner) > 1:
                raise ValueError(f"primitive {p} outside the unit cube")


def default_templates() -> dict[str, FurnitureTemplate]:
    """Table = top slab + 4 corner legs; chair = seat + 4 legs + backrest."""
    leg = 0.1
    table_legs = [
        Box3((x, y, 0.0), (x + leg, y + leg, 0.9))
        for x in (0.0, 1.0 - leg)
        for y in (0.0, 1.0 - leg)
    ]
    table = FurnitureTemplate("table", (Box3((0, 0, 0.9), (1, 1, 1)), *table_legs))
    chair_legs = [
        Box3((x, y, 0.0), (x + leg, y + leg, 0.45))
        for x in (0.0, 1.0 - leg)
        for y in (0.0, 1.0 - leg)
    ]
    chair = FurnitureTemplate(
        "chair",
        (Box3((0, 0, 0.45), (1, 1, 0.55)), *chair_legs, Box3((0, 0.9, 0.55), (1, 1, 1))),
    )
    return {"table": table, "chair": chair}


def solid_template(class_name: str) -> FurnitureTemplate:
    """Fallback for classes without a shaped template: one full box."""
    return FurnitureTemplate(class_name, (Box3((0, 0, 0), (1, 1, 1)),))


def scale_template(template: FurnitureTemplate, dims: tuple[float, float, float]) -> list[Box3]:
    """Scale unit-space primitives componentwise by (w, d, h)."""
    if min(dims) <= 0:
        raise ValueError(f"dims must be positive, got {dims}")
    w, d, h = dims
    return [
        Box3(
            (p.min_corner[0] * w, p.min_corner[1] * d, p.min_corner[2] * h),
            (p.max_corner[0] * w, p.max_corner[1] * d, p.max_corner[2] * h),
        )
        for p in template.primitives
    ]


@dataclass(frozen=True)
class FurnitureInstance:
    id: str
    class_name: str
    pose: Pose2D
    base_z: float
    dims: tuple[float, float, float]
    template: FurnitureTemplate
    last_seen: int

    def box(self) -> OrientedBox3:
        cz = self.base_z + self.dims[2] / 2.0
        return OrientedBox3((self.pose.x, self.pose.y, cz), self.dims, self.pose.theta)

    def footprint(self) -> list[tuple[float, float]]:
        """Full plan-view rectangle (w x d at the instance pose)."""
        return rect_corners(self.pose.x, self.pose.y, self.dims[0], self.dims[1], self.pose.theta)

    def scaled_primitives(self) -> list[Box3]:
        return scale_template(self.template, self.dims)

    def world_primitives(self) -> list[OrientedBox3]:
        """One oriented box per template primitive, placed at the instance pose."""
        c, s = math.cos(self.pose.theta), math.sin(self.pose.theta)
        w, d, _ = self.dims
        out = []
        for p in self.scaled_primitives():
            ex, ey, ez = p.extents
            # primitive center in the instance frame, plan origin at footprint center
            lx = (p.min_corner[0] + p.max_corner[0]) / 2.0 - w / 2.0
            ly = (p.min_corner[1] + p.max_corner[1]) / 2.0 - d / 2.0
            lz = (p.min_corner[2] + p.max_corner[2]) / 2.0
            out.append(
                OrientedBox3(
                    (
                        self.pose.x + c * lx - s * ly,
                        self.pose.y + s * lx + c * ly,
                        self.base_z + lz,
                    ),
                    (ex, ey, ez),
                    self.pose.theta,
                )
            )
        return out


def _instance_from(detection: Detection3D, instance_id: str,
                   templates: dict[str, FurnitureTemplate]) -> FurnitureInstance:
    template = templates.get(detection.class_name) or solid_template(detection.class_name)
    return FurnitureInstance(
        id=instance_id,
        class_name=detection.class_name,
        pose=Pose2D(detection.center[0], detection.center[1], detection.yaw),
        base_z=detection.center[2] - detection.dims[2] / 2.0,
        dims=detection.dims,
        template=template,
        last_seen=detection.frame_id,
    )


class FurnitureLayer:
    """Single-writer store of tracked furniture; reads hand out frozen instances."""

    def __init__(self, templates: dict[str, FurnitureTemplate] | None = None):
        self.templates = dict(templates) if templates is not None else default_templates()
        self._instances: dict[str, FurnitureInstance] = {}
        self._used_ids: set[str] = set()
        self._class_counts: dict[str, int] = {}
        self.last_frame = -1
        self.kitchen_id: str | None = None

    def _auto_id(self, class_name: str) -> str:
        k = self._class_counts.get(class_name, 0)
        candidate = f"{class_name}_{k}"
        while candidate in self._used_ids:
            k += 1
            candidate = f"{class_name}_{k}"
        self._class_counts[class_name] = k + 1
        return candidate

    def register(self, detection: Detection3D, instance_id: str | None = None) -> str:
        """Register one detection, with an explicit id or an auto-assigned one."""
        if instance_id is None:
            instance_id = self._auto_id(detection.class_name)
        elif instance_id in self._used_ids:
            raise FurnitureError(f"id {instance_id!r} already used")
        self._used_ids.add(instance_id)
        self._instances[instance_id] = _instance_from(detection, instance_id, self.templates)
        self.last_frame = max(self.last_frame, detection.frame_id)
        return instance_id

    def track_frame(self, detections: list[Detection3D]) -> list[tuple[str, TrackStatus]]:
        """Associate one frame of detections; returns (id, MATCHED|NEW) per detection."""
        if not detections:
            return []
        frames = {d.frame_id for d in detections}
        if len(frames) != 1:
            raise FrameOrderError(f"mixed frame ids in one batch: {sorted(frames)}")
        frame_id = detections[0].frame_id
        if frame_id <= self.last_frame:
            raise FrameOrderError(f"frame {frame_id} not newer than {self.last_frame}")

        # all candidate pairs above threshold, matched greedily by descending IoU
        pairs = []
        for di, det in enumerate(detections):
            dbox = det.box()
            for inst in self._instances.values():
                if inst.class_name != det.class_name:
                    continue
                v = iou_3d(dbox, inst.box())
                if v >= IOU_MATCH_THRESHOLD:
                    pairs.append((-v, di, inst.id))
        pairs.sort()

        assigned: dict[int, str] = {}
        taken: set[str] = set()
        for _, di, iid in pairs:
            if di in assigned or iid in taken:
                continue
            assigned[di] = iid
            taken.add(iid)

        results: list[tuple[str, TrackStatus]] = []
        for di, det in enumerate(detections):
            iid = assigned.get(di)
            if iid is not None:
                old = self._instances[iid]
                self._instances[iid] = replace(
                    _instance_from(det, iid, self.templates), template=old.template
                )
                results.append((iid, TrackStatus.MATCHED))
            else:
                results.append((self.register(det), TrackStatus.NEW))
        self.last_frame = frame_id
        return results

    def delete(self, instance_id: str) -> None:
        """Remove an instance; its id stays reserved forever."""
        if instance_id not in self._instances:
            raise FurnitureNotFound(instance_id)
        del self._instances[instance_id]
        if self.kitchen_id == instance_id:
            self.kitchen_id = None

    def get(self, instance_id: str) -> FurnitureInstance:
        try:
            return self._instances[instance_id]
        except KeyError:
            raise FurnitureNotFound(instance_id) from None

    def instances(self) -> list[FurnitureInstance]:
        return [self._instances[k] for k in sorted(self._instances)]

    def set_kitchen(self, instance_id: str) -> None:
        self.get(instance_id)
        self.kitchen_id = instance_id

    def virtual_obstacles(self, grid: GridMap) -> GridMap:
        """Copy of `grid` with every cell center inside a footprint set OCCUPIED."""
        cells = grid.cells.copy()
        cells.setflags(write=True)
        for inst in self.instances():
            poly = inst.footprint()
            xs = [p[0] for p in poly]
            ys = [p[1] for p in poly]
            c0 = max(0, math.floor((min(xs) - grid.origin[0]) / grid.resolution) - 1)
            r0 = max(0, math.floor((min(ys) - grid.origin[1]) / grid.resolution) - 1)
            c1 = min(grid.width - 1, math.floor((max(xs) - grid.origin[0]) / grid.resolution) + 1)
            r1 = min(grid.height - 1, math.floor((max(ys) - grid.origin[1]) / grid.resolution) + 1)
            for row in range(r0, r1 + 1):
                for col in range(c0, c1 + 1):
                    center = cell_to_world(grid, CellIndex(col, row))
                    if point_in_convex_polygon(center, poly):
                        cells[row, col] = CellState.OCCUPIED
        return grid.with_cells(cells)

    def export_collision_world(self) -> list[OrientedBox3]:
        """All scaled primitives of all instances, world-placed, ordered by id."""
        out: list[OrientedBox3] = []
        for inst in self.instances():
            out.extend(inst.world_primitives())
        return out
