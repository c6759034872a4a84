"""Wall openings and door/window fitting.

Wall-structure scenes cut rectangular holes through wall prisms and fit
retrieved assets into them; column-structure scenes never cut geometry:
door and window panels drop into the natural gaps between columns under
four placement rules (doors mid-row, long windows mid-column, short windows
on the remaining perimeter and on room partitions).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import SceneElement, Transform
from .floorplan import ColumnGridSpec, build_wall_mesh
from .geometry import yaw_to_face
from .retrieval import AssetRecord

DEFAULT_DOOR = (1.0, 2.1)  # width x height, meters
DEFAULT_WINDOW = (1.2, 1.0)
MIN_MULLION = 0.1  # clearance kept between two holes in one wall
MIN_LINTEL = 0.3  # solid band kept above any opening
SHORT_WINDOW_SILL = 0.9  # column-gap short windows start at this height


class OpeningError(Exception):
    pass


class OpeningTooLargeError(OpeningError):
    pass


class OverlapWithExistingOpeningError(OpeningError):
    pass


class OpeningOnArcError(OpeningError):
    pass


class DegenerateAssetError(OpeningError):
    pass


class PartitionOnPerimeterError(OpeningError):
    pass


@dataclass
class OpeningSpec:
    target: str  # roomX_idY wall attribute
    kind: str  # door | window
    width: float = 0.0  # 0 -> kind default
    height: float = 0.0
    horizontal_offset: float = 0.0  # from the wall's left end, room-interior view
    asset_query: str = ""

    def resolved_size(self) -> tuple[float, float]:
        default = DEFAULT_DOOR if self.kind == "door" else DEFAULT_WINDOW
        return (self.width or default[0], self.height or default[1])


@dataclass
class Opening:
    """A hole cut into a wall, remembered for asset fitting and drawings."""

    wall: SceneElement
    spec: OpeningSpec
    hole: dict  # u0/u1/z0/z1 in the wall frame


def open_wall(wall: SceneElement, spec: OpeningSpec) -> Opening:
    """Cut a rectangular hole through both faces of a wall prism.

    Door holes start at the floor; window holes are centered vertically.
    The wall mesh is rebuilt on a shared vertex grid, so it stays watertight
    around the hole frame.

    Raises:
        OpeningOnArcError: target is a curved wall.
        OpeningTooLargeError: the hole does not fit the wall.
        OverlapWithExistingOpeningError: closer than 0.1 m to another hole.
    """
    if "arc" in wall.metadata:
        raise OpeningOnArcError(f"wall {wall.attribute_id!r} is curved; openings need a straight wall")
    frame = wall.metadata.get("wall")
    if frame is None:
        raise OpeningError(f"element {wall.attribute_id!r} is not a wall")
    width, height = spec.resolved_size()
    length, wall_height = frame["length"], frame["height"]
    if spec.horizontal_offset < 0 or spec.horizontal_offset + width > length + 1e-9:
        raise OpeningTooLargeError(
            f"opening [{spec.horizontal_offset}, {spec.horizontal_offset + width}] exceeds wall length {length}"
        )
    if height > wall_height - MIN_LINTEL + 1e-9:
        raise OpeningTooLargeError(
            f"opening height {height} leaves no lintel on a {wall_height} m wall"
        )
    if spec.kind == "door":
        z0, z1 = 0.0, height
    else:
        z0 = (wall_height - height) / 2.0
        z1 = z0 + height
    u0 = spec.horizontal_offset
    u1 = u0 + width
    for other in frame["holes"]:
        if u1 + MIN_MULLION > other["u0"] and other["u1"] + MIN_MULLION > u0:
            raise OverlapWithExistingOpeningError(
                f"opening [{u0}, {u1}] too close to existing hole [{other['u0']}, {other['u1']}]"
            )
    hole = {"kind": spec.kind, "u0": u0, "u1": u1, "z0": z0, "z1": z1}
    frame["holes"].append(hole)
    wall.vertices, wall.faces = build_wall_mesh(frame)
    return Opening(wall=wall, spec=spec, hole=hole)


def hole_world_box(frame: dict, hole: dict) -> tuple[tuple, tuple]:
    """World-space AABB of a hole's tunnel through the wall."""
    ox, oy = frame["origin"]
    dx, dy = frame["dir"]
    nx, ny = frame["outward"]
    v0, v1 = frame["v_range"]
    corners = []
    for u in (hole["u0"], hole["u1"]):
        for v in (v0, v1):
            corners.append((ox + u * dx + v * nx, oy + u * dy + v * ny))
    xs = [c[0] for c in corners]
    ys = [c[1] for c in corners]
    return ((min(xs), min(ys), hole["z0"]), (max(xs), max(ys), hole["z1"]))


#: wall side -> yaw turning an asset's front (-y locally) toward the room
YAW_FOR_SIDE = {1: math.pi / 2, 2: math.pi, 3: 0.0, 4: -math.pi / 2}


def fit_asset(
    opening: Opening,
    asset: AssetRecord,
    mesh: Optional[tuple[list, list]] = None,
    attribute_id: str = "",
) -> SceneElement:
    """Rotate, scale and translate an asset into an opening.

    Yaw follows the wall orientation so the asset front faces the room
    interior; per-axis scale maps the native size onto the opening (the
    thickness axis onto the wall thickness); translation centers the asset in
    the hole.

    Raises:
        DegenerateAssetError: asset has a zero-extent bounding box.
    """
    if asset.native_size is None or any(v <= 1e-12 for v in asset.native_size):
        raise DegenerateAssetError(f"asset {asset.id!r} has no usable bounding box")
    frame = opening.wall.metadata["wall"]
    hole = opening.hole
    native_w, native_d, native_h = asset.native_size
    width = hole["u1"] - hole["u0"]
    height = hole["z1"] - hole["z0"]
    scale = (width / native_w, frame["thickness"] / native_d, height / native_h)
    yaw = YAW_FOR_SIDE[frame["side"]]

    ox, oy = frame["origin"]
    dx, dy = frame["dir"]
    nx, ny = frame["outward"]
    u_mid = (hole["u0"] + hole["u1"]) / 2.0
    v_mid = (frame["v_range"][0] + frame["v_range"][1]) / 2.0
    position = (ox + u_mid * dx + v_mid * nx, oy + u_mid * dy + v_mid * ny, hole["z0"])

    if mesh is None:
        from .core import box_mesh

        mesh = box_mesh((-native_w / 2, -native_d / 2, 0.0), (native_w / 2, native_d / 2, native_h))
    vertices, faces = mesh
    return SceneElement(
        attribute_id=attribute_id,
        vertices=list(vertices),
        faces=list(faces),
        transform=Transform(translation=position, yaw=yaw, scale=scale),
        material_ref=None,
        metadata={"asset": {"id": asset.id, "kind": opening.spec.kind, "wall": opening.wall.attribute_id}},
    )


# --- column-structure placement rules -------------------------------------------

#: gap between two adjacent columns: ("h", i, j) joins (i,j)-(i,j+1),
#: ("v", i, j) joins (i,j)-(i+1,j)
GapRef = tuple[str, int, int]


@dataclass
class ColumnSlot:
    gap: GapRef
    fill: str  # door | long_window | short_window | partition_short_window
    asset_query: str = ""


@dataclass
class ColumnOpeningPlan:
    slots: list[ColumnSlot] = field(default_factory=list)

    def by_fill(self, fill: str) -> list[ColumnSlot]:
        return [s for s in self.slots if s.fill == fill]


def perimeter_gaps(spec: ColumnGridSpec) -> list[GapRef]:
    gaps: list[GapRef] = []
    for j in range(spec.cols - 1):
        gaps.append(("h", 0, j))
        gaps.append(("h", spec.rows - 1, j))
    for i in range(spec.rows - 1):
        gaps.append(("v", i, 0))
        gaps.append(("v", i, spec.cols - 1))
    return gaps


def _is_perimeter(spec: ColumnGridSpec, gap: GapRef) -> bool:
    kind, i, j = gap
    if kind == "h":
        return i in (0, spec.rows - 1)
    return j in (0, spec.cols - 1)


def plan_column_openings(
    spec: ColumnGridSpec,
    partitions: Sequence[GapRef] = (),
    styles: Optional[dict[str, str]] = None,
) -> ColumnOpeningPlan:
    """Assign a fill to every perimeter gap plus the supplied partition gaps.

    Rule order: doors at the middle gap of the first and last rows, long
    windows at the middle gap of the first and last columns, short windows on
    every remaining perimeter gap, and short windows on partition gaps.

    Raises:
        PartitionOnPerimeterError: a partition gap lies on the perimeter.
    """
    spec.validate()
    styles = styles or {}
    plan = ColumnOpeningPlan()
    assigned: set[GapRef] = set()

    def add(gap: GapRef, fill: str) -> None:
        if gap in assigned:
            raise OpeningError(f"gap {gap} assigned twice")
        assigned.add(gap)
        query = styles.get("short_window", "") if fill == "partition_short_window" else styles.get(fill, "")
        plan.slots.append(ColumnSlot(gap=gap, fill=fill, asset_query=query))

    door_j = (spec.cols - 2) // 2  # lower middle gap for even gap counts
    add(("h", 0, door_j), "door")
    add(("h", spec.rows - 1, door_j), "door")
    long_i = (spec.rows - 2) // 2
    add(("v", long_i, 0), "long_window")
    add(("v", long_i, spec.cols - 1), "long_window")
    for gap in perimeter_gaps(spec):
        if gap not in assigned:
            add(gap, "short_window")
    for gap in partitions:
        gap = (gap[0], int(gap[1]), int(gap[2]))
        kind, i, j = gap
        if kind not in ("h", "v"):
            raise OpeningError(f"unknown gap kind {kind!r}")
        if kind == "h" and not (0 <= i < spec.rows and 0 <= j < spec.cols - 1):
            raise OpeningError(f"gap {gap} outside the grid")
        if kind == "v" and not (0 <= i < spec.rows - 1 and 0 <= j < spec.cols):
            raise OpeningError(f"gap {gap} outside the grid")
        if _is_perimeter(spec, gap):
            raise PartitionOnPerimeterError(f"partition gap {gap} lies on the perimeter")
        add(gap, "partition_short_window")
    return plan


def gap_geometry(spec: ColumnGridSpec, gap: GapRef) -> dict:
    """Clear span, center and facing for one inter-column gap."""
    kind, i, j = gap
    r = spec.column_radius
    if kind == "h":
        (x0, y) = spec.center(i, j)
        (x1, _) = spec.center(i, j + 1)
        center = ((x0 + x1) / 2.0, y)
        clear = (x1 - x0) - 2 * r
        if i == 0:
            yaw = math.pi  # front toward +y, into the scene
        elif i == spec.rows - 1:
            yaw = 0.0
        else:
            yaw = math.pi
    else:
        (x, y0) = spec.center(i, j)
        (_, y1) = spec.center(i + 1, j)
        center = (x, (y0 + y1) / 2.0)
        clear = (y1 - y0) - 2 * r
        if j == 0:
            yaw = math.pi / 2  # front toward +x
        elif j == spec.cols - 1:
            yaw = -math.pi / 2
        else:
            yaw = math.pi / 2
    return {"center": center, "clear": clear, "yaw": yaw}


def fill_column_gap(
    spec: ColumnGridSpec,
    slot: ColumnSlot,
    asset: AssetRecord,
    mesh: Optional[tuple[list, list]] = None,
    attribute_id: str = "",
) -> SceneElement:
    """Scale a door/window panel into a column gap (no opening is cut).

    Doors rise from the floor, long windows run floor to beam, short windows
    sit on a 0.9 m sill. Panel thickness stays native.
    """
    if asset.native_size is None or any(v <= 1e-12 for v in asset.native_size):
        raise DegenerateAssetError(f"asset {asset.id!r} has no usable bounding box")
    geo = gap_geometry(spec, slot.gap)
    usable_top = spec.column_height - spec.beam_section[1]
    if slot.fill == "door":
        z0, z1 = 0.0, min(DEFAULT_DOOR[1], usable_top - 0.1)
    elif slot.fill == "long_window":
        z0, z1 = 0.0, usable_top
    else:
        z0, z1 = SHORT_WINDOW_SILL, usable_top
    native_w, native_d, native_h = asset.native_size
    scale = (geo["clear"] / native_w, 1.0, (z1 - z0) / native_h)
    if mesh is None:
        from .core import box_mesh

        mesh = box_mesh((-native_w / 2, -native_d / 2, 0.0), (native_w / 2, native_d / 2, native_h))
    vertices, faces = mesh
    return SceneElement(
        attribute_id=attribute_id,
        vertices=list(vertices),
        faces=list(faces),
        transform=Transform(translation=(geo["center"][0], geo["center"][1], z0), yaw=geo["yaw"], scale=scale),
        metadata={"asset": {"id": asset.id, "kind": slot.fill, "gap": list(slot.gap)}},
    )
