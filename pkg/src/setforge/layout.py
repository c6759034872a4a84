"""Object layout: stable slots, anchor-relative placement and refinement.

Floor objects occupy a region (a room polygon or a four-column unit cell).
Stable objects take corner/edge/center slots; edge and center placements
become anchors that relative objects reference through a spatial relation and
a distance level. Placement of a relative object evaluates

    position = anchor_position + lambda(distance) * R(anchor_yaw) @ basis(relation)

after which collision resolution separates overlapping footprints and
orientation refinement turns objects toward their anchor or away from walls.
Assets face local -y at yaw zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .geometry import Vec2, Vec3, point_in_polygon, rotate_xy, snap_yaw, yaw_to_face
from .retrieval import AssetRecord

logger = logging.getLogger(__name__)

CLEARANCE = 0.05  # gap kept between stable objects and their walls
ANCHOR_FACE_RADIUS = 1.5  # relative objects closer than this turn toward their anchor
WALL_SNAP_DISTANCE = 0.1
WALL_OBJECT_MAX_FRACTION = 0.6
WALL_OBJECT_HANG_HEIGHT = 1.5

PRIORITY = {"corner": 0, "edge": 1, "center": 2, "relative": 3, "wall": 4}


class LayoutError(Exception):
    pass


class ObjectLargerThanRegionError(LayoutError):
    pass


class UnknownAnchorError(LayoutError):
    pass


class UnresolvableError(LayoutError):
    def __init__(self, message: str, placements: Optional[list] = None):
        super().__init__(message)
        self.placements = placements or []


class WallFullyOccupiedError(LayoutError):
    pass


@dataclass
class PlacementRegion:
    kind: str  # room | unit
    polygon: list[Vec2]
    id: str | tuple  # room name or (i1, j1, i2, j2)

    @property
    def tag(self) -> str:
        if isinstance(self.id, tuple):
            return f"unit_{self.id[0]}_{self.id[1]}"
        return str(self.id)

    def hull(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.polygon]
        ys = [p[1] for p in self.polygon]
        return (min(xs), min(ys), max(xs), max(ys))

    def centroid(self) -> Vec2:
        pts = self.polygon
        area2 = 0.0
        cx = cy = 0.0
        n = len(pts)
        for i in range(n):
            x0, y0 = pts[i]
            x1, y1 = pts[(i + 1) % n]
            cross = x0 * y1 - x1 * y0
            area2 += cross
            cx += (x0 + x1) * cross
            cy += (y0 + y1) * cross
        if abs(area2) < 1e-12:
            return (sum(p[0] for p in pts) / n, sum(p[1] for p in pts) / n)
        return (cx / (3 * area2), cy / (3 * area2))


@dataclass(frozen=True)
class LayoutTriplet:
    anchor: str  # anchor_ID issued by a stable placement
    relation: str  # left | right | in_front_of | behind | above
    distance: str  # near | far
    object_query: str


@dataclass
class PlacementConfig:
    lam: dict[str, float] = field(default_factory=lambda: {"near": 0.6, "far": 1.8})
    basis: dict[str, Vec3] = field(
        default_factory=lambda: {
            "right": (1.0, 0.0, 0.0),
            "left": (-1.0, 0.0, 0.0),
            "in_front_of": (0.0, -1.0, 0.0),
            "behind": (0.0, 1.0, 0.0),
            "above": (0.0, 0.0, 1.0),
        }
    )
    collision_max_iters: int = 64
    collision_step: float = 0.02

    def validate(self) -> None:
        if self.lam["near"] >= self.lam["far"]:
            raise LayoutError("distance level 'near' must be shorter than 'far'")
        for name, vec in self.basis.items():
            if abs(math.hypot(*vec) - 1.0) > 1e-9:
                raise LayoutError(f"basis vector for {name!r} is not unit length")


@dataclass
class Placement:
    object_id: str
    position: Vec3
    yaw: float
    scale: Vec3
    slot: str  # corner | edge | center | relative | wall
    anchor_id: Optional[str] = None  # issued id (edge/center anchors only)
    anchor_ref: Optional[str] = None  # referenced anchor (relative objects)
    stacked: bool = False  # placed above its anchor
    clamped: bool = False
    sequence: int = 0
    native_size: Vec3 = (1.0, 1.0, 1.0)

    @property
    def height(self) -> float:
        return self.native_size[2] * self.scale[2]

    def footprint_half(self) -> tuple[float, float]:
        w = self.native_size[0] * self.scale[0]
        d = self.native_size[1] * self.scale[1]
        c, s = abs(math.cos(self.yaw)), abs(math.sin(self.yaw))
        return ((w * c + d * s) / 2.0, (w * s + d * c) / 2.0)

    def aabb_xy(self) -> tuple[float, float, float, float]:
        hx, hy = self.footprint_half()
        return (self.position[0] - hx, self.position[1] - hy, self.position[0] + hx, self.position[1] + hy)


def aabb_in_polygon(aabb: tuple[float, float, float, float], polygon: Sequence[Vec2]) -> bool:
    x0, y0, x1, y1 = aabb
    probes = [
        (x0, y0), (x1, y0), (x1, y1), (x0, y1),
        ((x0 + x1) / 2, y0), ((x0 + x1) / 2, y1), (x0, (y0 + y1) / 2), (x1, (y0 + y1) / 2),
        ((x0 + x1) / 2, (y0 + y1) / 2),
    ]
    return all(point_in_polygon(p, polygon) for p in probes)


def _clamp_into_region(placement: Placement, region: PlacementRegion) -> bool:
    """Pull a placement inside the region (hull first, then polygon). Returns
    True when the position changed."""
    hx, hy = placement.footprint_half()
    x0, y0, x1, y1 = region.hull()
    px, py, pz = placement.position
    nx = min(max(px, x0 + hx), x1 - hx)
    ny = min(max(py, y0 + hy), y1 - hy)
    moved = (nx, ny) != (px, py)
    placement.position = (nx, ny, pz)
    if len(region.polygon) > 4:
        cx, cy = region.centroid()
        for _ in range(40):
            if aabb_in_polygon(placement.aabb_xy(), region.polygon):
                break
            px, py, pz = placement.position
            dx, dy = cx - px, cy - py
            norm = math.hypot(dx, dy)
            if norm < 1e-9:
                break
            placement.position = (px + 0.1 * dx / norm, py + 0.1 * dy / norm, pz)
            moved = True
    return moved


_CORNERS = ((0, 0), (1, 0), (1, 1), (0, 1))  # (x side, y side) per corner index
_EDGE_INWARD = {0: (0.0, 1.0), 1: (-1.0, 0.0), 2: (0.0, -1.0), 3: (1.0, 0.0)}  # south east north west


def place_stable(
    region: PlacementRegion,
    asset: AssetRecord,
    slot: str,
    slot_index: int = 0,
    anchor_index: Optional[int] = None,
    sequence: int = 0,
) -> Placement:
    """Place a stable object in a corner, edge or center slot.

    Corners touch their two walls with 0.05 m clearance and face the room
    diagonal; edge objects back onto the edge midpoint facing inward; center
    objects sit on the region centroid at yaw 0. Edge and center placements
    are anchors and receive an id ``<region>_aK``.

    Raises:
        ObjectLargerThanRegionError: footprint exceeds the region.
    """
    if asset.native_size is None:
        raise LayoutError(f"asset {asset.id!r} has no native size")
    w, d, h = asset.native_size
    x0, y0, x1, y1 = region.hull()
    if slot == "center":
        yaw = 0.0
        cx, cy = region.centroid()
        position = (cx, cy, 0.0)
    elif slot == "corner":
        sx, sy = _CORNERS[slot_index % 4]
        corner = (x1 if sx else x0, y1 if sy else y0)
        center = ((x0 + x1) / 2.0, (y0 + y1) / 2.0)
        direction = (center[0] - corner[0], center[1] - corner[1])
        norm = math.hypot(*direction) or 1.0
        yaw = yaw_to_face((direction[0] / norm, direction[1] / norm))
        c, s = abs(math.cos(yaw)), abs(math.sin(yaw))
        hx, hy = ((w * c + d * s) / 2.0, (w * s + d * c) / 2.0)
        px = corner[0] + (CLEARANCE + hx) * (1 if sx == 0 else -1)
        py = corner[1] + (CLEARANCE + hy) * (1 if sy == 0 else -1)
        position = (px, py, 0.0)
    elif slot == "edge":
        inward = _EDGE_INWARD[slot_index % 4]
        yaw = yaw_to_face(inward)
        mid = {
            0: ((x0 + x1) / 2.0, y0),
            1: (x1, (y0 + y1) / 2.0),
            2: ((x0 + x1) / 2.0, y1),
            3: (x0, (y0 + y1) / 2.0),
        }[slot_index % 4]
        c, s = abs(math.cos(yaw)), abs(math.sin(yaw))
        hx, hy = ((w * c + d * s) / 2.0, (w * s + d * c) / 2.0)
        depth_half = hx if inward[0] else hy
        position = (
            mid[0] + inward[0] * (CLEARANCE + depth_half),
            mid[1] + inward[1] * (CLEARANCE + depth_half),
            0.0,
        )
    else:
        raise LayoutError(f"unknown stable slot {slot!r}")

    placement = Placement(
        object_id=asset.id,
        position=position,
        yaw=yaw,
        scale=(1.0, 1.0, 1.0),
        slot=slot,
        sequence=sequence,
        native_size=(w, d, h),
    )
    hx, hy = placement.footprint_half()
    if 2 * hx + 2 * CLEARANCE > (x1 - x0) or 2 * hy + 2 * CLEARANCE > (y1 - y0):
        raise ObjectLargerThanRegionError(
            f"asset {asset.id!r} ({w} x {d}) does not fit region {region.tag}"
        )
    if slot in ("edge", "center"):
        if anchor_index is None:
            raise LayoutError("edge/center placements need an anchor index")
        placement.anchor_id = f"{region.tag}_a{anchor_index}"
    return placement


def place_relative(
    triplet: LayoutTriplet,
    anchors: dict[str, Placement],
    cfg: PlacementConfig,
    asset: AssetRecord,
    region: Optional[PlacementRegion] = None,
    sequence: int = 0,
) -> Placement:
    """Place an object from its anchor via relation and distance level.

    ``above`` swaps the distance factor for the anchor's height so stacked
    objects rest on top; other relations move in the anchor's rotated frame.
    Positions landing outside the region are flagged and clamped inward.

    Raises:
        UnknownAnchorError: the referenced anchor was never issued.
    """
    if triplet.anchor not in anchors:
        raise UnknownAnchorError(f"anchor {triplet.anchor!r} does not exist")
    if triplet.relation not in cfg.basis:
        raise LayoutError(f"unknown spatial relation {triplet.relation!r}")
    if triplet.distance not in cfg.lam:
        raise LayoutError(f"unknown distance level {triplet.distance!r}")
    anchor = anchors[triplet.anchor]
    basis = cfg.basis[triplet.relation]
    stacked = triplet.relation == "above"
    factor = anchor.height if stacked else cfg.lam[triplet.distance]
    bx, by = rotate_xy((basis[0], basis[1]), anchor.yaw)
    position = (
        anchor.position[0] + factor * bx,
        anchor.position[1] + factor * by,
        anchor.position[2] + factor * basis[2],
    )
    placement = Placement(
        object_id=asset.id,
        position=position,
        yaw=anchor.yaw,
        scale=(1.0, 1.0, 1.0),
        slot="relative",
        anchor_ref=triplet.anchor,
        stacked=stacked,
        sequence=sequence,
        native_size=asset.native_size or (1.0, 1.0, 1.0),
    )
    if region is not None and not stacked:
        if not aabb_in_polygon(placement.aabb_xy(), region.polygon):
            logger.warning(
                "relative placement of %s from %s lands outside %s; clamping",
                asset.id,
                triplet.anchor,
                region.tag,
            )
            _clamp_into_region(placement, region)
            placement.clamped = True
    return placement


def _xy_overlap(a: Placement, b: Placement) -> Optional[tuple[float, float]]:
    ax0, ay0, ax1, ay1 = a.aabb_xy()
    bx0, by0, bx1, by1 = b.aabb_xy()
    ox = min(ax1, bx1) - max(ax0, bx0)
    oy = min(ay1, by1) - max(ay0, by0)
    if ox > 1e-9 and oy > 1e-9:
        return (ox, oy)
    return None


def _sanctioned(a: Placement, b: Placement) -> bool:
    return (a.stacked and a.anchor_ref and a.anchor_ref == b.anchor_id) or (
        b.stacked and b.anchor_ref and b.anchor_ref == a.anchor_id
    )


def avoid_collision(
    placements: Sequence[Placement],
    region: PlacementRegion,
    cfg: PlacementConfig,
) -> list[Placement]:
    """Separate overlapping xy footprints by pushing lower-priority objects.

    Deterministic: pairs are scanned in priority-then-sequence order and the
    loser moves along the smaller-overlap axis by overlap + step, staying
    inside the region. Objects stacked above their own anchor are exempt.

    Raises:
        UnresolvableError: overlaps remain after the iteration budget.
    """
    cfg.validate()
    result = [replace(p) for p in placements]
    order = sorted(range(len(result)), key=lambda k: (PRIORITY[result[k].slot], result[k].sequence))

    def first_overlap():
        for a_pos in range(len(order)):
            for b_pos in range(a_pos + 1, len(order)):
                a, b = result[order[a_pos]], result[order[b_pos]]
                if _sanctioned(a, b):
                    continue
                overlap = _xy_overlap(a, b)
                if overlap:
                    return a, b, overlap
        return None

    def overlap_area(a: Placement, b: Placement) -> float:
        overlap = _xy_overlap(a, b)
        return overlap[0] * overlap[1] if overlap else 0.0

    for _ in range(cfg.collision_max_iters):
        hit = first_overlap()
        if hit is None:
            return result
        keeper, mover, (ox, oy) = hit
        if (PRIORITY[mover.slot], mover.sequence) < (PRIORITY[keeper.slot], keeper.sequence):
            keeper, mover = mover, keeper
        # push along the smaller-overlap axis away from the keeper; when a wall
        # clamp blocks that, fall back to the other axis, then reversed signs
        before = overlap_area(keeper, mover)
        start = mover.position
        primary = 0 if ox <= oy else 1
        candidates = []
        for axis in (primary, 1 - primary):
            away = 1.0 if start[axis] >= keeper.position[axis] else -1.0
            push = (ox if axis == 0 else oy) + cfg.collision_step
            candidates.append((axis, away * push))
        candidates.extend([(axis, -delta) for axis, delta in candidates])
        for axis, delta in candidates:
            pos = list(start)
            pos[axis] += delta
            mover.position = tuple(pos)
            _clamp_into_region(mover, region)
            if overlap_area(keeper, mover) < before - 1e-12:
                break
            mover.position = start
    if first_overlap() is not None:
        raise UnresolvableError(
            f"could not separate placements in {region.tag} within {cfg.collision_max_iters} iterations",
            placements=result,
        )
    return result


def refine_orientation(placements: Sequence[Placement], region: PlacementRegion) -> list[Placement]:
    """Turn relative objects toward their nearby anchor; snap wall-backed
    objects to face the interior. Yaw changes snap to quarter turns."""
    result = [replace(p) for p in placements]
    anchors = {p.anchor_id: p for p in result if p.anchor_id}
    x0, y0, x1, y1 = region.hull()
    for placement in result:
        if placement.stacked:
            continue
        if placement.slot == "relative" and placement.anchor_ref in anchors:
            anchor = anchors[placement.anchor_ref]
            dx = anchor.position[0] - placement.position[0]
            dy = anchor.position[1] - placement.position[1]
            if 1e-9 < math.hypot(dx, dy) <= ANCHOR_FACE_RADIUS:
                placement.yaw = snap_yaw(yaw_to_face((dx, dy)))
                continue
        ax0, ay0, ax1, ay1 = placement.aabb_xy()
        near = []
        if ay0 - y0 <= WALL_SNAP_DISTANCE:
            near.append((0.0, 1.0))  # south wall -> face +y
        if y1 - ay1 <= WALL_SNAP_DISTANCE:
            near.append((0.0, -1.0))
        if ax0 - x0 <= WALL_SNAP_DISTANCE:
            near.append((1.0, 0.0))
        if x1 - ax1 <= WALL_SNAP_DISTANCE:
            near.append((-1.0, 0.0))
        if len(near) == 1:
            placement.yaw = snap_yaw(yaw_to_face(near[0]))
    return result


def place_wall_object(
    wall,
    asset: AssetRecord,
    hang_height: float = WALL_OBJECT_HANG_HEIGHT,
    sequence: int = 0,
) -> Placement:
    """Hang a wall-mount asset on a straight wall, avoiding its openings.

    The asset faces the room interior, is uniformly shrunk to at most 60% of
    the wall length, and centers on the widest free span at 1.5 m height.

    Raises:
        WallFullyOccupiedError: no free span fits the object.
    """
    from .openings import YAW_FOR_SIDE

    frame = wall.metadata.get("wall")
    if frame is None:
        raise LayoutError(f"element {wall.attribute_id!r} is not a straight wall")
    if asset.native_size is None:
        raise LayoutError(f"asset {asset.id!r} has no native size")
    w, d, h = asset.native_size
    length = frame["length"]
    scale = min(1.0, WALL_OBJECT_MAX_FRACTION * length / w)
    width = w * scale
    z0 = hang_height - h * scale / 2.0
    z1 = hang_height + h * scale / 2.0

    blockers = sorted(
        (hole["u0"], hole["u1"])
        for hole in frame["holes"]
        if hole["z1"] > z0 and hole["z0"] < z1
    )
    spans = []
    cursor = 0.0
    for u0, u1 in blockers:
        if u0 > cursor:
            spans.append((cursor, u0))
        cursor = max(cursor, u1)
    if cursor < length:
        spans.append((cursor, length))
    usable = [s for s in spans if s[1] - s[0] >= width]
    if not usable:
        raise WallFullyOccupiedError(
            f"wall {wall.attribute_id!r} has no {width:.2f} m free span for {asset.id!r}"
        )
    mid = length / 2.0
    containing = [s for s in usable if s[0] <= mid <= s[1]]
    span = containing[0] if containing else max(usable, key=lambda s: (s[1] - s[0], -s[0]))
    u_pos = (span[0] + span[1]) / 2.0

    ox, oy = frame["origin"]
    dx, dy = frame["dir"]
    nx, ny = frame["outward"]
    v_pos = frame["v_range"][0] - (d * scale) / 2.0  # back flush with the interior face
    position = (ox + u_pos * dx + v_pos * nx, oy + u_pos * dy + v_pos * ny, z0)
    return Placement(
        object_id=asset.id,
        position=position,
        yaw=YAW_FOR_SIDE[frame["side"]],
        scale=(scale, scale, scale),
        slot="wall",
        sequence=sequence,
        native_size=(w, d, h),
    )
