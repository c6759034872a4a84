"""Floorplan realization: room placement, boundary edges, walls and column grids.

Wall-structure scenes start from per-room sizes plus an adjacency graph; rooms
are axis-aligned rectangles placed breadth-first from room1 at the origin.
Column-structure scenes are regular grids of columns joined by beams.

Conventions fixed here:
  * relation (a, b, east) reads "b lies east of a"; east/west neighbors align
    their min-y with the reference, north/south neighbors align min-x.
  * room polygon corners run counterclockwise from the min corner, so edge
    index 0 is the south side, 1 east, 2 north, 3 west.
  * wall prisms sit outside the room on external sides and straddle the
    boundary line (half thickness each way) on shared sides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import core
from .core import EAST, NORTH, SOUTH, WEST, SceneElement, Transform, wall_attribute
from .geometry import (
    Vec2,
    discretize_arc,
    ear_clip,
    ensure_ccw,
    interval_overlap,
    polygon_is_simple,
    rects_overlap_xy,
)

MAX_ROOMS = 8
MIN_SHARED_WALL = 0.9  # meters of boundary two adjacent rooms must share

RELATIONS = ("east", "west", "north", "south")
_OPPOSITE = {"east": "west", "west": "east", "north": "south", "south": "north"}

#: side index -> (edge polygon index, interior-view left->right unit direction)
_SIDE_EDGE_INDEX = {SOUTH: 0, EAST: 1, NORTH: 2, WEST: 3}
_EDGE_INDEX_SIDE = {v: k for k, v in _SIDE_EDGE_INDEX.items()}


class FloorplanError(Exception):
    pass


class UnplaceableRoomError(FloorplanError):
    pass


class DisconnectedGraphError(FloorplanError):
    pass


class ArcOnInternalEdgeError(FloorplanError):
    pass


class OpenLoopError(FloorplanError):
    pass


class SelfIntersectionError(FloorplanError):
    pass


class ThicknessOutOfRangeError(FloorplanError):
    pass


@dataclass
class RoomSpec:
    """Rectangular room, optionally with arc deformations on external edges."""

    name: str
    width: float
    depth: float
    arc_edges: list[tuple[int, float]] = field(default_factory=list)  # (edge index, chord height)

    def validate(self) -> None:
        if not (1.0 <= self.width <= 50.0 and 1.0 <= self.depth <= 50.0):
            raise FloorplanError(
                f"{self.name}: width/depth must be within [1, 50] m, got {self.width} x {self.depth}"
            )
        for edge_index, h_chord in self.arc_edges:
            if edge_index not in (0, 1, 2, 3):
                raise FloorplanError(f"{self.name}: arc edge index {edge_index} out of range")
            chord = self.width if edge_index in (0, 2) else self.depth
            if abs(h_chord) >= chord / 2.0:
                raise FloorplanError(
                    f"{self.name}: chord height {h_chord} must stay below half the chord ({chord / 2.0})"
                )


@dataclass(frozen=True)
class AdjacencyRelation:
    room_a: str
    room_b: str
    relation: str  # east | west | north | south

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise FloorplanError(f"unknown relation {self.relation!r}")
        if self.room_a == self.room_b:
            raise FloorplanError(f"relation may not pair {self.room_a!r} with itself")


@dataclass
class AdjacencySpec:
    relations: list[AdjacencyRelation] = field(default_factory=list)

    @classmethod
    def of(cls, *triples: tuple[str, str, str]) -> "AdjacencySpec":
        return cls([AdjacencyRelation(*t) for t in triples])


@dataclass
class Edge:
    """One maximal boundary wall segment, directed counterclockwise around its
    primary owner room."""

    kind: str  # line | arc
    start: Vec2
    end: Vec2
    classification: str  # external | internal
    owners: list[tuple[str, int]]  # (room name, side) — primary owner first
    h_chord: float = 0.0

    @property
    def owner_rooms(self) -> list[str]:
        return [room for room, _ in self.owners]

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])


@dataclass
class PlacedFloorplan:
    rooms: dict[str, RoomSpec]
    room_origins: dict[str, Vec2]
    wall_thickness: float = 0.2
    wall_height: float = 3.0

    def bounds(self, name: str) -> tuple[float, float, float, float]:
        x0, y0 = self.room_origins[name]
        spec = self.rooms[name]
        return (x0, y0, x0 + spec.width, y0 + spec.depth)

    def polygon(self, name: str) -> list[Vec2]:
        x0, y0, x1, y1 = self.bounds(name)
        return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]

    @property
    def room_polygons(self) -> dict[str, list[Vec2]]:
        return {name: self.polygon(name) for name in self.rooms}


def _neighbor_origin(plan_bounds, relation: str, ref: str, spec: RoomSpec) -> Vec2:
    x0, y0, x1, y1 = plan_bounds[ref]
    if relation == "east":
        return (x1, y0)
    if relation == "west":
        return (x0 - spec.width, y0)
    if relation == "north":
        return (x0, y1)
    return (x0, y0 - spec.depth)  # south


def place_rooms(
    rooms: Sequence[RoomSpec],
    adjacency: AdjacencySpec,
    wall_thickness: float = 0.2,
    wall_height: float = 3.0,
) -> PlacedFloorplan:
    """Place rooms breadth-first from the first room at the origin.

    Every relation must hold on the finished plan (shared boundary of at least
    0.9 m) and room interiors must stay pairwise disjoint.

    Raises:
        DisconnectedGraphError: some room is unreachable from the first.
        UnplaceableRoomError: a relation cannot be satisfied without overlap.
    """
    if not rooms:
        raise FloorplanError("at least one room is required")
    if len(rooms) > MAX_ROOMS:
        raise FloorplanError(f"at most {MAX_ROOMS} rooms are supported, got {len(rooms)}")
    by_name: dict[str, RoomSpec] = {}
    for spec in rooms:
        spec.validate()
        if spec.name in by_name:
            raise FloorplanError(f"duplicate room name {spec.name!r}")
        by_name[spec.name] = spec
    for rel in adjacency.relations:
        for name in (rel.room_a, rel.room_b):
            if name not in by_name:
                raise FloorplanError(f"relation references undeclared room {name!r}")

    # undirected view: (neighbor, relation-of-neighbor-to-me)
    neighbors: dict[str, list[tuple[str, str]]] = {spec.name: [] for spec in rooms}
    for rel in adjacency.relations:
        neighbors[rel.room_a].append((rel.room_b, rel.relation))
        neighbors[rel.room_b].append((rel.room_a, _OPPOSITE[rel.relation]))

    root = rooms[0].name
    origins: dict[str, Vec2] = {root: (0.0, 0.0)}
    bounds: dict[str, tuple[float, float, float, float]] = {}

    def set_bounds(name: str) -> None:
        x0, y0 = origins[name]
        spec = by_name[name]
        bounds[name] = (x0, y0, x0 + spec.width, y0 + spec.depth)

    set_bounds(root)
    queue = [root]
    while queue:
        current = queue.pop(0)
        for other, relation in neighbors[current]:
            if other in origins:
                continue
            origins[other] = _neighbor_origin(bounds, relation, current, by_name[other])
            set_bounds(other)
            queue.append(other)

    missing = [name for name in by_name if name not in origins]
    if missing:
        raise DisconnectedGraphError(f"rooms unreachable from {root!r}: {missing}")

    plan = PlacedFloorplan(
        rooms={spec.name: spec for spec in rooms},
        room_origins=origins,
        wall_thickness=wall_thickness,
        wall_height=wall_height,
    )

    for rel in adjacency.relations:
        if not _relation_satisfied(bounds[rel.room_a], bounds[rel.room_b], rel.relation):
            raise UnplaceableRoomError(
                f"relation ({rel.room_a}, {rel.room_b}, {rel.relation}) is not satisfied by the placement"
            )

    names = list(by_name)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            ax0, ay0, ax1, ay1 = bounds[a]
            bx0, by0, bx1, by1 = bounds[b]
            if rects_overlap_xy((ax0, ay0), (ax1, ay1), (bx0, by0), (bx1, by1)):
                raise UnplaceableRoomError(f"rooms {a!r} and {b!r} overlap")
    return plan


def _relation_satisfied(a, b, relation: str, tol: float = 1e-9) -> bool:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    if relation == "east":
        return abs(bx0 - ax1) <= tol and interval_overlap(ay0, ay1, by0, by1) >= MIN_SHARED_WALL
    if relation == "west":
        return abs(bx1 - ax0) <= tol and interval_overlap(ay0, ay1, by0, by1) >= MIN_SHARED_WALL
    if relation == "north":
        return abs(by0 - ay1) <= tol and interval_overlap(ax0, ax1, bx0, bx1) >= MIN_SHARED_WALL
    return abs(by1 - ay0) <= tol and interval_overlap(ax0, ax1, bx0, bx1) >= MIN_SHARED_WALL


# --- boundary edge extraction -------------------------------------------------

_SIDE_CCW = {  # side -> room-rect corner pair (CCW order)
    SOUTH: (0, 1),
    EAST: (1, 2),
    NORTH: (2, 3),
    WEST: (3, 0),
}


def _room_sides(plan: PlacedFloorplan, name: str):
    corners = plan.polygon(name)
    for side, (i0, i1) in _SIDE_CCW.items():
        yield side, corners[i0], corners[i1]


def parse_edge(plan: PlacedFloorplan) -> list[Edge]:
    """Infer the plan's boundary wall segments.

    Segments coincident between two rooms merge into a single internal edge;
    everything else is external. Arc substitutions from the room specs apply
    afterwards and are legal only on fully external sides.

    Raises:
        ArcOnInternalEdgeError: an arc was requested on a (partially) shared side.
    """
    tol = 1e-9
    horizontal: dict[float, list] = {}
    vertical: dict[float, list] = {}

    def level_key(levels: dict, value: float) -> float:
        for known in levels:
            if abs(known - value) <= tol:
                return known
        return value

    for name in plan.rooms:
        for side, a, b in _room_sides(plan, name):
            if side in (SOUTH, NORTH):
                key = level_key(horizontal, a[1])
                horizontal.setdefault(key, []).append((min(a[0], b[0]), max(a[0], b[0]), name, side))
            else:
                key = level_key(vertical, a[0])
                vertical.setdefault(key, []).append((min(a[1], b[1]), max(a[1], b[1]), name, side))

    edges: list[Edge] = []

    def room_number(name: str) -> int:
        return int(name[4:]) if name.startswith("room") and name[4:].isdigit() else 0

    def emit(level: float, lo: float, hi: float, owners: list[tuple[str, int]], axis: str) -> None:
        owners = sorted(owners, key=lambda o: room_number(o[0]))
        primary_side = owners[0][1]
        if axis == "h":
            a, b = (lo, level), (hi, level)
            ccw = (a, b) if primary_side == SOUTH else (b, a)
        else:
            a, b = (level, lo), (level, hi)
            ccw = (a, b) if primary_side == EAST else (b, a)
        classification = "internal" if len(owners) == 2 else "external"
        edges.append(Edge("line", ccw[0], ccw[1], classification, owners))

    for axis, groups in (("h", horizontal), ("v", vertical)):
        for level, spans in groups.items():
            breakpoints = sorted({v for lo, hi, _, _ in spans for v in (lo, hi)})
            merged: list[tuple[float, float, list[tuple[str, int]]]] = []
            for lo, hi in zip(breakpoints, breakpoints[1:]):
                if hi - lo <= tol:
                    continue
                mid = (lo + hi) / 2.0
                owners = [(name, side) for s_lo, s_hi, name, side in spans if s_lo - tol < mid < s_hi + tol]
                if not owners:
                    continue
                if len(owners) > 2:
                    raise FloorplanError("more than two rooms share one boundary segment")
                owner_set = sorted(owners)
                if merged and merged[-1][2] == owner_set and abs(merged[-1][1] - lo) <= tol:
                    merged[-1] = (merged[-1][0], hi, owner_set)
                else:
                    merged.append((lo, hi, owner_set))
            for lo, hi, owners in merged:
                emit(level, lo, hi, owners, axis)

    # arc substitution on fully external sides
    for name, spec in plan.rooms.items():
        for edge_index, h_chord in spec.arc_edges:
            side = _EDGE_INDEX_SIDE[edge_index]
            side_edges = [e for e in edges if (name, side) in e.owners]
            if any(e.classification == "internal" for e in side_edges):
                raise ArcOnInternalEdgeError(
                    f"{name}: edge {edge_index} is shared with another room; arcs need a free wall"
                )
            if len(side_edges) != 1:
                raise FloorplanError(f"{name}: edge {edge_index} is fragmented; cannot substitute an arc")
            target = side_edges[0]
            target.kind = "arc"
            target.h_chord = h_chord
    return edges


def room_loop(edges: Sequence[Edge], room: str) -> list[Edge]:
    """Order a room's edges into a closed counterclockwise loop.

    Raises:
        OpenLoopError: edges do not chain into a single closed cycle.
    """
    owned = []
    for edge in edges:
        for owner, _side in edge.owners:
            if owner == room:
                if edge.owners[0][0] == room:
                    owned.append((edge, False))
                else:
                    owned.append((edge, True))  # traverse reversed
    if not owned:
        raise OpenLoopError(f"room {room!r} owns no edges")

    def key(pt: Vec2) -> tuple[int, int]:
        return (round(pt[0] * 1e9), round(pt[1] * 1e9))

    start_of: dict[tuple[int, int], tuple[Edge, bool]] = {}
    for edge, flipped in owned:
        start = edge.end if flipped else edge.start
        if key(start) in start_of:
            raise OpenLoopError(f"room {room!r}: boundary branches at {start}")
        start_of[key(start)] = (edge, flipped)

    ordered: list[Edge] = []
    edge, flipped = owned[0]
    origin = key(edge.end if flipped else edge.start)
    cursor = origin
    for _ in range(len(owned)):
        if cursor not in start_of:
            raise OpenLoopError(f"room {room!r}: boundary is not closed")
        edge, flipped = start_of.pop(cursor)
        ordered.append(edge)
        cursor = key(edge.start if flipped else edge.end)
    if start_of or cursor != origin:
        raise OpenLoopError(f"room {room!r}: boundary does not close into one loop")
    return ordered


@dataclass
class RoomFloor:
    room: str
    polygon: list[Vec2]
    element: SceneElement


def tessellate(edges: Sequence[Edge], arc_segments: int = 16, rooms: Optional[Sequence[str]] = None) -> dict[str, RoomFloor]:
    """Build each room's closed floor polygon and its triangulated floor face.

    Arcs are discretized into ``arc_segments`` chords. The resulting polygon
    must be simple; its face is ear-clipped and tagged ``roomX_floor``.

    Raises:
        OpenLoopError / SelfIntersectionError.
    """
    if rooms is None:
        seen: list[str] = []
        for edge in edges:
            for owner, _ in edge.owners:
                if owner not in seen:
                    seen.append(owner)
        rooms = seen
    floors: dict[str, RoomFloor] = {}
    for room in rooms:
        loop = room_loop(edges, room)
        polygon: list[Vec2] = []
        for edge in loop:
            flipped = edge.owners[0][0] != room
            start, end = (edge.end, edge.start) if flipped else (edge.start, edge.end)
            h = -edge.h_chord if flipped else edge.h_chord
            if edge.kind == "arc" and abs(h) > 1e-12:
                pts = discretize_arc(start, end, h, arc_segments)
            else:
                pts = [start, end]
            polygon.extend(pts[:-1])
        polygon = ensure_ccw(polygon)
        if not polygon_is_simple(polygon):
            raise SelfIntersectionError(f"room {room!r}: floor polygon self-intersects")
        triangles = ear_clip(polygon)
        number = int(room[4:])
        element = SceneElement(
            attribute_id=f"room{number}_floor",
            vertices=[(x, y, 0.0) for x, y in polygon],
            faces=triangles,
            metadata={"floor": {"room": room}},
        )
        floors[room] = RoomFloor(room=room, polygon=polygon, element=element)
    return floors


# --- wall construction ---------------------------------------------------------

#: side -> (interior-view left->right direction, inward normal)
_SIDE_FRAMES = {
    WEST: ((0.0, 1.0), (1.0, 0.0)),
    SOUTH: ((-1.0, 0.0), (0.0, 1.0)),
    NORTH: ((1.0, 0.0), (0.0, -1.0)),
    EAST: ((0.0, -1.0), (-1.0, 0.0)),
}


def wall_frame_origin(edge: Edge, side: int) -> Vec2:
    """Interior-view left end of the edge for the given owner side."""
    # CCW start/end of the primary owner; interior-view left end is the CCW end
    # for the primary owner and the CCW start for the secondary owner.
    primary_side = edge.owners[0][1]
    return edge.end if side == primary_side else edge.start


def build_wall_mesh(frame: dict) -> tuple[list, list]:
    """Mesh a wall prism from its frame: a grid of solid cells minus hole cells.

    All faces share grid vertices, so the result is watertight by construction
    (every edge belongs to exactly two triangles).
    """
    ox, oy = frame["origin"]
    dx, dy = frame["dir"]
    nx, ny = frame["outward"]
    v0, v1 = frame["v_range"]
    height = frame["height"]
    u_lo = frame.get("u_lo", 0.0)
    u_hi = frame.get("u_hi", frame["length"])
    holes = [h for h in frame.get("holes", []) if h["u1"] > u_lo and h["u0"] < u_hi]

    u_breaks = sorted({u_lo, u_hi, *[max(u_lo, min(u_hi, h["u0"])) for h in holes], *[max(u_lo, min(u_hi, h["u1"])) for h in holes]})
    z_breaks = sorted({0.0, height, *[min(height, max(0.0, h["z0"])) for h in holes], *[min(height, max(0.0, h["z1"])) for h in holes]})

    def solid(iu: int, iz: int) -> bool:
        if iu < 0 or iz < 0 or iu >= len(u_breaks) - 1 or iz >= len(z_breaks) - 1:
            return False
        um = (u_breaks[iu] + u_breaks[iu + 1]) / 2.0
        zm = (z_breaks[iz] + z_breaks[iz + 1]) / 2.0
        for hole in holes:
            if hole["u0"] < um < hole["u1"] and hole["z0"] < zm < hole["z1"]:
                return False
        return True

    vertices: list = []
    vertex_index: dict[tuple[int, int, int], int] = {}

    def vid(iu: int, iz: int, iv: int) -> int:
        key = (iu, iz, iv)
        if key not in vertex_index:
            u = u_breaks[iu]
            z = z_breaks[iz]
            v = v0 if iv == 0 else v1
            vertices.append((ox + u * dx + v * nx, oy + u * dy + v * ny, z))
            vertex_index[key] = len(vertices) - 1
        return vertex_index[key]

    faces: list[tuple[int, int, int]] = []

    def quad(a: int, b: int, c: int, d: int) -> None:
        faces.append((a, b, c))
        faces.append((a, c, d))

    n_u, n_z = len(u_breaks) - 1, len(z_breaks) - 1
    for iu in range(n_u):
        for iz in range(n_z):
            if not solid(iu, iz):
                continue
            # the two large faces (side A at v0, side B at v1)
            quad(vid(iu, iz, 0), vid(iu, iz + 1, 0), vid(iu + 1, iz + 1, 0), vid(iu + 1, iz, 0))
            quad(vid(iu, iz, 1), vid(iu + 1, iz, 1), vid(iu + 1, iz + 1, 1), vid(iu, iz + 1, 1))
            if not solid(iu - 1, iz):  # u-min cap
                quad(vid(iu, iz, 0), vid(iu, iz, 1), vid(iu, iz + 1, 1), vid(iu, iz + 1, 0))
            if not solid(iu + 1, iz):  # u-max cap
                quad(vid(iu + 1, iz, 0), vid(iu + 1, iz + 1, 0), vid(iu + 1, iz + 1, 1), vid(iu + 1, iz, 1))
            if not solid(iu, iz - 1):  # bottom
                quad(vid(iu, iz, 0), vid(iu + 1, iz, 0), vid(iu + 1, iz, 1), vid(iu, iz, 1))
            if not solid(iu, iz + 1):  # top
                quad(vid(iu, iz + 1, 0), vid(iu, iz + 1, 1), vid(iu + 1, iz + 1, 1), vid(iu + 1, iz + 1, 0))
    return vertices, faces


def _arc_wall_mesh(edge: Edge, thickness: float, height: float, segments: int) -> tuple[list, list]:
    inner = discretize_arc(edge.start, edge.end, edge.h_chord, segments)
    # offset each sample outward (to the right of the CCW direction = away from the room)
    outer: list[Vec2] = []
    n = len(inner)
    for i, (x, y) in enumerate(inner):
        a = inner[max(0, i - 1)]
        b = inner[min(n - 1, i + 1)]
        tx, ty = b[0] - a[0], b[1] - a[1]
        norm = math.hypot(tx, ty) or 1.0
        ox, oy = ty / norm, -tx / norm  # right normal of CCW direction
        outer.append((x + ox * thickness, y + oy * thickness))
    vertices: list = []
    for ring_z in (0.0, height):
        for x, y in inner:
            vertices.append((x, y, ring_z))
        for x, y in outer:
            vertices.append((x, y, ring_z))
    faces: list[tuple[int, int, int]] = []

    def quad(a, b, c, d):
        faces.append((a, b, c))
        faces.append((a, c, d))

    bi, bo, ti, to = 0, n, 2 * n, 3 * n
    for i in range(n - 1):
        quad(bi + i, bi + i + 1, ti + i + 1, ti + i)  # inner face (toward room)
        quad(bo + i + 1, bo + i, to + i, to + i + 1)  # outer face
        quad(bi + i + 1, bi + i, bo + i, bo + i + 1)  # bottom ring
        quad(ti + i, ti + i + 1, to + i + 1, to + i)  # top ring
    quad(bi, ti, to, bo)  # start cap
    quad(bi + n - 1, bo + n - 1, to + n - 1, ti + n - 1)  # end cap
    return vertices, faces


def build_walls(
    plan: PlacedFloorplan,
    edges: Sequence[Edge],
    thickness: Optional[float] = None,
    height: Optional[float] = None,
    arc_segments: int = 16,
) -> list[SceneElement]:
    """Extrude every boundary edge into a closed wall prism.

    External walls sit outside the room so interior sizes stay as declared;
    internal walls straddle the shared line. Straight walls are tagged
    ``roomX_idY`` (fragmented sides get ``_k`` suffixes), arcs ``arcN``.

    Raises:
        ThicknessOutOfRangeError: thickness outside [0.05, 0.6] m or height
        outside [2.2, 8.0] m.
    """
    t = plan.wall_thickness if thickness is None else thickness
    h = plan.wall_height if height is None else height
    if not (0.05 <= t <= 0.6):
        raise ThicknessOutOfRangeError(f"wall thickness {t} outside [0.05, 0.6] m")
    if not (2.2 <= h <= 8.0):
        raise ThicknessOutOfRangeError(f"wall height {h} outside [2.2, 8.0] m")

    # segment numbering per (room, side), ordered interior-view left to right
    fragments: dict[tuple[str, int], list[Edge]] = {}
    for edge in edges:
        for room, side in edge.owners:
            fragments.setdefault((room, side), []).append(edge)

    def left_position(edge: Edge, room: str, side: int) -> float:
        origin = wall_frame_origin(edge, side)
        direction = _SIDE_FRAMES[side][0]
        return origin[0] * direction[0] + origin[1] * direction[1]

    segment_of: dict[tuple[int, str, int], int] = {}
    for (room, side), frag_edges in fragments.items():
        frag_edges.sort(key=lambda e: left_position(e, room, side))
        for seg, edge in enumerate(frag_edges, start=1):
            segment_of[(id(edge), room, side)] = seg

    # straight external walls: extend into convex corners, back off at reflex ones
    def corner_adjust(edge: Edge) -> tuple[float, float]:
        if edge.classification != "external" or edge.kind != "line":
            return (0.0, 0.0)
        room, side = edge.owners[0]
        if side not in (SOUTH, NORTH):
            return (0.0, 0.0)  # vertical walls never own corners
        direction, inward = _SIDE_FRAMES[side]
        outward = (-inward[0], -inward[1])
        origin = wall_frame_origin(edge, side)
        length = edge.length
        adjust = [0.0, 0.0]
        for end_index, point in ((0, origin), (1, (origin[0] + direction[0] * length, origin[1] + direction[1] * length))):
            for other in edges:
                if other is edge or other.kind != "line" or other.classification != "external":
                    continue
                _, other_side = other.owners[0]
                if other_side not in (WEST, EAST):
                    continue
                for other_end in (other.start, other.end):
                    if abs(other_end[0] - point[0]) < 1e-9 and abs(other_end[1] - point[1]) < 1e-9:
                        far = other.start if other_end is other.end else other.end
                        toward_band = (far[1] - other_end[1]) * outward[1] + (far[0] - other_end[0]) * outward[0]
                        adjust[end_index] += -t if toward_band > 0 else t
        return (adjust[0], adjust[1])

    elements: list[SceneElement] = []
    arc_counter = 0
    for edge in edges:
        if edge.kind == "arc":
            arc_counter += 1
            vertices, faces = _arc_wall_mesh(edge, t, h, arc_segments)
            room, side = edge.owners[0]
            elements.append(
                SceneElement(
                    attribute_id=f"arc{arc_counter}",
                    vertices=vertices,
                    faces=faces,
                    metadata={"arc": {"room": room, "side": side, "h_chord": edge.h_chord, "height": h}},
                )
            )
            continue

        room, side = edge.owners[0]
        direction, inward = _SIDE_FRAMES[side]
        outward = (-inward[0], -inward[1])
        origin = wall_frame_origin(edge, side)
        internal = edge.classification == "internal"
        v_range = (-t / 2.0, t / 2.0) if internal else (0.0, t)
        ext_left, ext_right = corner_adjust(edge)
        frame = {
            "room": room,
            "side": side,
            "origin": [origin[0], origin[1]],
            "dir": [direction[0], direction[1]],
            "outward": [outward[0], outward[1]],
            "length": edge.length,
            "u_lo": -ext_left,
            "u_hi": edge.length + ext_right,
            "thickness": t,
            "v_range": list(v_range),
            "height": h,
            "internal": internal,
            "owners": [[r, s] for r, s in edge.owners],
            "holes": [],
        }
        vertices, faces = build_wall_mesh(frame)
        primary_room, primary_side = edge.owners[0]
        attr = wall_attribute(
            int(primary_room[4:]), primary_side, segment_of[(id(edge), primary_room, primary_side)]
        )
        aliases = []
        for other_room, other_side in edge.owners[1:]:
            aliases.append(
                wall_attribute(int(other_room[4:]), other_side, segment_of[(id(edge), other_room, other_side)])
            )
        elements.append(
            SceneElement(
                attribute_id=attr,
                vertices=vertices,
                faces=faces,
                alias_ids=aliases,
                metadata={"wall": frame},
            )
        )
    return elements


# --- column structure -----------------------------------------------------------

COLUMN_FACETS = 16


@dataclass
class ColumnGridSpec:
    rows: int
    cols: int
    spacing: float
    column_radius: float = 0.25
    column_height: float = 3.5
    beam_section: tuple[float, float] = (0.2, 0.3)  # (width, height)

    def validate(self) -> None:
        if self.rows < 2 or self.cols < 2:
            raise FloorplanError("column grid needs at least 2 rows and 2 cols")
        if self.spacing <= 2 * self.column_radius:
            raise FloorplanError("column spacing must exceed the column diameter")

    def center(self, i: int, j: int) -> Vec2:
        return (j * self.spacing, i * self.spacing)


@dataclass(frozen=True)
class Column:
    i: int
    j: int
    center: Vec2
    radius: float


@dataclass(frozen=True)
class UnitRegion:
    """Rectangular placement cell enclosed by four columns."""

    i1: int
    j1: int
    i2: int
    j2: int
    rect: tuple[float, float, float, float]  # (x0, y0, x1, y1)

    @property
    def tag(self) -> str:
        return f"unit_{self.i1}_{self.j1}"


def unit_regions(spec: ColumnGridSpec) -> list[UnitRegion]:
    units = []
    for i in range(spec.rows - 1):
        for j in range(spec.cols - 1):
            x0, y0 = spec.center(i, j)
            x1, y1 = spec.center(i + 1, j + 1)
            units.append(UnitRegion(i, j, i + 1, j + 1, (x0, y0, x1, y1)))
    return units


def _column_mesh(center: Vec2, radius: float, height: float) -> tuple[list, list]:
    cx, cy = center
    ring = [
        (cx + radius * math.cos(2 * math.pi * k / COLUMN_FACETS), cy + radius * math.sin(2 * math.pi * k / COLUMN_FACETS))
        for k in range(COLUMN_FACETS)
    ]
    vertices = [(x, y, 0.0) for x, y in ring] + [(x, y, height) for x, y in ring]
    vertices.append((cx, cy, 0.0))
    vertices.append((cx, cy, height))
    bottom_center = 2 * COLUMN_FACETS
    top_center = bottom_center + 1
    faces = []
    for k in range(COLUMN_FACETS):
        k2 = (k + 1) % COLUMN_FACETS
        faces.append((k, k2, COLUMN_FACETS + k2))
        faces.append((k, COLUMN_FACETS + k2, COLUMN_FACETS + k))
        faces.append((k2, k, bottom_center))
        faces.append((COLUMN_FACETS + k, COLUMN_FACETS + k2, top_center))
    return vertices, faces


def build_column_grid(spec: ColumnGridSpec, margin: float = 1.0) -> list[SceneElement]:
    """Ground plane, 16-gon column prisms and top beams for a column grid.

    Column (i, j) sits at (j*spacing, i*spacing); beams join every
    horizontally and vertically adjacent pair, flush with the column tops.
    """
    spec.validate()
    elements: list[SceneElement] = []
    x_max = (spec.cols - 1) * spec.spacing
    y_max = (spec.rows - 1) * spec.spacing
    floor_poly = [
        (-margin, -margin),
        (x_max + margin, -margin),
        (x_max + margin, y_max + margin),
        (-margin, y_max + margin),
    ]
    elements.append(
        SceneElement(
            attribute_id="floor",
            vertices=[(x, y, 0.0) for x, y in floor_poly],
            faces=[(0, 1, 2), (0, 2, 3)],
            metadata={"floor": {"margin": margin}},
        )
    )
    for i in range(spec.rows):
        for j in range(spec.cols):
            vertices, faces = _column_mesh(spec.center(i, j), spec.column_radius, spec.column_height)
            elements.append(
                SceneElement(
                    attribute_id=f"column_{i}_{j}",
                    vertices=vertices,
                    faces=faces,
                    metadata={"column": {"i": i, "j": j, "center": list(spec.center(i, j))}},
                )
            )
    beam_w, beam_h = spec.beam_section
    z1 = spec.column_height
    z0 = z1 - beam_h
    k = 0
    for i in range(spec.rows):  # beams along x
        for j in range(spec.cols - 1):
            (x0, y), (x1, _) = spec.center(i, j), spec.center(i, j + 1)
            verts, faces = core.box_mesh((x0, y - beam_w / 2, z0), (x1, y + beam_w / 2, z1))
            elements.append(
                SceneElement(attribute_id=f"beam_{k}", vertices=verts, faces=faces, metadata={"beam": {"axis": "x", "i": i, "j": j}})
            )
            k += 1
    for j in range(spec.cols):  # beams along y
        for i in range(spec.rows - 1):
            (x, y0), (_, y1) = spec.center(i, j), spec.center(i + 1, j)
            verts, faces = core.box_mesh((x - beam_w / 2, y0, z0), (x + beam_w / 2, y1, z1))
            elements.append(
                SceneElement(attribute_id=f"beam_{k}", vertices=verts, faces=faces, metadata={"beam": {"axis": "y", "i": i, "j": j}})
            )
            k += 1
    return elements
