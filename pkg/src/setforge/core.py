"""Scene graph primitives: attribute-tagged mesh elements and rigid transforms.

Every structural piece of a generated set (floors, walls, columns, beams) and
every placed asset is a :class:`SceneElement`. Elements carry a lazy transform
(translation, yaw about +z, per-axis scale); vertices stay in local space until
export bakes them. Structural elements are tagged with identifiers from a fixed
grammar so later stages can address them in batch:

    room<N> | room<N>_floor | room<N>_id<Y> | arc<N> | outer |
    column_<i>_<j> | beam_<k>

with Y in 1..4 meaning the west, south, north and east wall of the room.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np

from .geometry import Vec3, aabb_union

WEST, SOUTH, NORTH, EAST = 1, 2, 3, 4

#: side index -> inward-pointing wall normal (unit xy vector)
INWARD_NORMAL = {WEST: (1.0, 0.0), SOUTH: (0.0, 1.0), NORTH: (0.0, -1.0), EAST: (-1.0, 0.0)}

_ATTRIBUTE_RE = re.compile(
    r"^(?:"
    r"room[1-9]\d*"
    r"|room[1-9]\d*_floor"
    r"|room[1-9]\d*_id[1-4](?:_[2-9]\d*)?"
    r"|arc[1-9]\d*"
    r"|outer"
    r"|floor"
    r"|column_\d+_\d+"
    r"|beam_\d+"
    r")$"
)


class SceneError(Exception):
    """Base class for scene-model failures."""


class MalformedAttributeError(SceneError):
    pass


class DuplicateAttributeError(SceneError):
    pass


class NonPositiveScaleError(SceneError):
    pass


@dataclass(frozen=True)
class ParsedAttribute:
    """Decomposed structural identifier."""

    raw: str
    kind: str  # room | room_floor | wall | arc | outer | floor | column | beam
    room: Optional[int] = None
    side: Optional[int] = None  # 1=west 2=south 3=north 4=east
    segment: int = 1
    indices: tuple[int, ...] = ()


def parse_attribute_id(raw: str) -> ParsedAttribute:
    """Validate ``raw`` against the structural identifier grammar.

    Raises:
        MalformedAttributeError: when the string matches no production.
    """
    if not isinstance(raw, str) or not _ATTRIBUTE_RE.match(raw):
        raise MalformedAttributeError(f"attribute id {raw!r} does not match the identifier grammar")
    if raw == "outer":
        return ParsedAttribute(raw, "outer")
    if raw == "floor":
        return ParsedAttribute(raw, "floor")
    if raw.startswith("arc"):
        return ParsedAttribute(raw, "arc", indices=(int(raw[3:]),))
    if raw.startswith("column_"):
        i, j = raw.split("_")[1:]
        return ParsedAttribute(raw, "column", indices=(int(i), int(j)))
    if raw.startswith("beam_"):
        return ParsedAttribute(raw, "beam", indices=(int(raw.split("_")[1]),))
    m = re.match(r"^room(\d+)_id([1-4])(?:_(\d+))?$", raw)
    if m:
        return ParsedAttribute(
            raw,
            "wall",
            room=int(m.group(1)),
            side=int(m.group(2)),
            segment=int(m.group(3) or 1),
        )
    m = re.match(r"^room(\d+)_floor$", raw)
    if m:
        return ParsedAttribute(raw, "room_floor", room=int(m.group(1)))
    return ParsedAttribute(raw, "room", room=int(raw[4:]))


def wall_attribute(room: int, side: int, segment: int = 1) -> str:
    """Identifier for a room's wall on ``side``; fragmented sides get a suffix."""
    base = f"room{room}_id{side}"
    return base if segment == 1 else f"{base}_{segment}"


@dataclass(frozen=True)
class Transform:
    """Translation + yaw about +z + per-axis scale.

    World mapping of a local point p is ``t + R(yaw) @ (s * p)``: scale binds
    to the element's native axes, rotation is counterclockwise in the xy
    plane, translation is applied last.
    """

    translation: Vec3 = (0.0, 0.0, 0.0)
    yaw: float = 0.0
    scale: Vec3 = (1.0, 1.0, 1.0)

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        sx, sy, sz = self.scale
        tx, ty, tz = self.translation
        return np.array(
            [
                [c * sx, -s * sy, 0.0, tx],
                [s * sx, c * sy, 0.0, ty],
                [0.0, 0.0, sz, tz],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )

    def apply(self, points: Sequence[Sequence[float]]) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            return pts.reshape(0, 3)
        scaled = pts * np.asarray(self.scale)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return scaled @ rot.T + np.asarray(self.translation)

    def compose(self, other: "Transform") -> "Transform":
        """Merge a delta transform onto this one (yaws add, scales multiply)."""
        return Transform(
            translation=tuple(a + b for a, b in zip(self.translation, other.translation)),
            yaw=self.yaw + other.yaw,
            scale=tuple(a * b for a, b in zip(self.scale, other.scale)),
        )


IDENTITY = Transform()


@dataclass
class SceneElement:
    """One node of the scene graph: a triangle-soup mesh plus a lazy transform."""

    attribute_id: str = ""
    vertices: list[Vec3] = field(default_factory=list)
    faces: list[tuple[int, int, int]] = field(default_factory=list)
    transform: Transform = IDENTITY
    material_ref: Optional[str] = None
    children: list["SceneElement"] = field(default_factory=list)
    alias_ids: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def validate_mesh(self) -> None:
        n = len(self.vertices)
        for face in self.faces:
            for idx in face:
                if not 0 <= idx < n:
                    raise SceneError(
                        f"element {self.attribute_id!r}: face index {idx} out of range (0..{n - 1})"
                    )
        for s in self.transform.scale:
            if s <= 0:
                raise NonPositiveScaleError(
                    f"element {self.attribute_id!r} has non-positive scale {self.transform.scale}"
                )

    def walk(self) -> Iterator["SceneElement"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def baked_vertices(self, parent: Transform = IDENTITY) -> np.ndarray:
        world = parent.compose(self.transform) if parent is not IDENTITY else self.transform
        return world.apply(self.vertices)

    def world_aabb(self, parent: Transform = IDENTITY) -> Optional[tuple[Vec3, Vec3]]:
        """Axis-aligned bounds of this element and its children, or None if empty."""
        world = parent.compose(self.transform)
        box: Optional[tuple[Vec3, Vec3]] = None
        if self.vertices:
            pts = world.apply(self.vertices)
            box = (tuple(pts.min(axis=0)), tuple(pts.max(axis=0)))
        for child in self.children:
            child_box = child.world_aabb(world)
            if child_box is not None:
                box = child_box if box is None else aabb_union(box, child_box)
        return box


@dataclass
class SceneGraph:
    """Container for one generated scene.

    The registry maps every attribute id (primary and alias) to its element;
    ids are unique across the whole graph.
    """

    structure_kind: str  # "wall" | "column"
    roots: list[SceneElement] = field(default_factory=list)
    bounding_box: Optional[tuple[Vec3, Vec3]] = None
    _registry: dict[str, SceneElement] = field(default_factory=dict, repr=False)

    def elements(self) -> Iterator[SceneElement]:
        for root in self.roots:
            yield from root.walk()

    def register(self, element: SceneElement) -> None:
        for key in [element.attribute_id, *element.alias_ids]:
            if not key:
                continue
            existing = self._registry.get(key)
            if existing is not None and existing is not element:
                raise DuplicateAttributeError(f"attribute id {key!r} is already registered")
            self._registry[key] = element

    def rebuild_registry(self) -> None:
        self._registry = {}
        for element in self.elements():
            self.register(element)

    def has_attribute(self, attribute_id: str) -> bool:
        return attribute_id in self._registry

    def get(self, attribute_id: str) -> SceneElement:
        try:
            return self._registry[attribute_id]
        except KeyError:
            raise KeyError(f"no element with attribute id {attribute_id!r}") from None

    def attribute_ids(self) -> list[str]:
        return sorted(self._registry)

    def add_root(self, element: SceneElement) -> SceneElement:
        self.roots.append(element)
        self.register(element)
        return element

    def recompute_bounding_box(self) -> Optional[tuple[Vec3, Vec3]]:
        box: Optional[tuple[Vec3, Vec3]] = None
        for root in self.roots:
            root_box = root.world_aabb()
            if root_box is not None:
                box = root_box if box is None else aabb_union(box, root_box)
        self.bounding_box = box
        return box

    def validate(self) -> None:
        """Registry pass: id uniqueness, mesh index ranges, bounding box cover."""
        seen: dict[str, SceneElement] = {}
        for element in self.elements():
            element.validate_mesh()
            for key in [element.attribute_id, *element.alias_ids]:
                if not key:
                    continue
                if key in seen and seen[key] is not element:
                    raise DuplicateAttributeError(f"attribute id {key!r} used by two elements")
                seen[key] = element
        self.recompute_bounding_box()


def set_attribute(element: SceneElement, attribute_id: str, graph: Optional[SceneGraph] = None) -> SceneElement:
    """Tag ``element`` with a structural identifier.

    The id must parse under the identifier grammar and, when a graph is given,
    must not collide with an already registered id.

    Raises:
        MalformedAttributeError: grammar violation.
        DuplicateAttributeError: id already used in ``graph``.
    """
    parse_attribute_id(attribute_id)
    if graph is not None and graph.has_attribute(attribute_id):
        raise DuplicateAttributeError(f"attribute id {attribute_id!r} is already registered")
    element.attribute_id = attribute_id
    if graph is not None:
        graph.register(element)
    return element


def apply_transform(
    element: SceneElement,
    rotate: float = 0.0,
    scale: Optional[Sequence[float]] = None,
    translate: Optional[Sequence[float]] = None,
) -> SceneElement:
    """Compose a rotate -> scale -> translate step onto the element's transform.

    Yaw increments add, scales multiply per axis, translations add; the mesh is
    left untouched (the transform is baked only at export).

    Raises:
        NonPositiveScaleError: any scale component <= 0.
    """
    s = (1.0, 1.0, 1.0) if scale is None else tuple(float(v) for v in scale)
    if any(v <= 0 for v in s):
        raise NonPositiveScaleError(f"scale components must be positive, got {s}")
    t = (0.0, 0.0, 0.0) if translate is None else tuple(float(v) for v in translate)
    delta = Transform(translation=t, yaw=float(rotate), scale=s)  # type: ignore[arg-type]
    element.transform = element.transform.compose(delta)
    return element


def box_mesh(lo: Sequence[float], hi: Sequence[float]) -> tuple[list[Vec3], list[tuple[int, int, int]]]:
    """Closed axis-aligned box with outward-facing triangles."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    verts: list[Vec3] = [
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ]
    quads = [
        (0, 3, 2, 1),  # bottom (-z)
        (4, 5, 6, 7),  # top (+z)
        (0, 1, 5, 4),  # -y
        (2, 3, 7, 6),  # +y
        (0, 4, 7, 3),  # -x
        (1, 2, 6, 5),  # +x
    ]
    faces: list[tuple[int, int, int]] = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return verts, faces


def mesh_boundary_edges(faces: Sequence[tuple[int, int, int]]) -> list[tuple[int, int]]:
    """Edges not shared by exactly two triangles (empty for a watertight mesh)."""
    counts: dict[tuple[int, int], int] = {}
    for a, b, c in faces:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (u, v) if u < v else (v, u)
            counts[key] = counts.get(key, 0) + 1
    return [edge for edge, n in counts.items() if n != 2]
