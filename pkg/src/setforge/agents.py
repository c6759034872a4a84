"""Set-design agent chain: FSM turn control, response hooks and backends.

A chain run walks a fixed speaker order (wall path: Manager, Allocation,
Adjacency, Check, Shape, Material, Door_Window, Object; column path drops
Check and Shape). Every language turn must end in exactly one fenced JSON
block; a per-role hook validates it against a shipped schema and fills one
section of the structured parameter bundle that drives procedural generation.
Adjacency proposals loop through a deterministic validator until they pass or
the retry budget runs out.

Backends are interchangeable: the scripted backend replays fixture responses
for offline, reproducible runs; the remote backend calls a chat-completion
endpoint with role-play/few-shot prompts (chain-of-thought for Door_Window).
"""
from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional, Protocol

import jsonschema

from .floorplan import (
    AdjacencyRelation,
    AdjacencySpec,
    ColumnGridSpec,
    FloorplanError,
    RoomSpec,
    place_rooms,
)
from .layout import LayoutTriplet
from .openings import GapRef, OpeningSpec

MANAGER = "Manager"
ALLOCATION = "Allocation"
ADJACENCY = "Adjacency"
CHECK = "Check"
SHAPE = "Shape"
MATERIAL = "Material"
DOOR_WINDOW = "Door_Window"
OBJECT = "Object"
DONE = "Done"

ROLES = (MANAGER, ALLOCATION, ADJACENCY, CHECK, SHAPE, MATERIAL, DOOR_WINDOW, OBJECT)
OK, FAIL = "ok", "fail"

PROVISIONAL_ROOM_SIZE = 4.0  # dry-run size used when Check precedes Shape
DEFAULT_MAX_RETRIES = 3
SCHEMA_VERSION = "1"


class ChainError(Exception):
    def __init__(self, message: str, role: Optional[str] = None):
        super().__init__(message)
        self.role = role


class IllegalTransitionError(ChainError):
    pass


class AdjacencyExhaustedError(ChainError):
    pass


class NoJsonBlockError(ChainError):
    pass


class MultipleJsonBlocksError(ChainError):
    pass


class SchemaViolationError(ChainError):
    def __init__(self, message: str, path: str = "$", role: Optional[str] = None):
        super().__init__(f"{path}: {message}", role)
        self.path = path


class BackendUnavailableError(ChainError):
    pass


# --- turn control ----------------------------------------------------------------


@dataclass
class TurnFSM:
    transitions: dict[tuple[str, str], str]
    current: str = MANAGER


def make_turn_fsm(structure_kind: str) -> TurnFSM:
    if structure_kind == "wall":
        table = {
            (MANAGER, OK): ALLOCATION,
            (ALLOCATION, OK): ADJACENCY,
            (ADJACENCY, OK): CHECK,
            (CHECK, OK): SHAPE,
            (CHECK, FAIL): ADJACENCY,
            (SHAPE, OK): MATERIAL,
            (MATERIAL, OK): DOOR_WINDOW,
            (DOOR_WINDOW, OK): OBJECT,
            (OBJECT, OK): DONE,
        }
    elif structure_kind == "column":
        table = {
            (MANAGER, OK): ALLOCATION,
            (ALLOCATION, OK): ADJACENCY,
            (ADJACENCY, OK): MATERIAL,
            (MATERIAL, OK): DOOR_WINDOW,
            (DOOR_WINDOW, OK): OBJECT,
            (OBJECT, OK): DONE,
        }
    else:
        raise ChainError(f"unknown structure kind {structure_kind!r}")
    return TurnFSM(transitions=table)


def next_speaker(fsm: TurnFSM, outcome: str = OK) -> str:
    """Advance to the unique successor for (current role, outcome).

    Raises:
        IllegalTransitionError: the transition table has no such move.
    """
    if fsm.current == DONE:
        raise IllegalTransitionError("the chain already finished", role=DONE)
    key = (fsm.current, outcome)
    if key not in fsm.transitions:
        raise IllegalTransitionError(
            f"no transition from {fsm.current!r} on outcome {outcome!r}", role=fsm.current
        )
    fsm.current = fsm.transitions[key]
    return fsm.current


@dataclass(frozen=True)
class AgentRole:
    name: str
    description: str
    duty_schema: dict[str, Optional[str]]  # structure kind -> schema id


ROLE_TABLE: dict[str, AgentRole] = {
    MANAGER: AgentRole(
        MANAGER,
        "I speak first and pick the structure kind (wall or column) from the brief; "
        "the next speaker is Allocation.",
        {"wall": "manager", "column": "manager"},
    ),
    ALLOCATION: AgentRole(
        ALLOCATION,
        "I can only speak after Manager. I decide how many rooms the set needs and what "
        "each is for (and on column sets, the column grid); the next speaker is Adjacency.",
        {"wall": "allocation_wall", "column": "allocation_column"},
    ),
    ADJACENCY: AgentRole(
        ADJACENCY,
        "I can only speak after Allocation or after Check rejects my plan. I lay out how "
        "rooms touch (or which grid cells they occupy); the next speaker is Check on wall "
        "sets and Material on column sets.",
        {"wall": "adjacency_wall", "column": "adjacency_column"},
    ),
    CHECK: AgentRole(
        CHECK,
        "I can only speak after Adjacency and only on wall sets. I verify the adjacency "
        "plan; on violations the next speaker is Adjacency again, otherwise Shape.",
        {"wall": None, "column": None},  # deterministic validator, no language turn
    ),
    SHAPE: AgentRole(
        SHAPE,
        "I can only speak after Check approves, and only on wall sets. I size every room "
        "and decide arc walls; the next speaker is Material.",
        {"wall": "shape", "column": None},
    ),
    MATERIAL: AgentRole(
        MATERIAL,
        "I can only speak after Shape (wall) or Adjacency (column). I pick finish "
        "materials for floors, walls, columns and beams; the next speaker is Door_Window.",
        {"wall": "material", "column": "material"},
    ),
    DOOR_WINDOW: AgentRole(
        DOOR_WINDOW,
        "I can only speak after Material. I choose walls, opening sizes and door/window "
        "styles (styles only on column sets); the next speaker is Object.",
        {"wall": "door_window_wall", "column": "door_window_column"},
    ),
    OBJECT: AgentRole(
        OBJECT,
        "I speak last, after Door_Window. I select floor objects (stable and relative) "
        "and, on wall sets, wall objects.",
        {"wall": "object_wall", "column": "object_column"},
    ),
}


# --- structured parameters --------------------------------------------------------


@dataclass
class StableObjectSpec:
    slot: str  # corner | edge | center
    slot_index: int
    object_query: str


@dataclass
class WallObjectSpec:
    wall: str  # roomX_idY attribute
    object_query: str


@dataclass
class RegionObjects:
    stable: list[StableObjectSpec] = field(default_factory=list)
    relative: list[LayoutTriplet] = field(default_factory=list)
    wall: list[WallObjectSpec] = field(default_factory=list)


@dataclass
class StructuredParams:
    """Typed parameter bundle the procedural stages consume."""

    structure_kind: str = ""
    rooms: list[RoomSpec] = field(default_factory=list)
    room_functions: dict[str, str] = field(default_factory=dict)
    adjacency: Optional[AdjacencySpec] = None
    grid: Optional[ColumnGridSpec] = None
    room_cells: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    materials: dict[str, str] = field(default_factory=dict)
    openings: list[OpeningSpec] = field(default_factory=list)
    opening_styles: dict[str, str] = field(default_factory=dict)
    objects: dict[str, RegionObjects] = field(default_factory=dict)

    def missing_sections(self) -> list[str]:
        missing = []
        if self.structure_kind not in ("wall", "column"):
            missing.append("structure_kind")
            return missing
        if not self.room_functions:
            missing.append("allocation")
        if self.structure_kind == "wall":
            if self.adjacency is None:
                missing.append("adjacency")
            if not self.rooms or any(r.width <= 0 for r in self.rooms):
                missing.append("shape")
            if not isinstance(self.openings, list):
                missing.append("openings")
        else:
            if self.grid is None:
                missing.append("grid")
            if not self.room_cells:
                missing.append("cells")
            if not isinstance(self.opening_styles, dict) or not self.opening_styles:
                missing.append("opening_styles")
        if not self.materials:
            missing.append("materials")
        if not self.objects:
            missing.append("objects")
        return missing

    def is_complete(self) -> bool:
        return not self.missing_sections()

    def to_dict(self) -> dict:
        out: dict = {"structure_kind": self.structure_kind, "room_functions": self.room_functions}
        if self.structure_kind == "wall":
            out["rooms"] = [
                {
                    "name": r.name,
                    "width": r.width,
                    "depth": r.depth,
                    "arc_edges": [{"edge": e, "h_chord": h} for e, h in r.arc_edges],
                }
                for r in self.rooms
            ]
            out["adjacency"] = [
                {"a": rel.room_a, "b": rel.room_b, "relation": rel.relation}
                for rel in (self.adjacency.relations if self.adjacency else [])
            ]
            out["openings"] = [
                {
                    "target": o.target,
                    "kind": o.kind,
                    "width": o.width,
                    "height": o.height,
                    "horizontal_offset": o.horizontal_offset,
                    "asset_query": o.asset_query,
                }
                for o in self.openings
            ]
        else:
            grid = self.grid
            out["grid"] = grid and {
                "rows": grid.rows,
                "cols": grid.cols,
                "spacing": grid.spacing,
                "column_radius": grid.column_radius,
                "column_height": grid.column_height,
                "beam_width": grid.beam_section[0],
                "beam_height": grid.beam_section[1],
            }
            out["room_cells"] = {name: [list(c) for c in cells] for name, cells in self.room_cells.items()}
            out["opening_styles"] = self.opening_styles
        out["materials"] = self.materials
        out["objects"] = {
            region: {
                "stable": [
                    {"slot": s.slot, "slot_index": s.slot_index, "object_query": s.object_query}
                    for s in objs.stable
                ],
                "relative": [
                    {
                        "anchor": t.anchor,
                        "relation": t.relation,
                        "distance": t.distance,
                        "object_query": t.object_query,
                    }
                    for t in objs.relative
                ],
                "wall": [{"wall": w.wall, "object_query": w.object_query} for w in objs.wall],
            }
            for region, objs in self.objects.items()
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "StructuredParams":
        params = cls(structure_kind=data["structure_kind"])
        params.room_functions = dict(data.get("room_functions", {}))
        if params.structure_kind == "wall":
            params.rooms = [
                RoomSpec(
                    name=r["name"],
                    width=float(r["width"]),
                    depth=float(r["depth"]),
                    arc_edges=[(int(a["edge"]), float(a["h_chord"])) for a in r.get("arc_edges", [])],
                )
                for r in data.get("rooms", [])
            ]
            params.adjacency = AdjacencySpec(
                [AdjacencyRelation(r["a"], r["b"], r["relation"]) for r in data.get("adjacency", [])]
            )
            params.openings = [
                OpeningSpec(
                    target=o["target"],
                    kind=o["kind"],
                    width=float(o.get("width", 0.0)),
                    height=float(o.get("height", 0.0)),
                    horizontal_offset=float(o.get("horizontal_offset", 0.0)),
                    asset_query=o.get("asset_query", ""),
                )
                for o in data.get("openings", [])
            ]
        else:
            g = data.get("grid")
            if g:
                params.grid = ColumnGridSpec(
                    rows=int(g["rows"]),
                    cols=int(g["cols"]),
                    spacing=float(g["spacing"]),
                    column_radius=float(g.get("column_radius", 0.25)),
                    column_height=float(g.get("column_height", 3.5)),
                    beam_section=(float(g.get("beam_width", 0.2)), float(g.get("beam_height", 0.3))),
                )
            params.room_cells = {
                name: [tuple(int(v) for v in cell) for cell in cells]
                for name, cells in data.get("room_cells", {}).items()
            }
            params.opening_styles = dict(data.get("opening_styles", {}))
        params.materials = dict(data.get("materials", {}))
        for region, objs in data.get("objects", {}).items():
            params.objects[region] = RegionObjects(
                stable=[
                    StableObjectSpec(s["slot"], int(s.get("slot_index", 0)), s["object_query"])
                    for s in objs.get("stable", [])
                ],
                relative=[
                    LayoutTriplet(t["anchor"], t["relation"], t["distance"], t["object_query"])
                    for t in objs.get("relative", [])
                ],
                wall=[WallObjectSpec(w["wall"], w["object_query"]) for w in objs.get("wall", [])],
            )
        return params


# --- adjacency validation -----------------------------------------------------------


@dataclass
class CheckReport:
    ok: bool
    violations: list[str] = field(default_factory=list)


def validate_adjacency(rooms: list[RoomSpec], adjacency: AdjacencySpec) -> CheckReport:
    """Check an adjacency proposal: referenced rooms, connectivity from the
    first room, direct contradictions, and a dry-run placement."""
    violations: list[str] = []
    names = {r.name for r in rooms}
    if len(rooms) > 8:
        violations.append(f"too many rooms ({len(rooms)}); at most 8 supported")
    for rel in adjacency.relations:
        for name in (rel.room_a, rel.room_b):
            if name not in names:
                violations.append(f"relation ({rel.room_a}, {rel.room_b}, {rel.relation}) references unknown room {name!r}")

    # connectivity from the first room
    if rooms:
        neighbors: dict[str, set[str]] = {r.name: set() for r in rooms}
        for rel in adjacency.relations:
            if rel.room_a in names and rel.room_b in names:
                neighbors[rel.room_a].add(rel.room_b)
                neighbors[rel.room_b].add(rel.room_a)
        seen = {rooms[0].name}
        queue = [rooms[0].name]
        while queue:
            for other in sorted(neighbors[queue.pop(0)]):
                if other not in seen:
                    seen.add(other)
                    queue.append(other)
        for name in sorted(names - seen):
            violations.append(f"room {name!r} is disconnected from {rooms[0].name!r}")

    # direct contradictions between one pair of rooms
    axis = {"east": ("x", 1), "west": ("x", -1), "north": ("y", 1), "south": ("y", -1)}
    directions: dict[tuple[str, str], set[tuple[str, int]]] = {}
    for rel in adjacency.relations:
        a, b = rel.room_a, rel.room_b
        ax, sign = axis[rel.relation]
        key = (a, b) if a <= b else (b, a)
        canon = (ax, sign if a <= b else -sign)
        directions.setdefault(key, set()).add(canon)
    for (a, b), canon in sorted(directions.items()):
        if len(canon) > 1:
            violations.append(f"contradictory relations between {a!r} and {b!r}")

    if not violations:
        try:
            place_rooms(rooms, adjacency)
        except FloorplanError as exc:
            violations.append(f"placement dry-run failed: {exc}")
    return CheckReport(ok=not violations, violations=violations)


def validate_room_cells(grid: ColumnGridSpec, room_cells: dict[str, list[tuple[int, int]]]) -> CheckReport:
    """Column-path cell assignment: in-range, disjoint, edge-connected per room."""
    violations: list[str] = []
    seen: dict[tuple[int, int], str] = {}
    for room, cells in sorted(room_cells.items()):
        if not cells:
            violations.append(f"room {room!r} occupies no cells")
            continue
        cell_set = set()
        for cell in cells:
            i, j = int(cell[0]), int(cell[1])
            if not (0 <= i < grid.rows - 1 and 0 <= j < grid.cols - 1):
                violations.append(f"room {room!r} cell ({i}, {j}) outside the {grid.rows - 1}x{grid.cols - 1} cell grid")
                continue
            if (i, j) in seen:
                violations.append(f"cell ({i}, {j}) assigned to both {seen[(i, j)]!r} and {room!r}")
            seen[(i, j)] = room
            cell_set.add((i, j))
        if cell_set:
            stack = [min(cell_set)]
            reached = {stack[0]}
            while stack:
                ci, cj = stack.pop()
                for ni, nj in ((ci + 1, cj), (ci - 1, cj), (ci, cj + 1), (ci, cj - 1)):
                    if (ni, nj) in cell_set and (ni, nj) not in reached:
                        reached.add((ni, nj))
                        stack.append((ni, nj))
            if reached != cell_set:
                violations.append(f"room {room!r} cells are not contiguous")
    return CheckReport(ok=not violations, violations=violations)


def partitions_from_cells(grid: ColumnGridSpec, room_cells: dict[str, list[tuple[int, int]]]) -> list[GapRef]:
    """Interior column gaps separating cells of different rooms."""
    owner: dict[tuple[int, int], str] = {}
    for room, cells in room_cells.items():
        for cell in cells:
            owner[(int(cell[0]), int(cell[1]))] = room
    gaps: list[GapRef] = []
    for i in range(1, grid.rows - 1):  # horizontal gaps between vertically adjacent cells
        for j in range(grid.cols - 1):
            below, above = owner.get((i - 1, j)), owner.get((i, j))
            if below is not None and above is not None and below != above:
                gaps.append(("h", i, j))
    for j in range(1, grid.cols - 1):
        for i in range(grid.rows - 1):
            left, right = owner.get((i, j - 1)), owner.get((i, j))
            if left is not None and right is not None and left != right:
                gaps.append(("v", i, j))
    return gaps


# --- message extraction ----------------------------------------------------------


_FENCE_RE = re.compile(r"```(?:json)?[ \t]*\n(.*?)```", re.DOTALL)

_SCHEMA_CACHE: dict[str, dict] = {}


def load_schema(schema_id: str) -> dict:
    if schema_id not in _SCHEMA_CACHE:
        text = resources.files("setforge").joinpath(f"schemas/{schema_id}.json").read_text("utf-8")
        _SCHEMA_CACHE[schema_id] = json.loads(text)
    return _SCHEMA_CACHE[schema_id]


def extract_params(message: str, schema_id: str, role: Optional[str] = None) -> dict:
    """Pull the single fenced JSON block out of an agent response and validate it.

    Raises:
        NoJsonBlockError / MultipleJsonBlocksError / SchemaViolationError.
    """
    blocks = _FENCE_RE.findall(message)
    if not blocks:
        raise NoJsonBlockError("response contains no fenced JSON block", role)
    if len(blocks) > 1:
        raise MultipleJsonBlocksError(f"response contains {len(blocks)} fenced JSON blocks", role)
    try:
        payload = json.loads(blocks[0])
    except json.JSONDecodeError as exc:
        raise SchemaViolationError(f"invalid JSON: {exc}", "$", role) from exc
    schema = load_schema(schema_id)
    try:
        jsonschema.validate(payload, schema)
    except jsonschema.ValidationError as exc:
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path
        )
        raise SchemaViolationError(exc.message, path, role) from exc
    return payload


# --- backends ---------------------------------------------------------------------


@dataclass
class AgentMessage:
    role: str
    content: str


class Backend(Protocol):
    def respond(self, role: str, context: str) -> str: ...


class ScriptedBackend:
    """Replays fixture responses per role, in order. Fully deterministic."""

    def __init__(self, fixtures: dict[str, list[str]]):
        self.fixtures = {role: list(responses) for role, responses in fixtures.items()}
        self._cursor: dict[str, int] = {}

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        return cls(json.loads(open(path, encoding="utf-8").read()))

    def respond(self, role: str, context: str) -> str:
        index = self._cursor.get(role, 0)
        responses = self.fixtures.get(role, [])
        if index >= len(responses):
            raise ChainError(f"scripted backend has no fixture for turn {index + 1} of role {role}", role)
        self._cursor[role] = index + 1
        return responses[index]


_ROLE_PLAY_PREAMBLE = (
    "You are the {name} agent of a film set design crew. {description} "
    "Think like a production designer: honor the era, region and style in the brief. "
    "End every reply with exactly one fenced ```json block matching your duty schema; "
    "no other fenced blocks."
)

_FEW_SHOT = {
    MANAGER: 'Example reply:\n```json\n{"structure_kind": "wall"}\n```',
    ALLOCATION: 'Example reply:\n```json\n{"rooms": [{"name": "room1", "function": "parlor"}]}\n```',
    ADJACENCY: 'Example reply:\n```json\n{"relations": [{"a": "room1", "b": "room2", "relation": "east"}]}\n```',
    SHAPE: 'Example reply:\n```json\n{"rooms": [{"name": "room1", "width": 5.0, "depth": 4.0}]}\n```',
    MATERIAL: 'Example reply:\n```json\n{"entries": {"room1_floor": "oak parquet flooring"}}\n```',
    DOOR_WINDOW: (
        "Reason step by step before the JSON: which walls are shared, where openings fit, "
        "then the style for each.\nExample reply ends with:\n"
        '```json\n{"openings": [{"target": "room1_id2", "kind": "door", "asset_query": "paneled door"}]}\n```'
    ),
    OBJECT: (
        "Example reply:\n```json\n"
        '{"regions": {"room1": {"stable": [{"slot": "center", "slot_index": 0, '
        '"object_query": "four poster bed"}], "relative": [], "wall": []}}}\n```'
    ),
}


class RemoteBackend:
    """Chat-completion client for a hosted language model.

    The API key comes from an environment variable; transport failures retry
    before surfacing as BackendUnavailableError.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = "OPENAI_API_KEY",
        temperature: float = 0.7,
        timeout: float = 60.0,
        retries: int = 2,
        transport: Optional[Callable[[dict], dict]] = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.temperature = temperature
        self.timeout = timeout
        self.retries = retries
        self._transport = transport

    def build_messages(self, role: str, context: str) -> list[dict]:
        spec = ROLE_TABLE[role]
        system = _ROLE_PLAY_PREAMBLE.format(name=spec.name, description=spec.description)
        if role in _FEW_SHOT:
            system += "\n\n" + _FEW_SHOT[role]
        return [{"role": "system", "content": system}, {"role": "user", "content": context}]

    def respond(self, role: str, context: str) -> str:
        payload = {
            "model": self.model,
            "temperature": self.temperature,
            "messages": self.build_messages(role, context),
        }
        last_error: Optional[Exception] = None
        for _ in range(self.retries + 1):
            try:
                if self._transport is not None:
                    data = self._transport(payload)
                else:
                    import requests

                    api_key = os.environ.get(self.api_key_env, "")
                    if not api_key:
                        raise BackendUnavailableError(
                            f"environment variable {self.api_key_env} is not set", role
                        )
                    response = requests.post(
                        self.endpoint,
                        json=payload,
                        headers={"Authorization": f"Bearer {api_key}"},
                        timeout=self.timeout,
                    )
                    response.raise_for_status()
                    data = response.json()
                return data["choices"][0]["message"]["content"]
            except BackendUnavailableError:
                raise
            except Exception as exc:  # transport failure: retry
                last_error = exc
        raise BackendUnavailableError(f"remote backend failed after retries: {last_error}", role)


# --- hooks and the chain ------------------------------------------------------------


@dataclass
class RetrievalEvent:
    role: str
    query: str
    category: str
    asset_id: str
    score: float


@dataclass
class ChainResult:
    params: StructuredParams
    turns: int
    transcript: list[AgentMessage] = field(default_factory=list)
    retrieval_trace: list[RetrievalEvent] = field(default_factory=list)
    check_reports: list[CheckReport] = field(default_factory=list)


class AgentChain:
    """Drives one chain run over a backend, bridging responses via hooks."""

    def __init__(self, backend: Backend, retriever=None, max_retries: int = DEFAULT_MAX_RETRIES):
        self.backend = backend
        self.retriever = retriever
        self.max_retries = max_retries

    def _trace(self, role: str, query: str, category: str, trace: list[RetrievalEvent]) -> None:
        if self.retriever is None or not query:
            return
        try:
            asset_id, score = self.retriever.search(query, category, k=1)[0]
        except Exception:
            return
        trace.append(RetrievalEvent(role, query, category, asset_id, score))

    def _language_turn(self, role: str, kind: str, context: str, result: ChainResult) -> dict:
        schema_id = ROLE_TABLE[role].duty_schema[kind]
        try:
            text = self.backend.respond(role, context)
        except ChainError:
            raise
        except Exception as exc:
            raise ChainError(f"backend failed at role {role}: {exc}", role) from exc
        result.transcript.append(AgentMessage(role, text))
        try:
            return extract_params(text, schema_id, role)
        except ChainError as exc:
            exc.role = exc.role or role
            raise

    def run(self, description: str) -> ChainResult:
        """Walk the FSM from Manager to Done and return the filled parameters."""
        result = ChainResult(params=StructuredParams(), turns=0)
        params = result.params

        payload = self._language_turn(MANAGER, "wall", description, result)
        result.turns += 1
        kind = payload["structure_kind"]
        params.structure_kind = kind
        fsm = make_turn_fsm(kind)
        adjacency_attempts = 0
        last_violations: list[str] = []
        outcome = OK

        while True:
            role = next_speaker(fsm, outcome)
            if role == DONE:
                break
            result.turns += 1
            if role == CHECK:
                report = validate_adjacency(
                    self._provisional_rooms(params), params.adjacency or AdjacencySpec()
                )
                result.check_reports.append(report)
                if report.ok:
                    outcome, last_violations = OK, []
                else:
                    if adjacency_attempts >= self.max_retries:
                        raise AdjacencyExhaustedError(
                            f"adjacency still invalid after {adjacency_attempts} attempts: "
                            f"{report.violations}",
                            ADJACENCY,
                        )
                    outcome, last_violations = FAIL, report.violations
                continue
            context = self._context_for(role, description, last_violations)
            payload = self._language_turn(role, kind, context, result)
            if role == ADJACENCY:
                adjacency_attempts += 1
            self._apply_hook(role, kind, payload, params, result)
            outcome = OK
        missing = params.missing_sections()
        if missing:
            raise ChainError(f"chain finished with incomplete sections: {missing}", OBJECT)
        return result

    def _provisional_rooms(self, params: StructuredParams) -> list[RoomSpec]:
        if params.rooms and all(r.width > 0 for r in params.rooms):
            return params.rooms
        return [
            RoomSpec(name, PROVISIONAL_ROOM_SIZE, PROVISIONAL_ROOM_SIZE)
            for name in params.room_functions
        ]

    def _context_for(self, role: str, description: str, violations: list[str]) -> str:
        context = description
        if role == ADJACENCY and violations:
            context += "\n\nYour previous plan was rejected:\n" + "\n".join(f"- {v}" for v in violations)
            context += "\nRevise the plan and reply again."
        return context

    def _apply_hook(self, role: str, kind: str, payload: dict, params: StructuredParams, result: ChainResult) -> None:
        trace = result.retrieval_trace
        if role == ALLOCATION:
            params.room_functions = {r["name"]: r.get("function", "") for r in payload["rooms"]}
            if kind == "column":
                g = payload["grid"]
                params.grid = ColumnGridSpec(
                    rows=g["rows"],
                    cols=g["cols"],
                    spacing=g["spacing"],
                    column_radius=g.get("column_radius", 0.25),
                    column_height=g.get("column_height", 3.5),
                    beam_section=(g.get("beam_width", 0.2), g.get("beam_height", 0.3)),
                )
        elif role == ADJACENCY:
            if kind == "wall":
                params.adjacency = AdjacencySpec(
                    [AdjacencyRelation(r["a"], r["b"], r["relation"]) for r in payload["relations"]]
                )
            else:
                params.room_cells = {
                    name: [tuple(int(v) for v in cell) for cell in cells]
                    for name, cells in payload["assignments"].items()
                }
                report = validate_room_cells(params.grid, params.room_cells)
                if not report.ok:
                    raise ChainError(
                        f"invalid cell assignment: {report.violations}", ADJACENCY
                    )
        elif role == SHAPE:
            functions = params.room_functions
            params.rooms = [
                RoomSpec(
                    name=r["name"],
                    width=float(r["width"]),
                    depth=float(r["depth"]),
                    arc_edges=[(int(a["edge"]), float(a["h_chord"])) for a in r.get("arc_edges", [])],
                )
                for r in payload["rooms"]
            ]
            declared = {r.name for r in params.rooms}
            missing = [name for name in functions if name not in declared]
            if missing:
                raise ChainError(f"Shape omitted rooms {missing}", SHAPE)
        elif role == MATERIAL:
            params.materials = dict(payload["entries"])
            for query in params.materials.values():
                self._trace(MATERIAL, query, "material", trace)
        elif role == DOOR_WINDOW:
            if kind == "wall":
                params.openings = [
                    OpeningSpec(
                        target=o["target"],
                        kind=o["kind"],
                        width=float(o.get("width", 0.0)),
                        height=float(o.get("height", 0.0)),
                        horizontal_offset=float(o.get("horizontal_offset", 0.0)),
                        asset_query=o.get("asset_query", ""),
                    )
                    for o in payload["openings"]
                ]
                for opening in params.openings:
                    self._trace(DOOR_WINDOW, opening.asset_query, "door_window", trace)
            else:
                params.opening_styles = dict(payload["styles"])
                for query in params.opening_styles.values():
                    self._trace(DOOR_WINDOW, query, "door_window", trace)
        elif role == OBJECT:
            params.objects = {}
            for region, objs in payload["regions"].items():
                bundle = RegionObjects(
                    stable=[
                        StableObjectSpec(s["slot"], int(s.get("slot_index", 0)), s["object_query"])
                        for s in objs.get("stable", [])
                    ],
                    relative=[
                        LayoutTriplet(t["anchor"], t["relation"], t["distance"], t["object_query"])
                        for t in objs.get("relative", [])
                    ],
                    wall=[WallObjectSpec(w["wall"], w["object_query"]) for w in objs.get("wall", [])],
                )
                if kind == "column" and bundle.wall:
                    raise ChainError("column sets take no wall objects", OBJECT)
                params.objects[region] = bundle
                for spec in bundle.stable:
                    self._trace(OBJECT, spec.object_query, "object", trace)
                for trip in bundle.relative:
                    self._trace(OBJECT, trip.object_query, "object", trace)
                for wobj in bundle.wall:
                    self._trace(OBJECT, wobj.object_query, "object", trace)


def check_loop(
    backend: Backend,
    rooms: list[RoomSpec],
    max_retries: int = DEFAULT_MAX_RETRIES,
    context: str = "",
) -> tuple[AdjacencySpec, int]:
    """Standalone generate-verify-revise cycle for adjacency planning.

    Invokes the Adjacency role, validates, and re-invokes with the violation
    report appended until the proposal passes. Returns (spec, attempts).

    Raises:
        AdjacencyExhaustedError: no valid proposal within ``max_retries`` attempts.
    """
    violations: list[str] = []
    for attempt in range(1, max_retries + 1):
        prompt = context
        if violations:
            prompt += "\n\nYour previous plan was rejected:\n" + "\n".join(f"- {v}" for v in violations)
        text = backend.respond(ADJACENCY, prompt)
        payload = extract_params(text, "adjacency_wall", ADJACENCY)
        spec = AdjacencySpec(
            [AdjacencyRelation(r["a"], r["b"], r["relation"]) for r in payload["relations"]]
        )
        report = validate_adjacency(rooms, spec)
        if report.ok:
            return spec, attempt
        violations = report.violations
    raise AdjacencyExhaustedError(
        f"adjacency invalid after {max_retries} attempts: {violations}", ADJACENCY
    )


def run_chain(description: str, backend: Backend, retriever=None, max_retries: int = DEFAULT_MAX_RETRIES) -> StructuredParams:
    """Run the full agent chain and return the structured parameters."""
    return AgentChain(backend, retriever=retriever, max_retries=max_retries).run(description).params
