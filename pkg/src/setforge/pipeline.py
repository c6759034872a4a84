"""End-to-end scene generation: chain (or prebuilt parameters) -> four
procedural stages -> JSON/OBJ/SVG artifacts plus a hashed manifest.

Stages always run floorplan -> materials -> openings -> layout. Everything is
deterministic for a fixed catalog, fixtures and config; file writes go through
a temp-and-rename so a failed run leaves no partial outputs behind.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

from . import agents, exporters, floorplan, layout as layout_mod, materials as materials_mod, openings as openings_mod
from .agents import AgentChain, ChainResult, RegionObjects, ScriptedBackend, StructuredParams
from .core import SceneElement, SceneGraph, set_attribute
from .floorplan import ColumnGridSpec, PlacedFloorplan, unit_regions
from .layout import Placement, PlacementConfig, PlacementRegion, UnresolvableError
from .openings import ColumnOpeningPlan, Opening, OpeningSpec
from .retrieval import AssetRecord, Catalog, MockEmbedder, Retriever, load_catalog, load_obj_mesh

logger = logging.getLogger(__name__)

STAGES = ("floorplan", "materials", "openings", "layout")
FORMATS = ("json", "obj", "svg")


class PipelineError(Exception):
    pass


class StageError(PipelineError):
    def __init__(self, stage: str, message: str, parameter: str = ""):
        detail = f"stage {stage!r}"
        if parameter:
            detail += f", parameter {parameter!r}"
        super().__init__(f"{detail}: {message}")
        self.stage = stage
        self.parameter = parameter


@dataclass
class PipelineConfig:
    catalog_path: str = ""
    embeddings_path: Optional[str] = None
    backend: str = "scripted"  # scripted | remote
    fixtures_path: Optional[str] = None
    remote_endpoint: str = ""
    remote_model: str = "gpt-4o"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.7
    remote_timeout: float = 60.0
    wall_thickness: float = 0.2
    wall_height: float = 3.0
    arc_segments: int = 16
    column_margin: float = 1.0
    default_door: tuple[float, float] = (1.0, 2.1)
    default_window: tuple[float, float] = (1.2, 1.0)
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    max_retries: int = 3
    out_dir: str = "out"
    formats: tuple[str, ...] = FORMATS
    random_seed: int = 0  # reserved; the pipeline is fully deterministic today

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        config = cls()
        placement = data.pop("placement", None)
        for key, value in data.items():
            if not hasattr(config, key):
                raise PipelineError(f"unknown config key {key!r}")
            if key in ("default_door", "default_window", "formats"):
                value = tuple(value)
            setattr(config, key, value)
        if placement:
            config.placement = PlacementConfig(
                lam=placement.get("lam", config.placement.lam),
                basis={k: tuple(v) for k, v in placement.get("basis", {}).items()} or config.placement.basis,
                collision_max_iters=placement.get("collision_max_iters", config.placement.collision_max_iters),
                collision_step=placement.get("collision_step", config.placement.collision_step),
            )
        return config

    def validate(self) -> None:
        if not self.catalog_path or not Path(self.catalog_path).exists():
            raise PipelineError(f"catalog not found: {self.catalog_path!r}")
        if not self.formats:
            raise PipelineError("at least one export format is required")
        for fmt in self.formats:
            if fmt not in FORMATS:
                raise PipelineError(f"unknown export format {fmt!r}")
        if self.backend not in ("scripted", "remote"):
            raise PipelineError(f"unknown backend {self.backend!r}")
        if self.backend == "scripted" and not self.fixtures_path:
            raise PipelineError("scripted backend needs a fixtures file")
        if self.backend == "remote" and not self.remote_endpoint:
            raise PipelineError("remote backend needs an endpoint")


@dataclass
class SceneBundle:
    """Everything one run produced, for exporters and tests."""

    graph: SceneGraph
    params: StructuredParams
    plan: Optional[PlacedFloorplan] = None
    grid: Optional[ColumnGridSpec] = None
    openings: list[Opening] = field(default_factory=list)
    column_plan: Optional[ColumnOpeningPlan] = None
    placements: dict[str, list[Placement]] = field(default_factory=dict)
    room_cells: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    stage_log: list[str] = field(default_factory=list)


def _asset_mesh(catalog: Catalog, record: AssetRecord) -> tuple[list, list]:
    """Load an asset mesh normalized to its native size: footprint centered at
    the origin, base at z = 0."""
    if record.mesh_path:
        vertices, faces = load_obj_mesh(Path(catalog.root) / record.mesh_path)
    else:
        from .core import box_mesh

        w, d, h = record.native_size
        return box_mesh((-w / 2, -d / 2, 0.0), (w / 2, d / 2, h))
    import numpy as np

    pts = np.asarray(vertices, dtype=float)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    extent = np.where(hi - lo < 1e-12, 1.0, hi - lo)
    target = np.asarray(record.native_size, dtype=float)
    scaled = (pts - lo) / extent * target
    scaled[:, 0] -= target[0] / 2
    scaled[:, 1] -= target[1] / 2
    return [tuple(p) for p in scaled], faces


def _placement_element(placement: Placement, mesh: tuple[list, list], attr_id: str) -> SceneElement:
    from .core import Transform

    vertices, faces = mesh
    return SceneElement(
        attribute_id=attr_id,
        vertices=list(vertices),
        faces=list(faces),
        transform=Transform(
            translation=placement.position, yaw=placement.yaw, scale=placement.scale
        ),
        material_ref=f"asset_{placement.object_id}",
        metadata={
            "placement": {
                "object": placement.object_id,
                "slot": placement.slot,
                "anchor_id": placement.anchor_id,
                "anchor_ref": placement.anchor_ref,
            }
        },
    )


class ScenePipeline:
    """Runs the procedural stages for one parameter bundle."""

    def __init__(self, config: PipelineConfig, retriever: Retriever):
        self.config = config
        self.retriever = retriever
        self.catalog = retriever.catalog

    # -- stage 1: floorplan ---------------------------------------------------

    def build(self, params: StructuredParams) -> SceneBundle:
        if params.structure_kind == "wall":
            bundle = self._build_wall_structure(params)
        elif params.structure_kind == "column":
            bundle = self._build_column_structure(params)
        else:
            raise StageError("floorplan", f"unknown structure kind {params.structure_kind!r}", "structure_kind")
        bundle.stage_log.append("floorplan")

        try:
            assignment = materials_mod.resolve_materials(
                params.materials, self.retriever, bundle.graph.attribute_ids()
            )
            materials_mod.apply_material(bundle.graph, assignment)
        except materials_mod.MaterialError as exc:
            raise StageError("materials", str(exc), "materials") from exc
        bundle.stage_log.append("materials")

        if params.structure_kind == "wall":
            self._wall_openings(params, bundle)
        else:
            self._column_openings(params, bundle)
        bundle.stage_log.append("openings")

        self._layout(params, bundle)
        bundle.stage_log.append("layout")

        bundle.graph.validate()
        return bundle

    def _build_wall_structure(self, params: StructuredParams) -> SceneBundle:
        config = self.config
        try:
            plan = floorplan.place_rooms(
                params.rooms,
                params.adjacency,
                wall_thickness=config.wall_thickness,
                wall_height=config.wall_height,
            )
            edges = floorplan.parse_edge(plan)
            floors = floorplan.tessellate(edges, config.arc_segments, rooms=list(plan.rooms))
            walls = floorplan.build_walls(plan, edges, arc_segments=config.arc_segments)
        except floorplan.FloorplanError as exc:
            raise StageError("floorplan", str(exc), "rooms/adjacency") from exc

        graph = SceneGraph(structure_kind="wall")
        containers: dict[str, SceneElement] = {}
        for name in plan.rooms:
            container = SceneElement(attribute_id=name)
            containers[name] = container
            graph.add_root(container)
            container.children.append(floors[name].element)
        outer = SceneElement(attribute_id="outer")
        graph.add_root(outer)
        for wall in walls:
            owner = wall.metadata.get("wall", wall.metadata.get("arc"))["room"]
            containers[owner].children.append(wall)
        graph.rebuild_registry()
        graph.validate()
        return SceneBundle(graph=graph, params=params, plan=plan)

    def _build_column_structure(self, params: StructuredParams) -> SceneBundle:
        try:
            params.grid.validate()
            report = agents.validate_room_cells(params.grid, params.room_cells)
            if not report.ok:
                raise StageError("floorplan", "; ".join(report.violations), "room_cells")
            elements = floorplan.build_column_grid(params.grid, margin=self.config.column_margin)
        except floorplan.FloorplanError as exc:
            raise StageError("floorplan", str(exc), "grid") from exc
        graph = SceneGraph(structure_kind="column")
        for element in elements:
            graph.add_root(element)
        graph.validate()
        return SceneBundle(
            graph=graph, params=params, grid=params.grid, room_cells=dict(params.room_cells)
        )

    # -- stage 3: openings ------------------------------------------------------

    def _wall_openings(self, params: StructuredParams, bundle: SceneBundle) -> None:
        counters: dict[str, int] = {}
        for spec in params.openings:
            if not bundle.graph.has_attribute(spec.target):
                raise StageError("openings", f"unknown wall {spec.target!r}", "openings.target")
            wall = bundle.graph.get(spec.target)
            default = self.config.default_door if spec.kind == "door" else self.config.default_window
            spec = replace(spec, width=spec.width or default[0], height=spec.height or default[1])
            try:
                opening = openings_mod.open_wall(wall, spec)
            except openings_mod.OpeningError as exc:
                raise StageError("openings", str(exc), f"openings[{spec.target}]") from exc
            bundle.openings.append(opening)
            query = spec.asset_query or f"standard {spec.kind}"
            asset = self.retriever.top1(query, "door_window")
            index = counters.get(spec.target, 0)
            counters[spec.target] = index + 1
            element = openings_mod.fit_asset(
                opening,
                asset,
                mesh=_asset_mesh(self.catalog, asset),
                attribute_id=f"{spec.target}_{spec.kind}_{index}",
            )
            element.material_ref = f"asset_{asset.id}"
            wall.children.append(element)
            bundle.graph.register(element)

    def _column_openings(self, params: StructuredParams, bundle: SceneBundle) -> None:
        partitions = agents.partitions_from_cells(bundle.grid, bundle.room_cells)
        try:
            plan = openings_mod.plan_column_openings(bundle.grid, partitions, params.opening_styles)
        except openings_mod.OpeningError as exc:
            raise StageError("openings", str(exc), "opening_styles") from exc
        bundle.column_plan = plan
        for index, slot in enumerate(plan.slots):
            query = slot.asset_query or slot.fill.replace("_", " ")
            asset = self.retriever.top1(query, "door_window")
            element = openings_mod.fill_column_gap(
                bundle.grid,
                slot,
                asset,
                mesh=_asset_mesh(self.catalog, asset),
                attribute_id=f"gap{index}_{slot.fill}",
            )
            element.material_ref = f"asset_{asset.id}"
            bundle.graph.add_root(element)

    # -- stage 4: layout ----------------------------------------------------------

    def _layout(self, params: StructuredParams, bundle: SceneBundle) -> None:
        if params.structure_kind == "wall":
            regions = {
                name: PlacementRegion(kind="room", polygon=bundle.plan.polygon(name), id=name)
                for name in bundle.plan.rooms
            }
            room_units = None
        else:
            units = unit_regions(bundle.grid)
            by_cell = {(u.i1, u.j1): u for u in units}
            regions = {}
            room_units = {}
            for room, cells in sorted(bundle.room_cells.items()):
                cell_list = sorted((int(i), int(j)) for i, j in cells)
                room_units[room] = []
                for i, j in cell_list:
                    unit = by_cell[(i, j)]
                    x0, y0, x1, y1 = unit.rect
                    region = PlacementRegion(
                        kind="unit",
                        polygon=[(x0, y0), (x1, y0), (x1, y1), (x0, y1)],
                        id=(unit.i1, unit.j1, unit.i2, unit.j2),
                    )
                    regions[region.tag] = region
                    room_units[room].append(region)

        object_counter = 0
        for room in sorted(params.objects):
            bundle_objects: RegionObjects = params.objects[room]
            if params.structure_kind == "column" and bundle_objects.wall:
                raise StageError("layout", "column sets take no wall objects", f"objects[{room}].wall")
            if params.structure_kind == "wall":
                if room not in regions:
                    raise StageError("layout", f"unknown room {room!r}", f"objects[{room}]")
                target_regions = [regions[room]]
            else:
                if room not in room_units or not room_units[room]:
                    raise StageError("layout", f"room {room!r} has no unit cells", f"objects[{room}]")
                target_regions = room_units[room]

            anchors: dict[str, Placement] = {}
            per_region: dict[str, list[Placement]] = {r.tag: [] for r in target_regions}
            anchor_counters: dict[str, int] = {r.tag: 0 for r in target_regions}
            sequence = 0
            try:
                for slot_index, spec in enumerate(bundle_objects.stable):
                    region = target_regions[slot_index % len(target_regions)]
                    asset = self.retriever.top1(spec.object_query, "object")
                    anchor_index = None
                    if spec.slot in ("edge", "center"):
                        anchor_counters[region.tag] += 1
                        anchor_index = anchor_counters[region.tag]
                    placement = layout_mod.place_stable(
                        region, asset, spec.slot, spec.slot_index,
                        anchor_index=anchor_index, sequence=sequence,
                    )
                    sequence += 1
                    per_region[region.tag].append(placement)
                    if placement.anchor_id:
                        anchors[placement.anchor_id] = placement
                region_of_anchor = {
                    p.anchor_id: region.tag
                    for region in target_regions
                    for p in per_region[region.tag]
                    if p.anchor_id
                }
                for triplet in bundle_objects.relative:
                    if triplet.anchor not in anchors:
                        raise layout_mod.UnknownAnchorError(f"anchor {triplet.anchor!r} does not exist")
                    tag = region_of_anchor[triplet.anchor]
                    region = next(r for r in target_regions if r.tag == tag)
                    asset = self.retriever.top1(triplet.object_query, "object")
                    placement = layout_mod.place_relative(
                        triplet, anchors, self.config.placement, asset, region=region, sequence=sequence
                    )
                    sequence += 1
                    per_region[tag].append(placement)
            except layout_mod.LayoutError as exc:
                raise StageError("layout", str(exc), f"objects[{room}]") from exc

            for region in target_regions:
                placements = per_region[region.tag]
                if not placements:
                    continue
                placements = self._resolve_collisions(region, placements)
                placements = layout_mod.refine_orientation(placements, region)
                placements = self._resolve_collisions(region, placements)
                bundle.placements.setdefault(region.tag, []).extend(placements)
                for placement in placements:
                    asset = self.catalog.get(placement.object_id)
                    attr = f"{region.tag}_obj{object_counter}_{asset.category}"
                    object_counter += 1
                    element = _placement_element(placement, _asset_mesh(self.catalog, asset), attr)
                    parent = (
                        bundle.graph.get(room) if params.structure_kind == "wall" else None
                    )
                    if parent is not None:
                        parent.children.append(element)
                        bundle.graph.register(element)
                    else:
                        bundle.graph.add_root(element)

            for wall_spec in bundle_objects.wall:
                if not bundle.graph.has_attribute(wall_spec.wall):
                    raise StageError("layout", f"unknown wall {wall_spec.wall!r}", f"objects[{room}].wall")
                wall = bundle.graph.get(wall_spec.wall)
                asset = self.retriever.top1(wall_spec.object_query, "object")
                try:
                    placement = layout_mod.place_wall_object(wall, asset, sequence=sequence)
                except layout_mod.LayoutError as exc:
                    raise StageError("layout", str(exc), f"objects[{room}].wall") from exc
                sequence += 1
                bundle.placements.setdefault(room, []).append(placement)
                attr = f"{room}_obj{object_counter}_wall"
                object_counter += 1
                element = _placement_element(placement, _asset_mesh(self.catalog, asset), attr)
                wall.children.append(element)
                bundle.graph.register(element)

    def _resolve_collisions(self, region: PlacementRegion, placements: list[Placement]) -> list[Placement]:
        try:
            return layout_mod.avoid_collision(placements, region, self.config.placement)
        except UnresolvableError as exc:
            # drop the lowest-priority offender and retry once
            logger.warning("collision resolution failed in %s; dropping one object", region.tag)
            survivors = sorted(
                exc.placements, key=lambda p: (layout_mod.PRIORITY[p.slot], p.sequence)
            )[:-1]
            return layout_mod.avoid_collision(survivors, region, self.config.placement)


# --- artifact writing -----------------------------------------------------------


def _write_atomic(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def make_retriever(config: PipelineConfig) -> Retriever:
    catalog = load_catalog(config.catalog_path, config.embeddings_path)
    return Retriever(catalog, MockEmbedder())


def make_backend(config: PipelineConfig):
    if config.backend == "scripted":
        return ScriptedBackend.from_file(config.fixtures_path)
    return agents.RemoteBackend(
        endpoint=config.remote_endpoint,
        model=config.remote_model,
        api_key_env=config.api_key_env,
        temperature=config.temperature,
        timeout=config.remote_timeout,
    )


def generate(
    config: PipelineConfig,
    description: Optional[str] = None,
    params: Optional[StructuredParams] = None,
    params_path: Optional[str | Path] = None,
) -> dict:
    """Run the pipeline end to end and write the configured artifacts.

    Input is either a natural-language description (routed through the agent
    chain) or a prebuilt parameter bundle. Returns the manifest; on stage
    failure all partial outputs are removed.
    """
    config.validate()
    retriever = make_retriever(config)

    chain_result: Optional[ChainResult] = None
    if params is None and params_path is not None:
        params = StructuredParams.from_dict(json.loads(Path(params_path).read_text(encoding="utf-8")))
    if params is None:
        if description is None:
            raise PipelineError("either a description or a parameter bundle is required")
        backend = make_backend(config)
        chain_result = AgentChain(backend, retriever=retriever, max_retries=config.max_retries).run(description)
        params = chain_result.params
    missing = params.missing_sections()
    if missing:
        raise PipelineError(f"parameter bundle incomplete: missing {missing}")

    pipeline = ScenePipeline(config, retriever)
    bundle = pipeline.build(params)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, bytes] = {}
    if "json" in config.formats:
        written["scene.json"] = exporters.export_json(bundle.graph)
    if "obj" in config.formats:
        obj_bytes, mtl_bytes = exporters.export_obj(bundle.graph)
        written["scene.obj"] = obj_bytes
        written["scene.mtl"] = mtl_bytes
    if "svg" in config.formats:
        written["floorplan.svg"] = exporters.export_svg(bundle)

    paths: list[Path] = []
    try:
        for name, data in written.items():
            path = out_dir / name
            _write_atomic(path, data)
            paths.append(path)
    except BaseException:
        for path in paths:
            path.unlink(missing_ok=True)
        raise

    manifest = {
        "structure_kind": params.structure_kind,
        "stages": bundle.stage_log,
        "files": {name: _sha256(data) for name, data in sorted(written.items())},
    }
    if chain_result is not None:
        manifest["turns"] = chain_result.turns
    _write_atomic(out_dir / "manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    return manifest


# --- built-in demo ---------------------------------------------------------------


def demo_data_dir() -> Path:
    return Path(str(resources.files("setforge"))) / "data" / "demo"


def demo_config(out_dir: str | Path, kind: str = "wall") -> PipelineConfig:
    data = demo_data_dir()
    return PipelineConfig(
        catalog_path=str(data / "catalog.json"),
        fixtures_path=str(data / ("fixtures_wall.json" if kind == "wall" else "fixtures_column.json")),
        out_dir=str(out_dir),
    )


def run_demo(out_dir: str | Path, kind: str = "wall") -> dict:
    """Generate the built-in demo scene from shipped fixtures and catalog."""
    config = demo_config(out_dir, kind)
    description = (
        "a western guestroom, victorian europe, late 19th century"
        if kind == "wall"
        else "a chinese residence hall, qing dynasty, traditional timber frame"
    )
    return generate(config, description=description)
