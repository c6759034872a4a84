"""setforge: procedural film-set scene generation.

An agent chain (scripted fixtures or a remote language model) turns a scene
brief into structured parameters; a four-stage procedural pipeline realizes
them as structure (walls or column grids), materials, door/window placement
and object layout, then exports a JSON scene graph, OBJ meshes and an SVG
construction drawing.
"""

__version__ = "0.1.0"

from .core import SceneElement, SceneGraph, Transform, apply_transform, set_attribute
from .floorplan import (
    AdjacencyRelation,
    AdjacencySpec,
    ColumnGridSpec,
    PlacedFloorplan,
    RoomSpec,
    build_column_grid,
    build_walls,
    parse_edge,
    place_rooms,
    tessellate,
)
from .pipeline import PipelineConfig, generate, run_demo

__all__ = [
    "AdjacencyRelation",
    "AdjacencySpec",
    "ColumnGridSpec",
    "PipelineConfig",
    "PlacedFloorplan",
    "RoomSpec",
    "SceneElement",
    "SceneGraph",
    "Transform",
    "apply_transform",
    "build_column_grid",
    "build_walls",
    "generate",
    "parse_edge",
    "place_rooms",
    "run_demo",
    "set_attribute",
    "tessellate",
    "__version__",
]
