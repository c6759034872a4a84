import numpy as np
import pytest

from setforge.core import SceneElement, SceneGraph
from setforge.exporters import export_json
from setforge.floorplan import ColumnGridSpec, build_column_grid
from setforge.materials import (
    AmbiguousPatternError,
    EmptyCatalogCategoryError,
    MaterialError,
    UnknownAttributeError,
    apply_material,
    resolve_materials,
)
from setforge.retrieval import AssetRecord, MockEmbedder, Catalog, Retriever


def make_retriever(materials):
    records = [
        AssetRecord(id=mid, category="material", annotations={"category_label": text}, uv_scale=1.0)
        for mid, text in materials
    ]
    records.append(
        AssetRecord(id="obj_chair", category="object", annotations={"category_label": "chair"},
                    native_size=(0.5, 0.5, 0.9))
    )
    return Retriever(Catalog(root=".", records=records), MockEmbedder())


@pytest.fixture
def three_material_retriever():
    return make_retriever(
        [("m_concrete", "aged concrete wall"), ("m_marble", "white marble"), ("m_brick", "red brick")]
    )


def column_graph():
    graph = SceneGraph(structure_kind="column")
    for element in build_column_grid(ColumnGridSpec(rows=3, cols=4, spacing=4.0)):
        graph.add_root(element)
    return graph


class TestResolveMaterials:
    def test_token_overlap_picks_the_right_material(self, three_material_retriever):
        assignment = resolve_materials(
            {"room1_id2": "aged concrete wall"}, three_material_retriever, ["room1_id2"]
        )
        assert assignment.resolved == {"room1_id2": "m_concrete"}

    def test_verbatim_query_is_exact(self, three_material_retriever):
        results = three_material_retriever.search("white marble", "material", k=1)
        assert results[0] == ("m_marble", pytest.approx(1.0))

    def test_pattern_expansion(self, three_material_retriever):
        ids = ["room1_id1", "room1_id2", "room1_id3", "room1_id4", "room1_floor"]
        assignment = resolve_materials({"room1_id*": "red brick"}, three_material_retriever, ids)
        assert sorted(assignment.resolved) == ["room1_id1", "room1_id2", "room1_id3", "room1_id4"]

    def test_ambiguous_patterns_rejected(self, three_material_retriever):
        with pytest.raises(AmbiguousPatternError):
            resolve_materials(
                {"room1_id*": "red brick", "room1_id2": "white marble"},
                three_material_retriever,
                ["room1_id2"],
            )

    def test_empty_query_rejected(self, three_material_retriever):
        with pytest.raises(MaterialError):
            resolve_materials({"room1_id2": "  "}, three_material_retriever, ["room1_id2"])

    def test_empty_material_category(self):
        retriever = Retriever(
            Catalog(root=".", records=[
                AssetRecord(id="o1", category="object", annotations={"category_label": "chair"},
                            native_size=(1, 1, 1))
            ]),
            MockEmbedder(),
        )
        with pytest.raises(EmptyCatalogCategoryError):
            resolve_materials({"room1_id2": "red brick"}, retriever, ["room1_id2"])

    def test_deterministic(self, three_material_retriever):
        ids = ["room1_id1", "room1_id2"]
        entries = {"room1_id*": "red brick"}
        a = resolve_materials(entries, three_material_retriever, ids)
        b = resolve_materials(entries, three_material_retriever, ids)
        assert a.resolved == b.resolved


class TestApplyMaterial:
    def test_floor_only(self, three_material_retriever):
        graph = SceneGraph(structure_kind="wall")
        floor = SceneElement(attribute_id="room1_floor", vertices=[(0, 0, 0)], faces=[])
        wall = SceneElement(attribute_id="room1_id2", vertices=[(0, 0, 0)], faces=[])
        graph.add_root(floor)
        graph.add_root(wall)
        assignment = resolve_materials({"room1_floor": "red brick"}, three_material_retriever,
                                       graph.attribute_ids())
        apply_material(graph, assignment)
        assert floor.material_ref == "m_brick"
        assert wall.material_ref == "default_plaster"  # untargeted gets the default

    def test_column_batch(self, three_material_retriever):
        graph = column_graph()
        assignment = resolve_materials(
            {"floor": "white marble", "column": "red brick", "beam": "aged concrete wall"},
            three_material_retriever,
            graph.attribute_ids(),
        )
        apply_material(graph, assignment)
        columns = [e for e in graph.elements() if e.attribute_id.startswith("column_")]
        assert len(columns) == 12
        assert {c.material_ref for c in columns} == {"m_brick"}
        assert {e.material_ref for e in graph.elements() if e.attribute_id.startswith("beam_")} == {"m_concrete"}

    def test_idempotent(self, three_material_retriever):
        graph = column_graph()
        assignment = resolve_materials(
            {"floor": "white marble", "column": "red brick", "beam": "aged concrete wall"},
            three_material_retriever,
            graph.attribute_ids(),
        )
        apply_material(graph, assignment)
        first = export_json(graph)
        apply_material(graph, assignment)
        assert export_json(graph) == first

    def test_unknown_attribute(self, three_material_retriever):
        graph = column_graph()
        assignment = resolve_materials({"room9_floor": "red brick"}, three_material_retriever,
                                       ["room9_floor"])
        with pytest.raises(UnknownAttributeError):
            apply_material(graph, assignment)

    def test_no_element_left_unset(self, three_material_retriever):
        graph = column_graph()
        assignment = resolve_materials({"floor": "white marble"}, three_material_retriever,
                                       graph.attribute_ids())
        apply_material(graph, assignment)
        assert all(e.material_ref is not None for e in graph.elements())
