import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setforge.core import (
    DuplicateAttributeError,
    MalformedAttributeError,
    NonPositiveScaleError,
    SceneElement,
    SceneGraph,
    Transform,
    apply_transform,
    box_mesh,
    mesh_boundary_edges,
    parse_attribute_id,
    set_attribute,
)


def unit_cube() -> SceneElement:
    verts, faces = box_mesh((0, 0, 0), (1, 1, 1))
    return SceneElement(attribute_id="", vertices=verts, faces=faces)


def matrix_oracle(transform: Transform) -> np.ndarray:
    """T @ R @ S as an explicit 4x4, independent of Transform.apply."""
    c, s = math.cos(transform.yaw), math.sin(transform.yaw)
    T = np.eye(4)
    T[:3, 3] = transform.translation
    R = np.eye(4)
    R[:2, :2] = [[c, -s], [s, c]]
    S = np.diag([*transform.scale, 1.0])
    return T @ R @ S


def apply_oracle(transform: Transform, points) -> np.ndarray:
    M = matrix_oracle(transform)
    pts = np.hstack([np.asarray(points, dtype=float), np.ones((len(points), 1))])
    return (pts @ M.T)[:, :3]


class TestAttributeGrammar:
    @pytest.mark.parametrize(
        "raw",
        ["room1", "room12", "room2_floor", "room1_id1", "room3_id4", "room1_id3_2",
         "arc1", "outer", "floor", "column_0_0", "column_12_3", "beam_17"],
    )
    def test_valid_ids(self, raw):
        assert parse_attribute_id(raw).raw == raw

    @pytest.mark.parametrize(
        "raw",
        ["room0", "room1_id5", "room1_id0", "room", "rooms1", "arc", "column_1",
         "beam", "room1_floor_2", "Room1", "room1_id2_1", ""],
    )
    def test_malformed_ids(self, raw):
        with pytest.raises(MalformedAttributeError):
            parse_attribute_id(raw)

    def test_side_mapping(self):
        parsed = parse_attribute_id("room2_id1")
        assert (parsed.room, parsed.side) == (2, 1)  # west
        assert parse_attribute_id("room2_id4").side == 4  # east


class TestSetAttribute:
    def test_floor_tagging(self):
        graph = SceneGraph(structure_kind="wall")
        element = unit_cube()
        set_attribute(element, "room2_floor", graph)
        assert element.attribute_id == "room2_floor"
        assert graph.get("room2_floor") is element

    def test_duplicate_rejected(self):
        graph = SceneGraph(structure_kind="wall")
        set_attribute(unit_cube(), "room1_id4", graph)
        with pytest.raises(DuplicateAttributeError):
            set_attribute(unit_cube(), "room1_id4", graph)

    def test_malformed_rejected(self):
        with pytest.raises(MalformedAttributeError):
            set_attribute(unit_cube(), "room1_id5")


class TestApplyTransform:
    def test_identity_translate_is_noop(self):
        element = unit_cube()
        before = element.transform
        apply_transform(element, translate=(0, 0, 0))
        assert element.transform == before

    def test_rotate_then_translate_matches_matrix_oracle(self):
        element = unit_cube()
        apply_transform(element, rotate=math.pi / 2)
        apply_transform(element, translate=(1, 0, 0))
        baked = element.transform.apply(element.vertices)
        expected = apply_oracle(element.transform, element.vertices)
        assert np.allclose(baked, expected, atol=1e-12)
        lo, hi = baked.min(axis=0), baked.max(axis=0)
        oracle_lo, oracle_hi = expected.min(axis=0), expected.max(axis=0)
        assert np.allclose(lo, oracle_lo, atol=1e-12) and np.allclose(hi, oracle_hi, atol=1e-12)

    def test_scale_changes_aabb_extents(self):
        element = unit_cube()
        apply_transform(element, scale=(2, 1, 1))
        baked = element.transform.apply(element.vertices)
        extents = baked.max(axis=0) - baked.min(axis=0)
        assert np.allclose(extents, [2, 1, 1])

    def test_non_positive_scale_rejected(self):
        with pytest.raises(NonPositiveScaleError):
            apply_transform(unit_cube(), scale=(0, 1, 1))
        with pytest.raises(NonPositiveScaleError):
            apply_transform(unit_cube(), scale=(1, -2, 1))

    @settings(max_examples=100, deadline=None)
    @given(
        ops=st.lists(
            st.tuples(
                st.floats(-math.pi, math.pi),
                st.tuples(*[st.floats(0.1, 3.0)] * 3),
                st.tuples(*[st.floats(-5, 5)] * 3),
            ),
            min_size=2,
            max_size=5,
        )
    )
    def test_composition_associative(self, ops):
        stepwise = unit_cube()
        for rotate, scale, translate in ops:
            apply_transform(stepwise, rotate=rotate, scale=scale, translate=translate)
        merged = Transform(
            translation=tuple(sum(op[2][i] for op in ops) for i in range(3)),
            yaw=sum(op[0] for op in ops),
            scale=tuple(math.prod(op[1][i] for op in ops) for i in range(3)),
        )
        direct = unit_cube()
        direct.transform = direct.transform.compose(merged)
        a = stepwise.transform.apply(stepwise.vertices)
        b = direct.transform.apply(direct.vertices)
        assert np.allclose(a, b, atol=1e-9)


class TestSceneGraph:
    def test_registry_rejects_duplicates_across_tree(self):
        graph = SceneGraph(structure_kind="wall")
        a, b = unit_cube(), unit_cube()
        a.attribute_id = "room1"
        b.attribute_id = "room1"
        graph.roots = [a, b]
        with pytest.raises(DuplicateAttributeError):
            graph.validate()

    def test_bounding_box_covers_all_vertices(self):
        graph = SceneGraph(structure_kind="wall")
        a = unit_cube()
        a.attribute_id = "room1"
        apply_transform(a, translate=(5, 5, 0))
        graph.add_root(a)
        lo, hi = graph.recompute_bounding_box()
        assert lo == (5, 5, 0) and hi == (6, 6, 1)

    def test_child_aabb_within_parent_report(self):
        parent = unit_cube()
        parent.attribute_id = "room1"
        child = unit_cube()
        child.attribute_id = "room1_floor"
        apply_transform(child, scale=(0.5, 0.5, 0.5), translate=(0.2, 0.2, 0))
        parent.children.append(child)
        parent_box = parent.world_aabb()
        child_box = child.world_aabb(parent.transform)
        assert all(child_box[0][i] >= parent_box[0][i] - 1e-9 for i in range(3))
        assert all(child_box[1][i] <= parent_box[1][i] + 1e-9 for i in range(3))

    def test_face_index_validation(self):
        bad = SceneElement(attribute_id="room1", vertices=[(0, 0, 0)], faces=[(0, 1, 2)])
        graph = SceneGraph(structure_kind="wall", roots=[bad])
        with pytest.raises(Exception):
            graph.validate()


def test_box_mesh_is_watertight():
    _, faces = box_mesh((0, 0, 0), (2, 1, 3))
    assert mesh_boundary_edges(faces) == []
