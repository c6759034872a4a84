import math
import random

import numpy as np
import pytest

from setforge.core import mesh_boundary_edges
from setforge.floorplan import (
    AdjacencySpec,
    ColumnGridSpec,
    RoomSpec,
    build_walls,
    parse_edge,
    place_rooms,
)
from setforge.geometry import point_in_polygon
from setforge.openings import (
    ColumnSlot,
    DegenerateAssetError,
    OpeningOnArcError,
    OpeningSpec,
    OpeningTooLargeError,
    OverlapWithExistingOpeningError,
    PartitionOnPerimeterError,
    YAW_FOR_SIDE,
    fill_column_gap,
    fit_asset,
    gap_geometry,
    hole_world_box,
    open_wall,
    perimeter_gaps,
    plan_column_openings,
)
from setforge.retrieval import AssetRecord


def wall_for(side_id: str, width=4.0, depth=3.0):
    plan = place_rooms([RoomSpec("room1", width, depth)], AdjacencySpec())
    walls = build_walls(plan, parse_edge(plan), thickness=0.2, height=3.0)
    return next(w for w in walls if w.attribute_id == side_id), plan


def door_asset(native=(1.0, 0.1, 2.0)):
    return AssetRecord(id="door_x", category="door",
                       annotations={"category_label": "door"}, native_size=native)


class TestOpenWall:
    def test_door_from_ground(self):
        wall, _ = wall_for("room1_id2")
        opening = open_wall(wall, OpeningSpec("room1_id2", "door", 1.0, 2.1, 1.5))
        assert opening.hole["z0"] == 0.0
        assert opening.hole["z1"] == pytest.approx(2.1)
        assert (opening.hole["u0"], opening.hole["u1"]) == (1.5, 2.5)

    def test_window_vertically_centered(self):
        wall, _ = wall_for("room1_id2")
        opening = open_wall(wall, OpeningSpec("room1_id2", "window", 1.2, 1.0, 0.5))
        assert opening.hole["z0"] == pytest.approx(1.0)
        assert opening.hole["z1"] == pytest.approx(2.0)

    def test_oversized_door_rejected(self):
        wall, _ = wall_for("room1_id2")
        with pytest.raises(OpeningTooLargeError):
            open_wall(wall, OpeningSpec("room1_id2", "door", 5.0, 2.1, 0.0))

    def test_no_lintel_rejected(self):
        wall, _ = wall_for("room1_id2")
        with pytest.raises(OpeningTooLargeError):
            open_wall(wall, OpeningSpec("room1_id2", "door", 1.0, 2.9, 0.5))

    def test_overlapping_openings_rejected(self):
        wall, _ = wall_for("room1_id2")
        open_wall(wall, OpeningSpec("room1_id2", "door", 1.0, 2.1, 1.5))
        with pytest.raises(OverlapWithExistingOpeningError):
            open_wall(wall, OpeningSpec("room1_id2", "window", 1.0, 1.0, 2.55))

    def test_disjoint_openings_allowed_with_mullion(self):
        wall, _ = wall_for("room1_id2")
        open_wall(wall, OpeningSpec("room1_id2", "door", 1.0, 2.1, 0.2))
        open_wall(wall, OpeningSpec("room1_id2", "window", 1.0, 1.0, 2.2))
        assert len(wall.metadata["wall"]["holes"]) == 2
        assert mesh_boundary_edges(wall.faces) == []

    def test_arc_rejected(self):
        plan = place_rooms([RoomSpec("room1", 4, 3, arc_edges=[(0, 0.5)])], AdjacencySpec())
        walls = build_walls(plan, parse_edge(plan))
        arc = next(w for w in walls if w.attribute_id.startswith("arc"))
        with pytest.raises(OpeningOnArcError):
            open_wall(arc, OpeningSpec("room1_id2", "door", 1.0, 2.1, 0.5))

    def test_watertight_after_fuzzed_openings(self):
        rng = random.Random(42)
        for _ in range(100):
            side = rng.choice(["room1_id1", "room1_id2", "room1_id3", "room1_id4"])
            wall, _ = wall_for(side, width=5.0, depth=4.0)
            frame = wall.metadata["wall"]
            length, height = frame["length"], frame["height"]
            kind = rng.choice(["door", "window"])
            w = rng.uniform(0.4, min(2.0, length - 0.2))
            h = rng.uniform(0.4, height - 0.4)
            offset = rng.uniform(0.0, length - w)
            open_wall(wall, OpeningSpec(side, kind, w, h, offset))
            assert mesh_boundary_edges(wall.faces) == [], f"boundary edges on {side} {kind}"
            assert np.asarray(wall.vertices)[:, 2].max() == pytest.approx(height)


class TestFitAsset:
    def test_scale_ratio(self):
        wall, _ = wall_for("room1_id2")
        opening = open_wall(wall, OpeningSpec("room1_id2", "door", 1.0, 2.1, 1.5))
        fitted = fit_asset(opening, door_asset((1.0, 0.1, 2.0)))
        assert fitted.transform.scale == pytest.approx((1.0, 2.0, 1.05))

    def test_native_equal_to_opening(self):
        wall, _ = wall_for("room1_id2")
        opening = open_wall(wall, OpeningSpec("room1_id2", "door", 1.0, 2.1, 1.5))
        fitted = fit_asset(opening, door_asset((1.0, 0.05, 2.1)))
        assert fitted.transform.scale == pytest.approx((1.0, 0.2 / 0.05, 1.0))

    def test_front_faces_room_interior(self, single_room_plan):
        plan = single_room_plan
        polygon = plan.polygon("room1")
        for side_id, side in [("room1_id1", 1), ("room1_id2", 2), ("room1_id3", 3), ("room1_id4", 4)]:
            wall, _ = wall_for(side_id)
            opening = open_wall(wall, OpeningSpec(side_id, "door", 1.0, 2.1, 0.5))
            fitted = fit_asset(opening, door_asset())
            yaw = fitted.transform.yaw
            front = (math.sin(yaw), -math.cos(yaw))  # rotated local -y
            tx, ty, _ = fitted.transform.translation
            probe = (tx + front[0] * 0.5, ty + front[1] * 0.5)
            assert point_in_polygon(probe, polygon), f"{side_id} front points out of the room"
            assert yaw == YAW_FOR_SIDE[side]

    def test_asset_contained_in_hole(self):
        rng = random.Random(7)
        for _ in range(100):
            side = rng.choice(["room1_id1", "room1_id2", "room1_id3", "room1_id4"])
            wall, _ = wall_for(side, width=5.0, depth=4.0)
            frame = wall.metadata["wall"]
            kind = rng.choice(["door", "window"])
            w = rng.uniform(0.4, 2.0)
            h = rng.uniform(0.4, frame["height"] - 0.4)
            offset = rng.uniform(0.0, frame["length"] - w)
            opening = open_wall(wall, OpeningSpec(side, kind, w, h, offset))
            native = (rng.uniform(0.4, 2.5), rng.uniform(0.02, 0.3), rng.uniform(0.5, 2.5))
            fitted = fit_asset(opening, door_asset(native))
            baked = fitted.transform.apply(fitted.vertices)
            lo, hi = baked.min(axis=0), baked.max(axis=0)
            box_lo, box_hi = hole_world_box(frame, opening.hole)
            eps = 1e-6
            assert all(lo[i] >= box_lo[i] - eps for i in range(3))
            assert all(hi[i] <= box_hi[i] + eps for i in range(3))

    def test_degenerate_asset_rejected(self):
        wall, _ = wall_for("room1_id2")
        opening = open_wall(wall, OpeningSpec("room1_id2", "door", 1.0, 2.1, 1.5))
        with pytest.raises(DegenerateAssetError):
            fit_asset(opening, door_asset((1.0, 0.0, 2.0)))


class TestColumnPlan:
    def test_three_by_four_rules(self):
        spec = ColumnGridSpec(rows=3, cols=4, spacing=4.0)
        plan = plan_column_openings(spec)
        doors = {s.gap for s in plan.by_fill("door")}
        assert doors == {("h", 0, 1), ("h", 2, 1)}
        longs = {s.gap for s in plan.by_fill("long_window")}
        assert longs == {("v", 0, 0), ("v", 0, 3)}
        shorts = plan.by_fill("short_window")
        assert len(shorts) == 6
        assert len(plan.slots) == len(perimeter_gaps(spec)) == 10

    def test_minimal_grid_no_shorts(self):
        spec = ColumnGridSpec(rows=2, cols=2, spacing=3.0)
        plan = plan_column_openings(spec)
        assert len(plan.by_fill("door")) == 2
        assert len(plan.by_fill("long_window")) == 2
        assert len(plan.by_fill("short_window")) == 0
        assert len(plan.slots) == 4

    def test_partitions_become_short_windows(self):
        spec = ColumnGridSpec(rows=3, cols=3, spacing=4.0)
        plan = plan_column_openings(spec, partitions=[("h", 1, 0), ("h", 1, 1)])
        partition_slots = plan.by_fill("partition_short_window")
        assert {s.gap for s in partition_slots} == {("h", 1, 0), ("h", 1, 1)}
        assert len(plan.slots) == len(perimeter_gaps(spec)) + 2

    def test_partition_on_perimeter_rejected(self):
        spec = ColumnGridSpec(rows=3, cols=3, spacing=4.0)
        with pytest.raises(PartitionOnPerimeterError):
            plan_column_openings(spec, partitions=[("h", 0, 1)])

    def test_every_gap_exactly_once_across_grid_sizes(self):
        for rows in range(2, 7):
            for cols in range(2, 7):
                spec = ColumnGridSpec(rows=rows, cols=cols, spacing=3.0)
                plan = plan_column_openings(spec)
                gaps = [s.gap for s in plan.slots]
                assert len(gaps) == len(set(gaps))
                assert set(gaps) == set(perimeter_gaps(spec))
                assert len(plan.by_fill("door")) == 2
                assert len(plan.by_fill("long_window")) == 2

    def test_styles_attach_queries(self):
        spec = ColumnGridSpec(rows=2, cols=3, spacing=3.0)
        plan = plan_column_openings(
            spec, styles={"door": "carved door", "long_window": "tall lattice", "short_window": "lattice"}
        )
        assert all(s.asset_query == "carved door" for s in plan.by_fill("door"))
        assert all(s.asset_query == "tall lattice" for s in plan.by_fill("long_window"))

    def test_gap_fill_geometry(self):
        spec = ColumnGridSpec(rows=3, cols=4, spacing=4.0, column_radius=0.25)
        slot = ColumnSlot(gap=("h", 0, 1), fill="door")
        asset = door_asset((1.6, 0.1, 2.4))
        element = fill_column_gap(spec, slot, asset)
        geo = gap_geometry(spec, slot.gap)
        assert geo["clear"] == pytest.approx(4.0 - 0.5)
        baked = element.transform.apply(element.vertices)
        width = baked[:, 0].max() - baked[:, 0].min()
        assert width == pytest.approx(geo["clear"])
        assert baked[:, 2].min() == pytest.approx(0.0)
