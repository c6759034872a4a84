import json

import pytest

from setforge.agents import (
    ADJACENCY,
    ALLOCATION,
    CHECK,
    DONE,
    DOOR_WINDOW,
    FAIL,
    MANAGER,
    MATERIAL,
    OBJECT,
    OK,
    ROLES,
    SHAPE,
    AdjacencyExhaustedError,
    AgentChain,
    BackendUnavailableError,
    ChainError,
    IllegalTransitionError,
    MultipleJsonBlocksError,
    NoJsonBlockError,
    RemoteBackend,
    SchemaViolationError,
    ScriptedBackend,
    StructuredParams,
    check_loop,
    extract_params,
    make_turn_fsm,
    next_speaker,
    partitions_from_cells,
    run_chain,
    validate_adjacency,
    validate_room_cells,
)
from setforge.floorplan import AdjacencySpec, ColumnGridSpec, RoomSpec
from setforge.pipeline import demo_data_dir

WALL_SUCCESSORS = {
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
COLUMN_SUCCESSORS = {
    (MANAGER, OK): ALLOCATION,
    (ALLOCATION, OK): ADJACENCY,
    (ADJACENCY, OK): MATERIAL,
    (MATERIAL, OK): DOOR_WINDOW,
    (DOOR_WINDOW, OK): OBJECT,
    (OBJECT, OK): DONE,
}


def fenced(payload) -> str:
    return "Here is the plan.\n```json\n" + json.dumps(payload) + "\n```"


def wall_fixtures(**overrides):
    fixtures = json.loads((demo_data_dir() / "fixtures_wall.json").read_text(encoding="utf-8"))
    fixtures.update(overrides)
    return fixtures


class TestTurnFSM:
    @pytest.mark.parametrize("kind,table", [("wall", WALL_SUCCESSORS), ("column", COLUMN_SUCCESSORS)])
    def test_exhaustive_transition_table(self, kind, table):
        for role in ROLES:
            for outcome in (OK, FAIL):
                fsm = make_turn_fsm(kind)
                fsm.current = role
                if (role, outcome) in table:
                    assert next_speaker(fsm, outcome) == table[(role, outcome)]
                else:
                    with pytest.raises(IllegalTransitionError):
                        next_speaker(fsm, outcome)

    def test_check_failure_returns_to_adjacency(self):
        fsm = make_turn_fsm("wall")
        fsm.current = CHECK
        assert next_speaker(fsm, FAIL) == ADJACENCY

    def test_done_is_terminal(self):
        fsm = make_turn_fsm("wall")
        fsm.current = DONE
        with pytest.raises(IllegalTransitionError):
            next_speaker(fsm, OK)


class TestValidateAdjacency:
    def rooms(self, n=3):
        return [RoomSpec(f"room{i + 1}", 4, 4) for i in range(n)]

    def test_contradictory_pair(self):
        report = validate_adjacency(
            self.rooms(2),
            AdjacencySpec.of(("room1", "room2", "east"), ("room2", "room1", "east")),
        )
        assert not report.ok
        assert any("contradictory" in v for v in report.violations)

    def test_chain_ok(self):
        report = validate_adjacency(
            self.rooms(3), AdjacencySpec.of(("room1", "room2", "east"), ("room2", "room3", "east"))
        )
        assert report.ok and report.violations == []

    def test_disconnected_room(self):
        report = validate_adjacency(self.rooms(3), AdjacencySpec.of(("room1", "room2", "east")))
        assert not report.ok
        assert any("disconnected" in v for v in report.violations)

    def test_opposite_relations_are_equivalent_not_contradictory(self):
        report = validate_adjacency(
            self.rooms(2),
            AdjacencySpec.of(("room1", "room2", "east"), ("room2", "room1", "west")),
        )
        assert report.ok

    def test_unknown_room_reference(self):
        report = validate_adjacency(self.rooms(2), AdjacencySpec.of(("room1", "room9", "east")))
        assert any("unknown room" in v for v in report.violations)


class TestCheckLoop:
    def backend(self, *responses):
        return ScriptedBackend({ADJACENCY: list(responses)})

    def test_second_attempt_succeeds(self):
        bad = fenced({"relations": [{"a": "room1", "b": "room2", "relation": "east"},
                                    {"a": "room2", "b": "room1", "relation": "east"}]})
        good = fenced({"relations": [{"a": "room1", "b": "room2", "relation": "east"}]})
        rooms = [RoomSpec("room1", 4, 4), RoomSpec("room2", 4, 4)]
        spec, attempts = check_loop(self.backend(bad, good), rooms)
        assert attempts == 2
        assert len(spec.relations) == 1

    def test_first_attempt_succeeds(self):
        good = fenced({"relations": [{"a": "room1", "b": "room2", "relation": "north"}]})
        rooms = [RoomSpec("room1", 4, 4), RoomSpec("room2", 4, 4)]
        _, attempts = check_loop(self.backend(good), rooms)
        assert attempts == 1

    def test_exhaustion_after_three(self):
        bad = fenced({"relations": [{"a": "room1", "b": "room2", "relation": "east"},
                                    {"a": "room2", "b": "room1", "relation": "east"}]})
        rooms = [RoomSpec("room1", 4, 4), RoomSpec("room2", 4, 4)]
        with pytest.raises(AdjacencyExhaustedError):
            check_loop(self.backend(bad, bad, bad), rooms, max_retries=3)


class TestExtractParams:
    def test_shape_roundtrip(self):
        payload = {"rooms": [{"name": "room1", "width": 4, "depth": 3}]}
        out = extract_params(fenced(payload), "shape")
        assert out == payload

    def test_prose_only(self):
        with pytest.raises(NoJsonBlockError):
            extract_params("I think the rooms should touch.", "shape")

    def test_multiple_blocks(self):
        msg = fenced({"rooms": []}) + "\n" + fenced({"rooms": []})
        with pytest.raises(MultipleJsonBlocksError):
            extract_params(msg, "shape")

    def test_schema_violation_carries_path(self):
        payload = {"rooms": [{"name": "room1", "width": -2, "depth": 3}]}
        with pytest.raises(SchemaViolationError) as err:
            extract_params(fenced(payload), "shape")
        assert err.value.path == "$.rooms[0].width"

    def test_unknown_fields_rejected(self):
        payload = {"rooms": [{"name": "room1", "width": 4, "depth": 3}], "note": "hi"}
        with pytest.raises(SchemaViolationError):
            extract_params(fenced(payload), "shape")

    def test_invalid_json_reported(self):
        with pytest.raises(SchemaViolationError):
            extract_params("```json\n{not json}\n```", "shape")


class TestRunChain:
    def test_wall_demo_takes_eight_turns(self):
        backend = ScriptedBackend(wall_fixtures())
        result = AgentChain(backend).run("a western guestroom")
        assert result.turns == 8
        assert result.params.structure_kind == "wall"
        assert result.params.is_complete()
        assert [r.name for r in result.params.rooms] == ["room1", "room2"]
        assert len(result.check_reports) == 1 and result.check_reports[0].ok

    def test_column_demo_takes_six_turns(self):
        backend = ScriptedBackend.from_file(demo_data_dir() / "fixtures_column.json")
        result = AgentChain(backend).run("a chinese residence")
        assert result.turns == 6
        assert result.params.structure_kind == "column"
        assert result.params.is_complete()
        assert result.check_reports == []  # no Check turn on the column path

    def test_adjacency_retry_adds_two_turns(self):
        bad = fenced({"relations": [{"a": "room1", "b": "room2", "relation": "east"},
                                    {"a": "room2", "b": "room1", "relation": "east"}]})
        fixtures = wall_fixtures()
        fixtures[ADJACENCY] = [bad] + fixtures[ADJACENCY]
        result = AgentChain(ScriptedBackend(fixtures)).run("a western guestroom")
        assert result.turns == 10
        assert len(result.check_reports) == 2
        assert not result.check_reports[0].ok and result.check_reports[1].ok

    def test_adjacency_exhaustion(self):
        bad = fenced({"relations": [{"a": "room1", "b": "room2", "relation": "east"},
                                    {"a": "room2", "b": "room1", "relation": "east"}]})
        fixtures = wall_fixtures()
        fixtures[ADJACENCY] = [bad, bad, bad]
        with pytest.raises(AdjacencyExhaustedError):
            AgentChain(ScriptedBackend(fixtures)).run("a western guestroom")

    def test_missing_fixture_names_the_role(self):
        fixtures = wall_fixtures()
        del fixtures[OBJECT]
        with pytest.raises(ChainError) as err:
            AgentChain(ScriptedBackend(fixtures)).run("a western guestroom")
        assert err.value.role == OBJECT

    def test_deterministic_params(self):
        a = run_chain("brief", ScriptedBackend(wall_fixtures()))
        b = run_chain("brief", ScriptedBackend(wall_fixtures()))
        assert json.dumps(a.to_dict(), sort_keys=True) == json.dumps(b.to_dict(), sort_keys=True)

    def test_retrieval_hooks_fire(self, retriever):
        backend = ScriptedBackend(wall_fixtures())
        result = AgentChain(backend, retriever=retriever).run("a western guestroom")
        roles = {event.role for event in result.retrieval_trace}
        assert {MATERIAL, DOOR_WINDOW, OBJECT} <= roles
        assert all(event.asset_id for event in result.retrieval_trace)

    def test_column_wall_objects_rejected(self):
        fixtures = json.loads((demo_data_dir() / "fixtures_column.json").read_text(encoding="utf-8"))
        payload = {
            "regions": {
                "room1": {
                    "stable": [{"slot": "center", "slot_index": 0, "object_query": "table"}],
                    "relative": [],
                    "wall": [{"wall": "room1_id2", "object_query": "painting"}],
                }
            }
        }
        fixtures[OBJECT] = [fenced(payload)]
        with pytest.raises((ChainError, SchemaViolationError)):
            AgentChain(ScriptedBackend(fixtures)).run("a chinese residence")


class TestStructuredParams:
    def test_wall_roundtrip(self):
        params = run_chain("brief", ScriptedBackend(wall_fixtures()))
        restored = StructuredParams.from_dict(json.loads(json.dumps(params.to_dict())))
        assert restored.to_dict() == params.to_dict()

    def test_column_roundtrip(self):
        backend = ScriptedBackend.from_file(demo_data_dir() / "fixtures_column.json")
        params = run_chain("brief", backend)
        restored = StructuredParams.from_dict(json.loads(json.dumps(params.to_dict())))
        assert restored.to_dict() == params.to_dict()

    def test_incomplete_sections_reported(self):
        params = StructuredParams(structure_kind="wall")
        missing = params.missing_sections()
        assert "allocation" in missing and "materials" in missing


class TestRoomCells:
    def grid(self):
        return ColumnGridSpec(rows=3, cols=4, spacing=4.0)

    def test_valid_assignment(self):
        report = validate_room_cells(
            self.grid(), {"room1": [(0, 0), (0, 1), (0, 2)], "room2": [(1, 0), (1, 1), (1, 2)]}
        )
        assert report.ok

    def test_cell_conflict(self):
        report = validate_room_cells(self.grid(), {"room1": [(0, 0)], "room2": [(0, 0)]})
        assert any("assigned to both" in v for v in report.violations)

    def test_out_of_range(self):
        report = validate_room_cells(self.grid(), {"room1": [(5, 0)]})
        assert not report.ok

    def test_discontiguous_cells(self):
        report = validate_room_cells(self.grid(), {"room1": [(0, 0), (1, 2)]})
        assert any("contiguous" in v for v in report.violations)

    def test_partitions_from_demo_assignment(self):
        gaps = partitions_from_cells(
            self.grid(), {"room1": [(0, 0), (0, 1), (0, 2)], "room2": [(1, 0), (1, 1), (1, 2)]}
        )
        assert sorted(gaps) == [("h", 1, 0), ("h", 1, 1), ("h", 1, 2)]


class TestRemoteBackend:
    def test_prompt_carries_role_play_and_cot(self):
        backend = RemoteBackend(endpoint="http://example/v1/chat", model="test-model")
        messages = backend.build_messages(DOOR_WINDOW, "a brief")
        system = messages[0]["content"]
        assert "Door_Window agent" in system
        assert "Reason step by step" in system  # chain-of-thought directive
        assert messages[1]["content"] == "a brief"

    def test_transport_injection(self):
        def transport(payload):
            assert payload["temperature"] == 0.7
            return {"choices": [{"message": {"content": fenced({"structure_kind": "wall"})}}]}

        backend = RemoteBackend(endpoint="x", model="m", transport=transport)
        text = backend.respond(MANAGER, "brief")
        assert extract_params(text, "manager") == {"structure_kind": "wall"}

    def test_transport_failure_retries_then_raises(self):
        calls = []

        def transport(payload):
            calls.append(1)
            raise ConnectionError("down")

        backend = RemoteBackend(endpoint="x", model="m", retries=2, transport=transport)
        with pytest.raises(BackendUnavailableError):
            backend.respond(MANAGER, "brief")
        assert len(calls) == 3
