import pytest

from setforge.floorplan import AdjacencySpec, RoomSpec, place_rooms
from setforge.pipeline import demo_data_dir
from setforge.retrieval import MockEmbedder, Retriever, load_catalog


@pytest.fixture(scope="session")
def demo_catalog():
    return load_catalog(demo_data_dir() / "catalog.json")


@pytest.fixture(scope="session")
def retriever(demo_catalog):
    return Retriever(demo_catalog, MockEmbedder())


@pytest.fixture
def two_room_plan():
    rooms = [RoomSpec("room1", 4, 3), RoomSpec("room2", 3, 3)]
    return place_rooms(rooms, AdjacencySpec.of(("room1", "room2", "east")))


@pytest.fixture
def single_room_plan():
    return place_rooms([RoomSpec("room1", 4, 3)], AdjacencySpec())
