import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setforge.retrieval import (
    AssetRecord,
    DimensionMismatchError,
    EmptyCategoryError,
    EmptyTextError,
    MockEmbedder,
    build_index,
    embed_text,
    load_catalog,
    search,
    write_embedding_sidecar,
)


def record(asset_id, category="object", **annotations):
    native = None if category == "material" else (1.0, 1.0, 1.0)
    return AssetRecord(id=asset_id, category=category, annotations=annotations, native_size=native)


class TestMockEmbedder:
    def test_token_order_invariance(self):
        assert np.array_equal(embed_text("red brick"), embed_text("brick red"))

    def test_bag_overlap_cosine(self):
        # {red, brick} vs {red, brick, wall}: dot 2, norms sqrt(2)*sqrt(3)
        a = embed_text("red brick")
        b = embed_text("red brick wall")
        assert math.isclose(float(np.dot(a, b)), 2 / math.sqrt(6), abs_tol=1e-12)

    def test_empty_text_rejected(self):
        with pytest.raises(EmptyTextError):
            embed_text("")
        with pytest.raises(EmptyTextError):
            embed_text("   ")

    def test_unit_norm_and_stability(self):
        a = MockEmbedder().embed("aged concrete wall")
        b = MockEmbedder().embed("aged concrete wall")
        assert math.isclose(float(np.linalg.norm(a)), 1.0, abs_tol=1e-12)
        assert np.array_equal(a, b)


class TestBuildIndex:
    def test_small_catalog(self):
        index = build_index([record(f"a{i}", category_label=f"thing {i}") for i in range(3)])
        assert len(index.entries) == 3
        for vec in index.entries.values():
            assert math.isclose(float(np.linalg.norm(vec)), 1.0, abs_tol=1e-9)

    def test_fixed_annotation_field_order(self):
        rec = record("a1", category_label="armchair", style="art deco", era="1920s")
        assert rec.annotation_text() == "armchair art deco 1920s"

    def test_doors_and_windows_share_a_partition(self):
        index = build_index(
            [record("d1", "door", category_label="door"), record("w1", "window", category_label="window"),
             record("o1", "object", category_label="chair")]
        )
        assert index.partition_ids("door") == ["d1", "w1"]
        assert index.partition_ids("window") == ["d1", "w1"]
        assert index.partition_ids("object") == ["o1"]

    def test_dimension_mismatch(self):
        bad = record("x1", category_label="thing")
        vec = np.zeros(8)
        vec[0] = 1.0
        bad.embedding = vec
        with pytest.raises(DimensionMismatchError):
            build_index([bad])


def brute_force_rank(index, query_vec, ids):
    scored = [(i, float(np.dot(index.entries[i], query_vec))) for i in ids]
    return sorted(scored, key=lambda p: (-p[1], p[0]))


class TestSearch:
    def test_verbatim_query_scores_one(self):
        recs = [record("a1", category_label="velvet armchair"), record("a2", category_label="oak table")]
        index = build_index(recs)
        results = search(index, "velvet armchair", "object", k=2)
        assert results[0][0] == "a1"
        assert math.isclose(results[0][1], 1.0, abs_tol=1e-9)

    def test_k_larger_than_partition(self):
        index = build_index([record("a1", category_label="chair")])
        assert len(search(index, "chair", "object", k=10)) == 1

    def test_empty_category(self):
        index = build_index([record("a1", category_label="chair")])
        with pytest.raises(EmptyCategoryError):
            search(index, "marble", "material")

    def test_tie_broken_by_ascending_id(self):
        recs = [record("b", category_label="lamp"), record("a", category_label="lamp")]
        index = build_index(recs)
        assert [r[0] for r in search(index, "lamp", "object", k=2)] == ["a", "b"]

    def test_order_independence(self):
        recs = [record(f"r{i}", category_label=f"item {i} thing") for i in range(20)]
        shuffled = list(recs)
        random.Random(7).shuffle(shuffled)
        a = search(build_index(recs), "item thing 7", "object", k=5)
        b = search(build_index(shuffled), "item thing 7", "object", k=5)
        assert a == b

    @settings(max_examples=30, deadline=None)
    @given(
        n=st.integers(2, 40),
        seed=st.integers(0, 10_000),
    )
    def test_matches_brute_force_oracle(self, n, seed):
        rng = random.Random(seed)
        words = ["oak", "iron", "silk", "aged", "red", "blue", "carved", "plain", "tall", "round"]
        recs = [
            record(f"r{i:03d}", category_label=" ".join(rng.choices(words, k=rng.randint(1, 4))))
            for i in range(n)
        ]
        index = build_index(recs)
        query = " ".join(rng.choices(words, k=3))
        got = search(index, query, "object", k=n)
        expected = brute_force_rank(index, embed_text(query), index.partition_ids("object"))
        assert [g[0] for g in got] == [e[0] for e in expected]


def test_catalog_sidecar_roundtrip(tmp_path, demo_catalog):
    sidecar = tmp_path / "emb.json"
    write_embedding_sidecar(demo_catalog, sidecar)
    from setforge.pipeline import demo_data_dir

    loaded = load_catalog(demo_data_dir() / "catalog.json", sidecar)
    assert all(r.embedding is not None for r in loaded.records)
    index_a = build_index(loaded.records)
    index_b = build_index(demo_catalog.records)
    for asset_id in index_a.entries:
        assert np.allclose(index_a.entries[asset_id], index_b.entries[asset_id], atol=1e-12)
