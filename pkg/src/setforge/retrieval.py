"""Catalog loading and semantic asset retrieval.

Assets (objects, doors, windows, materials) carry short text annotations.
Annotations are encoded into unit-norm vectors and queried by cosine
similarity with an exhaustive scan; catalogs are small enough that exactness
is cheaper than an approximate index. Door and window records share one
combined partition so a single query can hit either.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

from .geometry import Vec3

ANNOTATION_FIELD_ORDER = ("category_label", "style", "cultural_origin", "era", "tags")
MOCK_DIMENSION = 256
MOCK_VERSION = "mock-bag-v1"
DOOR_WINDOW_PARTITION = "door_window"


class RetrievalError(Exception):
    pass


class EmptyTextError(RetrievalError):
    pass


class EmptyCategoryError(RetrievalError):
    pass


class DimensionMismatchError(RetrievalError):
    pass


class BackendUnavailableError(RetrievalError):
    pass


@dataclass
class AssetRecord:
    """One catalog entry; geometric assets have a positive native size."""

    id: str
    category: str  # object | door | window | material
    annotations: dict[str, str | list[str]] = field(default_factory=dict)
    native_size: Optional[Vec3] = None
    mesh_path: Optional[str] = None
    uv_scale: Optional[float] = None
    embedding: Optional[np.ndarray] = None

    def annotation_text(self) -> str:
        """All annotation fields joined with single spaces in fixed order."""
        parts: list[str] = []
        for key in ANNOTATION_FIELD_ORDER:
            value = self.annotations.get(key)
            if value is None:
                continue
            if isinstance(value, (list, tuple)):
                parts.extend(str(v) for v in value)
            else:
                parts.append(str(value))
        return " ".join(p for p in parts if p)

    def validate(self) -> None:
        if self.category not in ("object", "door", "window", "material"):
            raise RetrievalError(f"asset {self.id!r}: unknown category {self.category!r}")
        if self.category != "material":
            if self.native_size is None or any(v <= 0 for v in self.native_size):
                raise RetrievalError(f"asset {self.id!r}: native_size must be positive")
        if self.embedding is not None:
            norm = float(np.linalg.norm(self.embedding))
            if abs(norm - 1.0) > 1e-6:
                raise RetrievalError(f"asset {self.id!r}: embedding norm {norm} is not 1")


class Embedder(Protocol):
    version: str
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class MockEmbedder:
    """Deterministic offline embedder: hashed token bag, L2-normalized.

    Tokens are lowercased alphanumeric runs; each token is hashed with a fixed
    64-bit digest into one of 256 bins. Stable across runs and platforms.
    """

    version = MOCK_VERSION
    dimension = MOCK_DIMENSION

    @staticmethod
    def _bin(token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % MOCK_DIMENSION

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyTextError("cannot embed empty text")
        vec = np.zeros(MOCK_DIMENSION)
        for token in re.findall(r"[a-z0-9]+", text.lower()):
            vec[self._bin(token)] += 1.0
        norm = float(np.linalg.norm(vec))
        if norm == 0:
            raise EmptyTextError(f"text {text!r} contains no tokens")
        return vec / norm


class RemoteEmbedder:
    """Sentence-embedding service client; interchangeable with the mock."""

    def __init__(self, endpoint: str, model: str, dimension: int, transport=None, timeout: float = 30.0):
        self.endpoint = endpoint
        self.model = model
        self.dimension = dimension
        self.version = f"remote:{model}"
        self.timeout = timeout
        self._transport = transport

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise EmptyTextError("cannot embed empty text")
        try:
            if self._transport is not None:
                payload = self._transport({"model": self.model, "input": text})
            else:
                import requests

                resp = requests.post(
                    self.endpoint,
                    json={"model": self.model, "input": text},
                    timeout=self.timeout,
                )
                resp.raise_for_status()
                payload = resp.json()
        except EmptyTextError:
            raise
        except Exception as exc:
            raise BackendUnavailableError(f"embedding service failed: {exc}") from exc
        vec = np.asarray(payload["data"][0]["embedding"], dtype=float)
        if vec.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"service returned dimension {vec.shape}, expected {self.dimension}"
            )
        norm = float(np.linalg.norm(vec))
        if norm == 0:
            raise BackendUnavailableError("embedding service returned a zero vector")
        return vec / norm


def embed_text(text: str, embedder: Optional[Embedder] = None) -> np.ndarray:
    """Encode ``text`` into a unit vector with the given (default: mock) backend."""
    return (embedder or MockEmbedder()).embed(text)


def _partition_of(category: str) -> str:
    return DOOR_WINDOW_PARTITION if category in ("door", "window", DOOR_WINDOW_PARTITION) else category


@dataclass
class EmbeddingIndex:
    """Immutable id->vector store, partitioned by asset category."""

    dimension: int
    embedder_version: str
    entries: dict[str, np.ndarray] = field(default_factory=dict)
    partitions: dict[str, list[str]] = field(default_factory=dict)

    def partition_ids(self, category: str) -> list[str]:
        return self.partitions.get(_partition_of(category), [])


def build_index(catalog: Sequence[AssetRecord], embedder: Optional[Embedder] = None) -> EmbeddingIndex:
    """Embed every record's concatenated annotations.

    Records with a precomputed embedding keep it; mixing vector dimensions
    raises DimensionMismatchError. Doors and windows land in one combined
    partition, kept separate from plain objects.
    """
    embedder = embedder or MockEmbedder()
    index = EmbeddingIndex(dimension=embedder.dimension, embedder_version=embedder.version)
    for record in catalog:
        record.validate()
        if record.embedding is not None:
            vec = np.asarray(record.embedding, dtype=float)
        else:
            vec = embedder.embed(record.annotation_text())
        if vec.shape != (index.dimension,):
            raise DimensionMismatchError(
                f"asset {record.id!r}: embedding dimension {vec.shape[0]} != index dimension {index.dimension}"
            )
        index.entries[record.id] = vec
        index.partitions.setdefault(_partition_of(record.category), []).append(record.id)
    for ids in index.partitions.values():
        ids.sort()
    return index


def search(
    index: EmbeddingIndex,
    query: str,
    category: str,
    k: int = 1,
    embedder: Optional[Embedder] = None,
) -> list[tuple[str, float]]:
    """Top-k ids by cosine similarity, exhaustive scan, ties broken by id.

    Raises:
        EmptyCategoryError: the category partition has no entries.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ids = index.partition_ids(category)
    if not ids:
        raise EmptyCategoryError(f"no catalog entries in category {category!r}")
    qvec = embed_text(query, embedder)
    scored = [(asset_id, float(np.dot(index.entries[asset_id], qvec))) for asset_id in ids]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


@dataclass
class Catalog:
    root: Path
    records: list[AssetRecord]
    by_id: dict[str, AssetRecord] = field(default_factory=dict)

    def __post_init__(self):
        self.by_id = {r.id: r for r in self.records}

    def get(self, asset_id: str) -> AssetRecord:
        return self.by_id[asset_id]


def load_catalog(path: str | Path, embeddings_path: Optional[str | Path] = None) -> Catalog:
    """Read a catalog JSON array, optionally merging a precomputed embedding sidecar."""
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    records = []
    for item in raw:
        records.append(
            AssetRecord(
                id=item["id"],
                category=item["category"],
                annotations=item.get("annotations", {}),
                native_size=tuple(item["native_size"]) if item.get("native_size") else None,
                mesh_path=item.get("mesh_path"),
                uv_scale=item.get("uv_scale"),
            )
        )
    catalog = Catalog(root=path.parent, records=records)
    if embeddings_path is not None:
        sidecar = json.loads(Path(embeddings_path).read_text(encoding="utf-8"))
        dim = sidecar["dimension"]
        for asset_id, values in sidecar["embeddings"].items():
            if asset_id in catalog.by_id:
                vec = np.asarray(values, dtype=float)
                if vec.shape != (dim,):
                    raise DimensionMismatchError(f"sidecar entry {asset_id!r} has wrong dimension")
                catalog.by_id[asset_id].embedding = vec
    for record in records:
        record.validate()
    return catalog


def write_embedding_sidecar(catalog: Catalog, path: str | Path, embedder: Optional[Embedder] = None) -> None:
    embedder = embedder or MockEmbedder()
    index = build_index(catalog.records, embedder)
    payload = {
        "embedder_version": index.embedder_version,
        "dimension": index.dimension,
        "embeddings": {asset_id: [float(v) for v in vec] for asset_id, vec in sorted(index.entries.items())},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_obj_mesh(path: str | Path) -> tuple[list[Vec3], list[tuple[int, int, int]]]:
    """Minimal OBJ reader for catalog asset meshes (v/f lines, fan-triangulated)."""
    vertices: list[Vec3] = []
    faces: list[tuple[int, int, int]] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            for i in range(1, len(idx) - 1):
                faces.append((idx[0], idx[i], idx[i + 1]))
    return vertices, faces


class Retriever:
    """Catalog + index facade used by the material, opening and layout stages."""

    def __init__(self, catalog: Catalog, embedder: Optional[Embedder] = None):
        self.catalog = catalog
        self.embedder = embedder or MockEmbedder()
        self.index = build_index(catalog.records, self.embedder)

    def search(self, query: str, category: str, k: int = 1) -> list[tuple[str, float]]:
        return search(self.index, query, category, k, self.embedder)

    def top1(self, query: str, category: str) -> AssetRecord:
        asset_id, _ = self.search(query, category, k=1)[0]
        return self.catalog.get(asset_id)
