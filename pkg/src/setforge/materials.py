"""Two-phase material stage: resolve queries against the catalog, then apply.

Assignment entries map attribute-id patterns (exact ids, shell globs like
``room2_id*``, or the class names ``column``/``beam``/``arc``) to free-text
material queries. Resolution retrieves the top match per query; application
stamps the resolved ids onto the scene and fills every untargeted element with
the structure default so no geometry ships untextured.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from typing import Iterable

from .core import SceneGraph
from .retrieval import Retriever

DEFAULT_MATERIAL = "default_plaster"

_CLASS_PATTERNS = {"column": "column_*", "beam": "beam_*", "arc": "arc*", "room": "room*"}


class MaterialError(Exception):
    pass


class EmptyCatalogCategoryError(MaterialError):
    pass


class AmbiguousPatternError(MaterialError):
    pass


class UnknownAttributeError(MaterialError):
    pass


@dataclass
class MaterialAssignment:
    entries: dict[str, str]  # pattern -> query
    resolved: dict[str, str] = field(default_factory=dict)  # concrete id -> material id


def _expand_pattern(pattern: str, attribute_ids: Iterable[str]) -> list[str]:
    pattern = _CLASS_PATTERNS.get(pattern, pattern)
    return [attr for attr in attribute_ids if fnmatchcase(attr, pattern)]


def resolve_materials(
    entries: dict[str, str],
    retriever: Retriever,
    attribute_ids: Iterable[str],
) -> MaterialAssignment:
    """Resolve every entry to a concrete id -> material-id map.

    Each query retrieves the top-1 catalog material; patterns expand over the
    scene's attribute ids. Deterministic for a fixed catalog and embedder.

    Raises:
        EmptyCatalogCategoryError: the catalog has no materials.
        AmbiguousPatternError: two patterns cover the same attribute id.
        MaterialError: empty query string.
    """
    from .retrieval import EmptyCategoryError

    ids = sorted(attribute_ids)
    assignment = MaterialAssignment(entries=dict(entries))
    claimed: dict[str, str] = {}
    for pattern in sorted(entries):
        query = entries[pattern]
        if not query or not query.strip():
            raise MaterialError(f"pattern {pattern!r} has an empty material query")
        try:
            material_id, _score = retriever.search(query, "material", k=1)[0]
        except EmptyCategoryError as exc:
            raise EmptyCatalogCategoryError(str(exc)) from exc
        for attr in _expand_pattern(pattern, ids):
            if attr in claimed:
                raise AmbiguousPatternError(
                    f"attribute {attr!r} matched by both {claimed[attr]!r} and {pattern!r}"
                )
            claimed[attr] = pattern
            assignment.resolved[attr] = material_id
    return assignment


def apply_material(graph: SceneGraph, assignment: MaterialAssignment, default: str = DEFAULT_MATERIAL) -> SceneGraph:
    """Batch-apply resolved materials; untargeted elements get ``default``.

    Idempotent: re-applying the same assignment leaves the graph unchanged.

    Raises:
        UnknownAttributeError: a resolved id is absent from the graph.
    """
    for attr in sorted(assignment.resolved):
        if not graph.has_attribute(attr):
            raise UnknownAttributeError(f"assignment targets unknown attribute {attr!r}")
    for attr in sorted(assignment.resolved):
        graph.get(attr).material_ref = assignment.resolved[attr]
    for element in graph.elements():
        if element.material_ref is None:
            element.material_ref = default
    return graph
