"""Scene exporters: canonical JSON, OBJ/MTL with baked transforms, and a
top-down SVG construction drawing at 1:50.

JSON is the lossless interchange format (sorted keys, shortest round-trip
float form, newline-terminated), so serialize-parse-serialize is
byte-identical. OBJ bakes every transform and writes one group per attribute
id with a flat-color MTL derived from material id hashes.
"""
from __future__ import annotations

import hashlib
import json
import math
import xml.etree.ElementTree as ET
from typing import Optional

import numpy as np

from .core import IDENTITY, SceneElement, SceneGraph, Transform
from .geometry import discretize_arc

SCHEMA_VERSION = "1"


def _element_to_dict(element: SceneElement) -> dict:
    return {
        "attribute_id": element.attribute_id,
        "vertices": [[float(v[0]), float(v[1]), float(v[2])] for v in element.vertices],
        "faces": [[int(i) for i in face] for face in element.faces],
        "transform": {
            "t": [float(v) for v in element.transform.translation],
            "yaw": float(element.transform.yaw),
            "s": [float(v) for v in element.transform.scale],
        },
        "material_ref": element.material_ref,
        "alias_ids": list(element.alias_ids),
        "metadata": element.metadata,
        "children": [_element_to_dict(child) for child in element.children],
    }


def _element_from_dict(data: dict) -> SceneElement:
    return SceneElement(
        attribute_id=data["attribute_id"],
        vertices=[tuple(v) for v in data["vertices"]],
        faces=[tuple(f) for f in data["faces"]],
        transform=Transform(
            translation=tuple(data["transform"]["t"]),
            yaw=data["transform"]["yaw"],
            scale=tuple(data["transform"]["s"]),
        ),
        material_ref=data.get("material_ref"),
        alias_ids=list(data.get("alias_ids", [])),
        metadata=data.get("metadata", {}),
        children=[_element_from_dict(c) for c in data.get("children", [])],
    )


def export_json(graph: SceneGraph) -> bytes:
    """Canonical scene serialization: sorted keys, newline-terminated UTF-8."""
    graph.recompute_bounding_box()
    box = graph.bounding_box
    payload = {
        "schema_version": SCHEMA_VERSION,
        "structure_kind": graph.structure_kind,
        "bounding_box": None
        if box is None
        else {"min": [float(v) for v in box[0]], "max": [float(v) for v in box[1]]},
        "elements": [_element_to_dict(root) for root in graph.roots],
    }
    return (json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def scene_from_json(data: bytes | str) -> SceneGraph:
    payload = json.loads(data)
    graph = SceneGraph(
        structure_kind=payload["structure_kind"],
        roots=[_element_from_dict(e) for e in payload["elements"]],
    )
    if payload.get("bounding_box"):
        graph.bounding_box = (
            tuple(payload["bounding_box"]["min"]),
            tuple(payload["bounding_box"]["max"]),
        )
    graph.rebuild_registry()
    return graph


def material_color(material_id: str) -> tuple[float, float, float]:
    """Deterministic flat color for a material id (for previs MTL files)."""
    digest = hashlib.sha256(material_id.encode("utf-8")).digest()
    return tuple(0.15 + 0.7 * (b / 255.0) for b in digest[:3])  # type: ignore[return-value]


def export_obj(graph: SceneGraph, mtl_filename: str = "scene.mtl") -> tuple[bytes, bytes]:
    """Bake transforms and write (OBJ bytes, companion MTL bytes).

    One ``g`` group per attribute id, ``usemtl`` per group, 1-based indices.
    """
    obj_lines = [f"mtllib {mtl_filename}"]
    materials: list[str] = []
    offset = 0

    def emit(element: SceneElement, parent: Transform) -> None:
        nonlocal offset
        world = parent.compose(element.transform)
        if element.vertices:
            obj_lines.append(f"g {element.attribute_id}")
            if element.material_ref:
                if element.material_ref not in materials:
                    materials.append(element.material_ref)
                obj_lines.append(f"usemtl {element.material_ref}")
            baked = world.apply(element.vertices)
            for x, y, z in baked:
                obj_lines.append(f"v {x:.6f} {y:.6f} {z:.6f}")
            for a, b, c in element.faces:
                obj_lines.append(f"f {offset + a + 1} {offset + b + 1} {offset + c + 1}")
            offset += len(element.vertices)
        for child in element.children:
            emit(child, world)

    for root in graph.roots:
        emit(root, IDENTITY)
    obj_bytes = ("\n".join(obj_lines) + "\n").encode("utf-8")

    mtl_lines = []
    for material_id in materials:
        r, g, b = material_color(material_id)
        mtl_lines.extend(
            [f"newmtl {material_id}", f"Kd {r:.4f} {g:.4f} {b:.4f}", "Ka 0.0 0.0 0.0", "Ns 10.0", ""]
        )
    return obj_bytes, ("\n".join(mtl_lines) + "\n").encode("utf-8")


# --- construction drawing ----------------------------------------------------------

MM_PER_M = 20.0  # 1:50 -> one meter on site is 20 mm on paper
_MARGIN_MM = 15.0


class _Drawing:
    def __init__(self, x0: float, y0: float, x1: float, y1: float):
        self.x0, self.y0, self.x1, self.y1 = x0, y0, x1, y1
        width = (x1 - x0) * MM_PER_M + 2 * _MARGIN_MM
        height = (y1 - y0) * MM_PER_M + 2 * _MARGIN_MM + 10.0  # room for the title line
        self.svg = ET.Element(
            "svg",
            {
                "xmlns": "http://www.w3.org/2000/svg",
                "version": "1.1",
                "width": f"{width:.2f}mm",
                "height": f"{height:.2f}mm",
                "viewBox": f"0 0 {width:.2f} {height:.2f}",
            },
        )

    def pt(self, x: float, y: float) -> tuple[float, float]:
        return (
            (x - self.x0) * MM_PER_M + _MARGIN_MM,
            (self.y1 - y) * MM_PER_M + _MARGIN_MM,
        )

    def line(self, a, b, width=0.18, color="#222222", dash: Optional[str] = None):
        ax, ay = self.pt(*a)
        bx, by = self.pt(*b)
        attrs = {
            "x1": f"{ax:.3f}", "y1": f"{ay:.3f}", "x2": f"{bx:.3f}", "y2": f"{by:.3f}",
            "stroke": color, "stroke-width": f"{width}",
        }
        if dash:
            attrs["stroke-dasharray"] = dash
        ET.SubElement(self.svg, "line", attrs)

    def poly(self, points, fill="none", width=0.35, color="#000000", close=True):
        mapped = [self.pt(*p) for p in points]
        d = "M " + " L ".join(f"{x:.3f} {y:.3f}" for x, y in mapped) + (" Z" if close else "")
        ET.SubElement(self.svg, "path", {"d": d, "fill": fill, "stroke": color, "stroke-width": f"{width}"})

    def rect(self, x0, y0, x1, y1, **kw):
        self.poly([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], **kw)

    def circle(self, center, radius_m, fill="none", width=0.35, color="#000000"):
        cx, cy = self.pt(*center)
        ET.SubElement(
            self.svg,
            "circle",
            {"cx": f"{cx:.3f}", "cy": f"{cy:.3f}", "r": f"{radius_m * MM_PER_M:.3f}",
             "fill": fill, "stroke": color, "stroke-width": f"{width}"},
        )

    def arc(self, center, radius_m, a0, a1, width=0.18, color="#444444"):
        sx, sy = self.pt(center[0] + radius_m * math.cos(a0), center[1] + radius_m * math.sin(a0))
        ex, ey = self.pt(center[0] + radius_m * math.cos(a1), center[1] + radius_m * math.sin(a1))
        r = radius_m * MM_PER_M
        sweep = "0" if a1 > a0 else "1"  # y is flipped on paper
        d = f"M {sx:.3f} {sy:.3f} A {r:.3f} {r:.3f} 0 0 {sweep} {ex:.3f} {ey:.3f}"
        ET.SubElement(self.svg, "path", {"d": d, "fill": "none", "stroke": color, "stroke-width": f"{width}"})

    def text(self, pos, content, size=2.8, color="#000000", anchor="middle"):
        x, y = self.pt(*pos)
        el = ET.SubElement(
            self.svg,
            "text",
            {"x": f"{x:.3f}", "y": f"{y:.3f}", "font-size": f"{size}",
             "font-family": "sans-serif", "fill": color, "text-anchor": anchor},
        )
        el.text = content

    def grid(self):
        x = math.floor(self.x0)
        while x <= math.ceil(self.x1):
            self.line((x, self.y0), (x, self.y1), width=0.08, color="#cccccc")
            x += 1
        y = math.floor(self.y0)
        while y <= math.ceil(self.y1):
            self.line((self.x0, y), (self.x1, y), width=0.08, color="#cccccc")
            y += 1

    def title(self, label: str):
        x, y = _MARGIN_MM, (self.y1 - self.y0) * MM_PER_M + 2 * _MARGIN_MM + 5.0
        el = ET.SubElement(
            self.svg, "text",
            {"x": f"{x:.3f}", "y": f"{y:.3f}", "font-size": "3.5", "font-family": "sans-serif",
             "text-anchor": "start"},
        )
        el.text = f"{label} — scale 1:50, 1 m grid"

    def tobytes(self) -> bytes:
        return b'<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(self.svg, encoding="utf-8") + b"\n"


def _wall_footprint(frame: dict) -> list[tuple[float, float]]:
    ox, oy = frame["origin"]
    dx, dy = frame["dir"]
    nx, ny = frame["outward"]
    u0, u1 = frame.get("u_lo", 0.0), frame.get("u_hi", frame["length"])
    v0, v1 = frame["v_range"]
    return [
        (ox + u0 * dx + v0 * nx, oy + u0 * dy + v0 * ny),
        (ox + u1 * dx + v0 * nx, oy + u1 * dy + v0 * ny),
        (ox + u1 * dx + v1 * nx, oy + u1 * dy + v1 * ny),
        (ox + u0 * dx + v1 * nx, oy + u0 * dy + v1 * ny),
    ]


def _hole_span(frame: dict, hole: dict, v0: float, v1: float) -> list[tuple[float, float]]:
    ox, oy = frame["origin"]
    dx, dy = frame["dir"]
    nx, ny = frame["outward"]
    return [
        (ox + hole["u0"] * dx + v0 * nx, oy + hole["u0"] * dy + v0 * ny),
        (ox + hole["u1"] * dx + v0 * nx, oy + hole["u1"] * dy + v0 * ny),
        (ox + hole["u1"] * dx + v1 * nx, oy + hole["u1"] * dy + v1 * ny),
        (ox + hole["u0"] * dx + v1 * nx, oy + hole["u0"] * dy + v1 * ny),
    ]


def export_svg(bundle) -> bytes:
    """Draw the plan top-down: walls as double lines with opening gaps and
    door swings, columns and beams on column sets, objects as labeled boxes."""
    graph: SceneGraph = bundle.graph
    graph.recompute_bounding_box()
    box = graph.bounding_box or ((0, 0, 0), (1, 1, 0))
    drawing = _Drawing(box[0][0] - 0.5, box[0][1] - 0.5, box[1][0] + 0.5, box[1][1] + 0.5)
    drawing.grid()

    if graph.structure_kind == "wall":
        _draw_wall_plan(drawing, bundle)
        drawing.title("floor plan (wall structure)")
    else:
        _draw_column_plan(drawing, bundle)
        drawing.title("floor plan (column structure)")

    for region_tag, placements in sorted(getattr(bundle, "placements", {}).items()):
        for placement in placements:
            x0, y0, x1, y1 = placement.aabb_xy()
            drawing.rect(x0, y0, x1, y1, width=0.18, color="#555555")
            drawing.text(((x0 + x1) / 2, (y0 + y1) / 2), placement.object_id, size=2.0, color="#555555")
    return drawing.tobytes()


def _draw_wall_plan(drawing: _Drawing, bundle) -> None:
    for element in bundle.graph.elements():
        frame = element.metadata.get("wall")
        if frame is not None:
            drawing.poly(_wall_footprint(frame), fill="#e8e8e8")
            for hole in frame["holes"]:
                v0, v1 = frame["v_range"]
                span = _hole_span(frame, hole, v0, v1)
                drawing.poly(span, fill="#ffffff", width=0.0, color="#ffffff")
                if hole["kind"] == "door":
                    ox, oy = frame["origin"]
                    dx, dy = frame["dir"]
                    nx, ny = frame["outward"]
                    hinge = (ox + hole["u0"] * dx + v0 * nx, oy + hole["u0"] * dy + v0 * ny)
                    width = hole["u1"] - hole["u0"]
                    leaf = (hinge[0] - width * nx, hinge[1] - width * ny)  # leaf swings inward
                    drawing.line(hinge, leaf, width=0.25, color="#333333")
                    a_dir = math.atan2(-ny, -nx)
                    a_wall = math.atan2(dy, dx)
                    drawing.arc(hinge, width, min(a_dir, a_wall), max(a_dir, a_wall))
                else:
                    a = _hole_span(frame, hole, v0, v1)
                    drawing.line(a[0], a[1], width=0.18)
                    drawing.line(a[3], a[2], width=0.18)
                    mid0 = ((a[0][0] + a[3][0]) / 2, (a[0][1] + a[3][1]) / 2)
                    mid1 = ((a[1][0] + a[2][0]) / 2, (a[1][1] + a[2][1]) / 2)
                    drawing.line(mid0, mid1, width=0.12, color="#666666")
            continue
        arc_info = element.metadata.get("arc")
        if arc_info is not None:
            base = [(v[0], v[1]) for v in element.vertices[: len(element.vertices) // 2]]
            half = len(base) // 2
            drawing.poly(base[:half], close=False, width=0.35)
            drawing.poly(base[half:], close=False, width=0.35)
    plan = getattr(bundle, "plan", None)
    if plan is not None:
        for name in plan.rooms:
            x0, y0, x1, y1 = plan.bounds(name)
            spec = plan.rooms[name]
            drawing.text(((x0 + x1) / 2, (y0 + y1) / 2 + 0.3), name, size=3.2)
            drawing.text(
                ((x0 + x1) / 2, (y0 + y1) / 2 - 0.25),
                f"{spec.width:.2f} x {spec.depth:.2f} m",
                size=2.2,
                color="#444444",
            )


def _draw_column_plan(drawing: _Drawing, bundle) -> None:
    grid = bundle.grid
    for element in bundle.graph.elements():
        info = element.metadata.get("column")
        if info is not None:
            drawing.circle((info["center"][0], info["center"][1]), grid.column_radius, fill="#e8e8e8")
        beam = element.metadata.get("beam")
        if beam is not None:
            pts = np.asarray(element.vertices)
            (x0, y0), (x1, y1) = pts[:, :2].min(axis=0), pts[:, :2].max(axis=0)
            drawing.rect(x0, y0, x1, y1, width=0.12, color="#999999")
    plan = getattr(bundle, "column_plan", None)
    if plan is not None:
        from .openings import gap_geometry

        for slot in plan.slots:
            geo = gap_geometry(grid, slot.gap)
            cx, cy = geo["center"]
            along = (1.0, 0.0) if slot.gap[0] == "h" else (0.0, 1.0)
            half = geo["clear"] / 2.0
            a = (cx - along[0] * half, cy - along[1] * half)
            b = (cx + along[0] * half, cy + along[1] * half)
            if slot.fill == "door":
                drawing.line(a, b, width=0.35, color="#333333")
                normal = (-along[1], along[0])
                leaf = (a[0] + normal[0] * geo["clear"], a[1] + normal[1] * geo["clear"])
                drawing.line(a, leaf, width=0.25, color="#333333")
                drawing.arc(a, geo["clear"], math.atan2(along[1], along[0]), math.atan2(normal[1], normal[0]))
            else:
                drawing.line(a, b, width=0.18)
                ticks = 3 if slot.fill == "long_window" else 2
                for k in range(1, ticks + 1):
                    t = k / (ticks + 1)
                    px = a[0] + (b[0] - a[0]) * t
                    py = a[1] + (b[1] - a[1]) * t
                    normal = (-along[1], along[0])
                    drawing.line(
                        (px - normal[0] * 0.08, py - normal[1] * 0.08),
                        (px + normal[0] * 0.08, py + normal[1] * 0.08),
                        width=0.18,
                    )
    for room, cells in sorted(getattr(bundle, "room_cells", {}).items()):
        if not cells:
            continue
        xs = [grid.center(i, j)[0] for i, j in cells] + [grid.center(i + 1, j + 1)[0] for i, j in cells]
        ys = [grid.center(i, j)[1] for i, j in cells] + [grid.center(i + 1, j + 1)[1] for i, j in cells]
        drawing.text(((min(xs) + max(xs)) / 2, (min(ys) + max(ys)) / 2), room, size=3.2)
