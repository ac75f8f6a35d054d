"""Geometry exchange: JSON documents, SVG outlines, PNG previews."""

import dataclasses
import hashlib
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image, ImageDraw
from shapely.geometry import Polygon

from ..core.errors import ConfigError
from .pad import PadDesignVector, PadLayout
from .polygon import make_polygon, mirror_y
from .wire import WireDesignVector, WireProfile, build_wire_profile

logger = logging.getLogger(__name__)

COLORS = {
    "pad1": "#3b6fb6",
    "pad2": "#b64a3b",
    "ground": "#8c8c8c",
    "wire1": "#3b6fb6",
    "wire2": "#b64a3b",
}

PROFILE_SAMPLES = 101


def _ring_coords(coords) -> list[list[float]]:
    return [[float(x), float(y)] for x, y in np.asarray(coords)[:-1]]


def polygon_to_dict(polygon: Polygon) -> dict[str, Any]:
    return {
        "exterior": _ring_coords(polygon.exterior.coords),
        "holes": [_ring_coords(ring.coords) for ring in polygon.interiors],
    }


def polygon_from_dict(data: dict[str, Any], what: str) -> Polygon:
    return make_polygon(data["exterior"], data.get("holes") or None, what=what)


def geometry_polygons(geometry: PadLayout | WireProfile) -> list[tuple[str, Polygon]]:
    """Named outlines of a layout, or of the upper and lower wire."""
    if isinstance(geometry, PadLayout):
        return geometry.conductors()
    upper = geometry.polygon()
    return [("wire1", upper), ("wire2", mirror_y(upper))]


def geometry_to_dict(geometry: PadLayout | WireProfile) -> dict[str, Any]:
    """Canonical JSON document for a layout or a wire profile."""
    if isinstance(geometry, WireProfile):
        ys = np.linspace(0.0, geometry.wire_length, PROFILE_SAMPLES)
        return {
            "type": "wire_profile",
            "kind": geometry.kind,
            "units": "um",
            "design_vector": [float(v) for v in geometry.design_vector.values],
            "wire_length": geometry.wire_length,
            "junction_width": 2 * geometry.junction_half_width,
            "control_points": geometry.control_points.tolist(),
            "profile": [[float(y), float(r)] for y, r in zip(ys, geometry.r(ys))],
        }

    v = geometry.design_vector
    width, height = geometry.footprint
    return {
        "type": "pad_layout",
        "kind": geometry.kind,
        "units": "um",
        "design_vector": dict(zip(PadDesignVector.NAMES, v.to_array().tolist())) if v else None,
        "ground_gap": geometry.ground_gap,
        "footprint_limit": list(geometry.footprint_limit),
        "footprint": [width, height],
        "wire_length": geometry.wire_length,
        "mirror_pair": geometry.mirror_pair,
        "parameters": geometry.parameters,
        "conductors": {name: polygon_to_dict(p) for name, p in geometry.conductors()},
    }


def geometry_from_dict(data: dict[str, Any]) -> PadLayout | WireProfile:
    """Rebuild a geometry from its JSON document."""
    kind = data.get("type")
    if kind == "wire_profile":
        profile = build_wire_profile(
            WireDesignVector.from_array(data["design_vector"]),
            wire_length=data["wire_length"],
            junction_width=data["junction_width"],
        )
        return dataclasses.replace(profile, kind=data.get("kind", profile.kind))

    if kind == "pad_layout":
        conductors = data["conductors"]
        v = data.get("design_vector")
        ground = conductors.get("ground")
        return PadLayout(
            kind=data["kind"],
            pad1=polygon_from_dict(conductors["pad1"], "pad1"),
            pad2=polygon_from_dict(conductors["pad2"], "pad2"),
            ground=polygon_from_dict(ground, "ground") if ground else None,
            ground_gap=data["ground_gap"],
            footprint_limit=tuple(data["footprint_limit"]),
            design_vector=PadDesignVector(**v) if v else None,
            mirror_axis=((0.0, v["y0"]), (0.0, v["y4"])) if v else None,
            mirror_pair=data.get("mirror_pair", True),
            wire_length=data.get("wire_length"),
            parameters=data.get("parameters", {}),
        )

    raise ConfigError(f"Unknown geometry document type: {kind!r}")


def geometry_hash(geometry: PadLayout | WireProfile) -> str:
    """SHA-256 over the canonical JSON document."""
    doc = json.dumps(geometry_to_dict(geometry), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()


def _bounds(polygons: list[tuple[str, Polygon]]) -> tuple[float, float, float, float]:
    b = np.array([p.bounds for _, p in polygons])
    return b[:, 0].min(), b[:, 1].min(), b[:, 2].max(), b[:, 3].max()


def _path(polygon: Polygon) -> str:
    rings = [polygon.exterior, *polygon.interiors]
    parts = []
    for ring in rings:
        coords = np.asarray(ring.coords)[:-1]
        head = f"M {coords[0, 0]:.4f} {coords[0, 1]:.4f}"
        tail = " ".join(f"L {x:.4f} {y:.4f}" for x, y in coords[1:])
        parts.append(f"{head} {tail} Z")
    return " ".join(parts)


def to_svg(geometry: PadLayout | WireProfile, margin: float = 10.0) -> str:
    """SVG document, one user unit per µm, y axis pointing up."""
    polygons = geometry_polygons(geometry)
    minx, miny, maxx, maxy = _bounds(polygons)
    minx, miny, maxx, maxy = minx - margin, miny - margin, maxx + margin, maxy + margin
    width, height = maxx - minx, maxy - miny

    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{width:.4f}" height="{height:.4f}" '
        f'viewBox="{minx:.4f} {-maxy:.4f} {width:.4f} {height:.4f}">',
        '<g transform="scale(1,-1)">',
    ]
    for name, polygon in polygons:
        lines.append(
            f'<path id="{name}" d="{_path(polygon)}" fill="{COLORS.get(name, "#444444")}" '
            'fill-rule="evenodd" stroke="none"/>'
        )
    lines += ["</g>", "</svg>"]
    return "\n".join(lines) + "\n"


def to_png(geometry: PadLayout | WireProfile, path: Path, max_pixels: int = 1000) -> Path:
    """Raster preview, longest side max_pixels."""
    polygons = geometry_polygons(geometry)
    minx, miny, maxx, maxy = _bounds(polygons)
    scale = max_pixels / max(maxx - minx, maxy - miny)
    size = (int(np.ceil((maxx - minx) * scale)) + 1, int(np.ceil((maxy - miny) * scale)) + 1)

    def pixels(coords) -> list[tuple[float, float]]:
        c = np.asarray(coords)
        return [((x - minx) * scale, (maxy - y) * scale) for x, y in c]

    image = Image.new("RGB", size, "white")
    draw = ImageDraw.Draw(image)
    for name, polygon in polygons:
        draw.polygon(pixels(polygon.exterior.coords), fill=COLORS.get(name, "#444444"))
        for ring in polygon.interiors:
            draw.polygon(pixels(ring.coords), fill="white")

    image.save(path)
    return path


def save_geometry(
    geometry: PadLayout | WireProfile, directory: Path, stem: str = "geometry"
) -> dict[str, Path]:
    """Write <stem>.json, <stem>.svg and <stem>.png; returns the paths."""
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": directory / f"{stem}.json",
        "svg": directory / f"{stem}.svg",
        "png": directory / f"{stem}.png",
    }
    doc = geometry_to_dict(geometry)
    doc["hash"] = geometry_hash(geometry)
    paths["json"].write_text(json.dumps(doc, indent=2))
    paths["svg"].write_text(to_svg(geometry))
    to_png(geometry, paths["png"])
    logger.debug("Wrote geometry %s to %s", doc["hash"][:8], directory)
    return paths


def load_geometry(path: Path) -> PadLayout | WireProfile:
    """Read a geometry JSON document written by save_geometry."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read geometry file {path}: {e}") from e
    return geometry_from_dict(data)
