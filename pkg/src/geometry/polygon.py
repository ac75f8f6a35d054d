"""Polygon helpers on top of shapely: offsets, validity, reflections."""

import numpy as np
import shapely
from shapely.affinity import scale
from shapely.geometry import MultiPolygon, Polygon, box
from shapely.geometry.polygon import orient

from ..core.errors import InfeasibleGeometryError

MITRE_LIMIT = 10.0


def polygon_parts(geometry) -> list[Polygon]:
    """Polygonal parts of any shapely geometry, empty parts dropped."""
    if geometry is None or geometry.is_empty:
        return []
    if isinstance(geometry, Polygon):
        return [geometry]
    if isinstance(geometry, MultiPolygon):
        return [p for p in geometry.geoms if not p.is_empty]
    return [p for g in getattr(geometry, "geoms", []) for p in polygon_parts(g)]


def offset_polygon(polygon: Polygon, distance: float) -> list[Polygon]:
    """Offset outward (distance > 0) or inward (distance < 0) with sharp corners.

    An inward offset that consumes the polygon returns an empty list.
    """
    if distance == 0:
        return [polygon]
    buffered = polygon.buffer(distance, join_style="mitre", mitre_limit=MITRE_LIMIT)
    return polygon_parts(buffered)


def make_polygon(coords, holes=None, what: str = "outline") -> Polygon:
    """Build a counter-clockwise polygon and reject self-intersections."""
    polygon = Polygon(coords, holes)
    if not polygon.is_valid:
        raise InfeasibleGeometryError(f"{what} is not simple: {shapely.is_valid_reason(polygon)}")
    if polygon.area <= 0:
        raise InfeasibleGeometryError(f"{what} has zero area")
    return orient(polygon, sign=1.0)


def mirror_x(geometry):
    """Reflect across the y axis (x -> -x)."""
    return scale(geometry, xfact=-1.0, yfact=1.0, origin=(0.0, 0.0))


def mirror_y(geometry):
    """Reflect across the x axis (y -> -y)."""
    return scale(geometry, xfact=1.0, yfact=-1.0, origin=(0.0, 0.0))


def ground_frame(bounds: tuple[float, float, float, float], gap: float, width: float) -> Polygon:
    """Rectangular ground frame around a bounding box, inner edge at `gap`."""
    minx, miny, maxx, maxy = bounds
    inner = box(minx - gap, miny - gap, maxx + gap, maxy + gap)
    outer = box(minx - gap - width, miny - gap - width, maxx + gap + width, maxy + gap + width)
    return orient(Polygon(outer.exterior.coords, [inner.exterior.coords]), sign=1.0)


def circle(radius: float, tolerance: float, center: tuple[float, float] = (0.0, 0.0)) -> Polygon:
    """Regular polygon inscribed in a circle, sagitta within tolerance."""
    ratio = min(max(1.0 - tolerance / radius, -1.0), 1.0)
    n = max(16, int(np.ceil(np.pi / np.arccos(ratio))))
    n = 4 * int(np.ceil(n / 4))
    angles = 2.0 * np.pi * np.arange(n) / n
    return Polygon(np.column_stack([center[0] + radius * np.cos(angles), center[1] + radius * np.sin(angles)]))
