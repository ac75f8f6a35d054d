"""Partition of the interface layers by distance from the metal edge.

Metal surfaces (MS, MA) and the bare substrate (SA) are split at x0 and
x0/2 from the nearest metal edge: interior beyond x0, accurate between x0/2
and x0. The band closer than x0/2 is the diverging region, covered by the
edge scaling factors rather than by samples.

Panels of the outermost mesh ring are integrated with the edge singularity
|E|² ~ 1/d, so a ring-0 panel of area A and mean field E contributes
(A/4) ln(hi/lo) E² over the sub-band [lo, hi]. Deeper rings split their
area linearly.
"""

import logging
from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import Polygon
from shapely.ops import unary_union

from ..core.config import SolverSettings, settings
from ..core.errors import UsageError
from ..geometry.pad import PadLayout
from ..geometry.polygon import MITRE_LIMIT, polygon_parts
from ..solver.fields import SampleRegion
from ..solver.mesh import PanelMesh, mesh_conductors

logger = logging.getLogger(__name__)

_MIN_PART_AREA = 1e-6


@dataclass(frozen=True, eq=False)
class PadRegions:
    """Sample regions of one pad layout and mesh."""

    x0: float
    metal_interior: SampleRegion
    metal_accurate: SampleRegion
    gap_accurate: SampleRegion
    gap_interior: SampleRegion

    def for_layer(self, layer: str) -> tuple[SampleRegion, SampleRegion]:
        """(interior, accurate) regions carrying the given layer."""
        if layer in ("MS", "MA"):
            return self.metal_interior, self.metal_accurate
        if layer == "SA":
            return self.gap_interior, self.gap_accurate
        raise UsageError(f"unknown layer '{layer}'")

    def all(self) -> list[SampleRegion]:
        return [self.metal_interior, self.metal_accurate, self.gap_accurate, self.gap_interior]


def _overlap(lo: np.ndarray, hi: np.ndarray, a: float, b: float) -> np.ndarray:
    return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


def _log_weight(area: np.ndarray, hi: np.ndarray, a: float, b: float) -> np.ndarray:
    """(A/4) ln(top/bottom) over [a, b] clipped to a ring-0 panel spanning [0, hi]."""
    top = np.minimum(hi, b)
    out = np.zeros_like(area)
    ok = top > a
    out[ok] = area[ok] / 4.0 * np.log(top[ok] / a)
    return out


def _panel_region(mesh: PanelMesh, name: str, weights: np.ndarray, kind: str) -> SampleRegion:
    keep = np.flatnonzero(weights > 0)
    return SampleRegion(
        name=name,
        points=mesh.centroids[keep],
        weights=weights[keep],
        kind=kind,
        panel_index=keep,
    )


def metal_regions(mesh: PanelMesh, x0: float) -> tuple[SampleRegion, SampleRegion]:
    """Interior [x0, inf) and accurate [x0/2, x0) on-metal regions of every conductor."""
    lo, hi, area = mesh.d_lo, mesh.d_hi, mesh.areas
    edge = mesh.ring == 0
    core = np.isinf(hi)
    linear = ~edge & ~core

    interior = np.zeros(mesh.n_panels)
    accurate = np.zeros(mesh.n_panels)

    width = np.where(linear, hi - lo, 1.0)
    interior[linear] = area[linear] * _overlap(lo[linear], hi[linear], x0, np.inf) / width[linear]
    accurate[linear] = area[linear] * _overlap(lo[linear], hi[linear], 0.5 * x0, x0) / width[linear]

    interior[edge] = _log_weight(area[edge], hi[edge], x0, np.inf)
    accurate[edge] = _log_weight(area[edge], hi[edge], 0.5 * x0, x0)

    interior[core] = area[core]
    if core.any() and np.min(lo[core]) < x0:
        logger.warning(
            "Mesh has no edge grading inside x0 = %.2f µm; the accurate band is unresolved", x0
        )

    return (
        _panel_region(mesh, "metal_interior", interior, "metal"),
        _panel_region(mesh, "metal_accurate", accurate, "metal"),
    )


def _inner_frame(layout: PadLayout) -> Polygon:
    if layout.ground is None or not layout.ground.interiors:
        raise UsageError("layout has no ground frame")
    return Polygon(layout.ground.interiors[0].coords)


def gap_accurate_region(mesh: PanelMesh, layout: PadLayout, x0: float) -> SampleRegion:
    """Substrate band [x0/2, x0) outside every metal edge facing the gap."""
    gap = layout.gap_region()
    edge = np.flatnonzero(mesh.ring == 0)
    weights = np.zeros(mesh.n_panels)
    if len(edge):
        tol = 1e-6 * max(float(np.max(mesh.d_hi[edge])), 1.0)
        facing = edge[shapely.dwithin(mesh.panels[edge], gap, tol)]
        weights[facing] = mesh.areas[facing] / 4.0 * np.log(2.0)
    return _panel_region(mesh, "gap_accurate", weights, "edge")


def gap_interior_region(
    mesh: PanelMesh,
    layout: PadLayout,
    x0: float,
    spacing: float,
    growth: float = 2.0,
) -> SampleRegion:
    """Substrate farther than x0 from all metal, sampled on a graded cell grid.

    Samples within the outermost band of the nearest edge panel carry that
    panel's index and distance so the edge singularity is used there.
    """
    inner = _inner_frame(layout)
    metal = unary_union([layout.pad1, layout.pad2])
    region = inner.buffer(-x0, join_style="mitre", mitre_limit=MITRE_LIMIT).difference(
        metal.buffer(x0)
    )
    parts = [p for p in polygon_parts(region) if p.area > _MIN_PART_AREA]
    if not parts:
        logger.warning("No substrate farther than x0 = %.2f µm from the metal", x0)
        return SampleRegion("gap_interior", np.zeros((0, 2)), np.zeros(0), kind="plane")

    samples = mesh_conductors(
        [(f"gap{k}", part) for k, part in enumerate(parts)],
        spacing,
        0.5 * x0,
        growth=growth,
    )
    points = samples.centroids
    weights = samples.areas

    all_metal = unary_union([polygon for _, polygon in layout.conductors()])
    distance = shapely.distance(all_metal, shapely.points(points))

    panel_index = np.full(len(points), -1)
    edge = np.flatnonzero(mesh.ring == 0)
    if len(edge):
        tree = shapely.STRtree(mesh.panels[edge])
        which, nearest = tree.query_nearest(shapely.points(points), all_matches=False)
        source = edge[nearest]
        band = mesh.d_hi[source] - mesh.d_lo[source]
        near = distance[which] < band
        panel_index[which[near]] = source[near]

    logger.debug(
        "Gap interior: %d samples, %d near an edge, area %.0f µm²",
        len(points),
        int(np.sum(panel_index >= 0)),
        float(weights.sum()),
    )
    return SampleRegion(
        name="gap_interior",
        points=points,
        weights=weights,
        kind="plane",
        panel_index=panel_index,
        distance=distance,
    )


def build_pad_regions(
    layout: PadLayout,
    mesh: PanelMesh,
    x0: float | None = None,
    config: SolverSettings | None = None,
) -> PadRegions:
    """All four sample regions of a pad layout."""
    config = config or settings.solver
    x0 = settings.participation.x0 if x0 is None else x0
    if x0 <= 0:
        raise UsageError(f"x0 must be positive, got {x0}")

    metal_interior, metal_accurate = metal_regions(mesh, x0)
    for region in (metal_interior, metal_accurate):
        if len(region.points) == 0:
            logger.warning("Region '%s' has no samples", region.name)
    return PadRegions(
        x0=x0,
        metal_interior=metal_interior,
        metal_accurate=metal_accurate,
        gap_accurate=gap_accurate_region(mesh, layout, x0),
        gap_interior=gap_interior_region(
            mesh, layout, x0, config.sa_sample_spacing, growth=config.growth
        ),
    )
