"""Interface fields from a charge solution.

On metal the normal field is read from the local charge density; it has the
same magnitude on the vacuum and the substrate side of an interface charge.
Off metal, in the conductor plane, the field is purely tangential and is
summed from all panels. Close to an edge, off-metal samples follow the
edge singularity sigma(d) = K d^(-1/2) fitted to the outermost band panel,
with K² = sigma_mean² b / 4.
"""

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Literal

import numpy as np
import shapely
from scipy.interpolate import griddata

from ..core.config import GeometrySettings, SolverSettings, settings
from ..core.errors import GeometryError
from ..geometry.wire import WireProfile, wire_layout
from .kernels import field_matrices, on_edge
from .mesh import level_sizes, mesh_conductors
from .mom import ChargeSolution, HalfSpaceDielectric, MomSystem

logger = logging.getLogger(__name__)

NUDGE = 1e-3
CHUNK = 2048

RegionKind = Literal["metal", "edge", "plane"]


@dataclass(frozen=True, eq=False)
class SampleRegion:
    """Quadrature points of one region; weights in µm².

    kind:
        metal: normal field from the density of `panel_index` at each point.
        edge: tangential field just outside a metal edge, from the density
            of the edge panel `panel_index`.
        plane: tangential field in the conductor plane; points with
            `panel_index` >= 0 use the edge singularity of that panel at
            distance `distance`, the rest are summed over all panels.
    """

    name: str
    points: np.ndarray
    weights: np.ndarray
    kind: RegionKind = "metal"
    panel_index: np.ndarray | None = None
    distance: np.ndarray | None = None

    @property
    def on_metal(self) -> bool:
        return self.kind == "metal"

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True, eq=False)
class FieldSamples:
    """Field magnitudes at the points of a SampleRegion, V/m."""

    region: SampleRegion
    e_normal: np.ndarray
    e_tangential: np.ndarray


def on_metal_field(solution: ChargeSolution, panel_index: np.ndarray | None = None) -> np.ndarray:
    """|E| normal to the metal on either side, per panel or per listed panel."""
    sigma = solution.sigma if panel_index is None else solution.sigma[panel_index]
    return solution.dielectric.normal_field(sigma)


def edge_singular_field(
    solution: ChargeSolution, panel_index: np.ndarray, distance: np.ndarray
) -> np.ndarray:
    """|E| at `distance` µm from an edge whose outermost panel is `panel_index`."""
    band = solution.mesh.d_hi[panel_index] - solution.mesh.d_lo[panel_index]
    mean = on_metal_field(solution, panel_index)
    return mean * np.sqrt(band) / (2.0 * np.sqrt(np.maximum(distance, 1e-12)))


def in_plane_field(solution: ChargeSolution, points: np.ndarray) -> np.ndarray:
    """In-plane field vectors (V/m) at points of the conductor plane.

    Points lying on a panel edge are moved 1e-3 panel diameters away from
    that panel's centroid first.
    """
    mesh = solution.mesh
    points = np.array(points, dtype=float, ndmin=2)

    hit = on_edge(mesh, points, solution.near_factor)
    touching = hit >= 0
    if touching.any():
        logger.warning("Nudging %d sample points off panel edges", int(touching.sum()))
        src = hit[touching]
        away = points[touching] - mesh.centroids[src]
        away /= np.linalg.norm(away, axis=1, keepdims=True)
        points[touching] += NUDGE * mesh.diameters[src, None] * away

    k = solution.dielectric.kernel_constant
    out = np.empty_like(points)
    for start in range(0, len(points), CHUNK):
        chunk = points[start : start + CHUNK]
        gx, gy = field_matrices(mesh, chunk, solution.near_factor)
        out[start : start + CHUNK, 0] = k * (gx @ solution.sigma)
        out[start : start + CHUNK, 1] = k * (gy @ solution.sigma)
    return out


def interface_fields(
    solution: ChargeSolution,
    regions: Iterable[SampleRegion],
) -> dict[str, FieldSamples]:
    """Normal and tangential field magnitudes over each sample region."""
    out = {}
    for region in regions:
        n = len(region.points)
        if n == 0:
            out[region.name] = FieldSamples(region, np.zeros(0), np.zeros(0))
            continue
        if region.kind in ("metal", "edge") and region.panel_index is None:
            raise GeometryError(f"{region.kind} region '{region.name}' has no panel index")

        if region.kind == "metal":
            e_n = on_metal_field(solution, region.panel_index)
            out[region.name] = FieldSamples(region, e_n, np.zeros(n))
        elif region.kind == "edge":
            e_t = on_metal_field(solution, region.panel_index)
            out[region.name] = FieldSamples(region, np.zeros(n), e_t)
        else:
            e_t = np.zeros(n)
            near = np.zeros(n, dtype=bool) if region.panel_index is None else region.panel_index >= 0
            if near.any():
                e_t[near] = edge_singular_field(
                    solution, region.panel_index[near], region.distance[near]
                )
            if (~near).any():
                e_t[~near] = np.linalg.norm(in_plane_field(solution, region.points[~near]), axis=1)
            out[region.name] = FieldSamples(region, np.zeros(n), e_t)
    return out


@dataclass(frozen=True, eq=False)
class CenterlineField:
    """Normal field on the upper wire's centerline under a ±0.5 V drive."""

    y: np.ndarray
    e: np.ndarray
    solution: ChargeSolution


def centerline_field(
    profile: WireProfile,
    dielectric: HalfSpaceDielectric | None = None,
    n_samples: int | None = None,
    level: int = 0,
    geometry: GeometrySettings | None = None,
    solver: SolverSettings | None = None,
    potentials: tuple[float, float] = (0.5, -0.5),
) -> CenterlineField:
    """E(y) along x = 0 of the upper wire in the local wire-plus-stub model.

    The centerline lies on the metal, where the in-plane field of a perfect
    conductor vanishes; |E| there is the normal field from the interpolated
    surface charge, the same on the MS and MA sides.

    Raises:
        GeometryError: a centerline sample does not lie on the wire metal.
    """
    geometry = geometry or settings.geometry
    solver = solver or settings.solver
    dielectric = dielectric or HalfSpaceDielectric(solver.eps_substrate)
    n_samples = n_samples or settings.participation.centerline_samples

    conductors = wire_layout(profile, geometry)
    target, band = level_sizes(solver, level, wire=True)
    mesh = mesh_conductors(
        conductors,
        target,
        band,
        growth=solver.growth,
        mirror_pairs={"wire2": "wire1"},
        refinement_level=level,
    )
    solution = MomSystem(mesh, dielectric).solve(
        {"wire1": potentials[0], "wire2": potentials[1]}
    )

    y = np.linspace(geometry.junction_gap / 2, profile.wire_length, n_samples)
    x = np.zeros_like(y)
    upper = conductors[0][1]
    if not np.all(shapely.intersects_xy(upper, x, y)):
        raise GeometryError("centerline sample does not lie on the wire")

    on_wire = mesh.mask("wire1")
    centroids = mesh.centroids[on_wire]
    sigma = solution.sigma[on_wire]
    points = np.column_stack([x, y])
    sampled = griddata(centroids, sigma, points, method="linear")
    missing = np.isnan(sampled)
    if missing.any():
        sampled[missing] = griddata(centroids, sigma, points[missing], method="nearest")

    return CenterlineField(y=y, e=dielectric.normal_field(sampled), solution=solution)
