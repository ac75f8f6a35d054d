"""Graded panel meshes of zero-thickness conductors.

Each conductor is cut into rings parallel to its edge (ring k has width
band * growth**k, starting at the edge) and a core. Rings and core are
clipped against an axis-aligned cell grid anchored at the origin, so a
mirror-symmetric polygon gets a mirror-symmetric mesh. Slivers are merged
into the neighbour in the same ring with which they share the most boundary;
panels still longer than MAX_ASPECT times their width are cut into strips.

A conductor listed as hole-graded (the ground frame) gets rings only along
its holes, the edges facing the pads; its outer boundary meets the core.
"""

import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import Polygon
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

from ..core.config import SolverSettings, settings
from ..core.errors import ConfigError, MeshingError
from ..geometry.pad import PadLayout
from ..geometry.polygon import MITRE_LIMIT, mirror_y

logger = logging.getLogger(__name__)

MAX_ASPECT = 8.0
MIN_AREA_FRACTION = 0.2
_AREA_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class PanelMesh:
    """Flat panels tiling a set of conductors, lengths in µm.

    Per panel: ring index (-1 for the core), and the band [d_lo, d_hi) of
    distance from the conductor edge the panel was cut from (d_hi = inf for
    the core). Edges are stored flat, outer rings counter-clockwise and
    holes clockwise, with the owning panel in `edge_owner`.
    """

    panels: np.ndarray
    conductor_ids: np.ndarray
    conductor_names: tuple[str, ...]
    ring: np.ndarray
    d_lo: np.ndarray
    d_hi: np.ndarray
    band: float = 0.0
    refinement_level: int = 0
    centroids: np.ndarray = field(init=False)
    areas: np.ndarray = field(init=False)
    diameters: np.ndarray = field(init=False)
    edge_a: np.ndarray = field(init=False)
    edge_b: np.ndarray = field(init=False)
    edge_owner: np.ndarray = field(init=False)
    edge_offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        panels = np.asarray(self.panels, dtype=object)
        object.__setattr__(self, "panels", panels)
        object.__setattr__(self, "areas", shapely.area(panels))
        object.__setattr__(self, "centroids", shapely.get_coordinates(shapely.centroid(panels)))
        bounds = shapely.bounds(panels)
        object.__setattr__(
            self, "diameters", np.hypot(bounds[:, 2] - bounds[:, 0], bounds[:, 3] - bounds[:, 1])
        )

        starts, ends, owners = [], [], []
        for i, panel in enumerate(panels):
            panel = orient(panel, sign=1.0)
            for ring in (panel.exterior, *panel.interiors):
                coords = np.asarray(ring.coords)
                a, b = coords[:-1], coords[1:]
                keep = np.any(a != b, axis=1)
                starts.append(a[keep])
                ends.append(b[keep])
                owners.append(np.full(keep.sum(), i))
        owner = np.concatenate(owners)
        object.__setattr__(self, "edge_a", np.vstack(starts))
        object.__setattr__(self, "edge_b", np.vstack(ends))
        object.__setattr__(self, "edge_owner", owner)
        counts = np.bincount(owner, minlength=len(panels))
        object.__setattr__(self, "edge_offsets", np.concatenate([[0], np.cumsum(counts)]))

    @property
    def n_panels(self) -> int:
        return len(self.panels)

    @property
    def n_conductors(self) -> int:
        return len(self.conductor_names)

    def conductor_index(self, name: str) -> int:
        try:
            return self.conductor_names.index(name)
        except ValueError:
            raise ConfigError(f"mesh has no conductor '{name}'") from None

    def mask(self, name: str) -> np.ndarray:
        return self.conductor_ids == self.conductor_index(name)

    def conductor_area(self, name: str) -> float:
        return float(self.areas[self.mask(name)].sum())

    def summary(self) -> dict[str, object]:
        return {
            "panels": self.n_panels,
            "conductors": {
                name: int(np.sum(self.conductor_ids == k)) for k, name in enumerate(self.conductor_names)
            },
            "rings": int(self.ring.max()) + 1 if self.n_panels else 0,
            "band": self.band,
            "refinement_level": self.refinement_level,
        }


def _polygon_array(geometries: np.ndarray) -> np.ndarray:
    """Flatten multi-part results down to their polygons."""
    parts = shapely.get_parts(geometries)
    while True:
        multi = np.isin(shapely.get_type_id(parts), [4, 5, 6, 7])
        if not multi.any():
            break
        parts = np.concatenate([parts[~multi], shapely.get_parts(parts[multi])])
    return parts[shapely.get_type_id(parts) == 3]


def _grid_cells(region, size: float) -> np.ndarray:
    """Clip `region` against the size x size grid through the origin."""
    if region.is_empty:
        return np.empty(0, dtype=object)
    minx, miny, maxx, maxy = region.bounds
    ix = np.arange(np.floor(minx / size), np.ceil(maxx / size))
    iy = np.arange(np.floor(miny / size), np.ceil(maxy / size))
    x0, y0 = np.meshgrid(ix * size, iy * size)
    x0, y0 = x0.ravel(), y0.ravel()
    cells = shapely.box(x0, y0, x0 + size, y0 + size)

    shapely.prepare(region)
    cells = cells[shapely.intersects(region, cells)]
    pieces = _polygon_array(shapely.intersection(cells, region))
    return pieces[shapely.area(pieces) > _AREA_EPS * size * size]


def _aspect_ratios(panels: np.ndarray) -> np.ndarray:
    aspect = np.ones(len(panels))
    envelopes = shapely.oriented_envelope(panels)
    ok = shapely.get_type_id(envelopes) == 3
    if ok.any():
        coords = shapely.get_coordinates(shapely.get_exterior_ring(envelopes[ok])).reshape(-1, 5, 2)
        s1 = np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
        s2 = np.linalg.norm(coords[:, 2] - coords[:, 1], axis=1)
        aspect[ok] = np.maximum(s1, s2) / np.maximum(np.minimum(s1, s2), 1e-300)
    return aspect


def _merge_slivers(panels: np.ndarray, ring: np.ndarray, nominal: np.ndarray) -> np.ndarray:
    """Fold undersized or elongated pieces into a neighbour of the same ring."""
    areas = shapely.area(panels)
    sliver = (areas < MIN_AREA_FRACTION * nominal) | (_aspect_ratios(panels) > MAX_ASPECT)
    if not sliver.any():
        return np.arange(len(panels))

    parent = np.arange(len(panels))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    tree = shapely.STRtree(panels)
    for i in np.flatnonzero(sliver)[np.argsort(areas[sliver], kind="stable")]:
        candidates = tree.query(panels[i], predicate="intersects")
        candidates = candidates[(candidates != i) & (ring[candidates] == ring[i])]
        if len(candidates) == 0:
            continue
        shared = shapely.length(shapely.intersection(panels[i], panels[candidates]))
        if shared.max() <= 0:
            continue
        target = find(int(candidates[np.argmax(shared)]))
        root = find(int(i))
        if target != root:
            parent[root] = target

    return np.array([find(i) for i in range(len(panels))])


def _split_elongated(panel: Polygon) -> list[Polygon]:
    """Cut a panel into strips across the long side of its oriented envelope."""
    aspect = _aspect_ratios(np.array([panel], dtype=object))[0]
    if aspect <= MAX_ASPECT:
        return [panel]
    coords = np.asarray(shapely.oriented_envelope(panel).exterior.coords)
    a, b = coords[1] - coords[0], coords[2] - coords[1]
    if np.linalg.norm(a) < np.linalg.norm(b):
        a, b = b, a
    n = int(np.ceil(aspect / 2.0))
    cuts = coords[0] + np.outer(np.linspace(0.0, 1.0, n + 1), a)
    strips = [Polygon([cuts[k], cuts[k + 1], cuts[k + 1] + b, cuts[k] + b]) for k in range(n)]
    pieces = _polygon_array(shapely.intersection(np.array(strips, dtype=object), panel))
    pieces = pieces[shapely.area(pieces) > _AREA_EPS * panel.area]
    worst = _aspect_ratios(pieces).max()
    if worst > MAX_ASPECT:
        raise MeshingError(
            f"panel at {panel.centroid.x:.3f}, {panel.centroid.y:.3f} keeps aspect {worst:.1f} after splitting"
        )
    return list(pieces)


def _shrink(polygon: Polygon, depth: float, from_holes: bool):
    """The part of `polygon` farther than `depth` from its graded edges."""
    if from_holes:
        holes = unary_union([Polygon(ring.coords) for ring in polygon.interiors])
        return polygon.difference(holes.buffer(depth, join_style="mitre", mitre_limit=MITRE_LIMIT))
    return polygon.buffer(-depth, join_style="mitre", mitre_limit=MITRE_LIMIT)


def _mesh_polygon(
    polygon: Polygon, target: float, band: float, growth: float, from_holes: bool = False
) -> tuple[list[Polygon], list[int], list[float], list[float]]:
    pieces, rings, lows, highs, nominal = [], [], [], [], []
    from_holes = from_holes and bool(polygon.interiors)

    outer = polygon
    depth, width, k = 0.0, band, 0
    if band > 0:
        while width <= target / 2 * (1 + 1e-12):
            inner = _shrink(polygon, depth + width, from_holes)
            region = outer.difference(inner) if not inner.is_empty else outer
            size = min(target, 4 * width)
            cut = _grid_cells(region, size)
            pieces.append(cut)
            rings += [k] * len(cut)
            lows += [depth] * len(cut)
            highs += [depth + width] * len(cut)
            nominal += [size * width] * len(cut)
            depth += width
            width *= growth
            k += 1
            outer = inner
            if inner.is_empty:
                break

    if not outer.is_empty:
        cut = _grid_cells(outer, target)
        pieces.append(cut)
        rings += [-1] * len(cut)
        lows += [depth] * len(cut)
        highs += [np.inf] * len(cut)
        nominal += [target * target] * len(cut)

    panels = np.concatenate(pieces) if pieces else np.empty(0, dtype=object)
    rings_arr = np.array(rings, dtype=int)
    groups = _merge_slivers(panels, rings_arr, np.array(nominal))

    out_panels, out_rings, out_lo, out_hi = [], [], [], []
    for root in np.unique(groups):
        members = np.flatnonzero(groups == root)
        merged = panels[root] if len(members) == 1 else shapely.union_all(panels[members])
        if isinstance(merged, Polygon):
            parts = [merged]
        else:
            parts = list(panels[members])
        for piece in (p for part in parts for p in _split_elongated(part)):
            out_panels.append(piece)
            out_rings.append(rings[root])
            out_lo.append(lows[root])
            out_hi.append(highs[root])
    return out_panels, out_rings, out_lo, out_hi


def mesh_conductors(
    conductors: Sequence[tuple[str, Polygon]],
    target_panel_size: float,
    edge_band_size: float = 0.0,
    growth: float = 2.0,
    coarse_factors: dict[str, float] | None = None,
    mirror_pairs: dict[str, str] | None = None,
    hole_graded: Sequence[str] = (),
    refinement_level: int = 0,
) -> PanelMesh:
    """Mesh named conductor polygons.

    Args:
        conductors: (name, polygon) pairs; the order fixes conductor ids.
        target_panel_size: core panel size, µm.
        edge_band_size: width of the outermost ring; 0 disables grading.
        growth: width ratio of consecutive rings.
        coarse_factors: per-conductor multiplier on the core panel size.
        mirror_pairs: target name -> source name for conductors that are
            the reflection of another across y = 0; their mesh is reflected
            instead of rebuilt.
        hole_graded: conductors graded only along their holes.
        refinement_level: recorded on the mesh.

    Raises:
        MeshingError: degenerate polygon or non-positive sizes.
    """
    if target_panel_size <= 0 or edge_band_size < 0 or growth < 1:
        raise MeshingError(
            f"invalid mesh sizes: target {target_panel_size}, band {edge_band_size}, growth {growth}"
        )
    coarse_factors = coarse_factors or {}
    mirror_pairs = mirror_pairs or {}

    names = tuple(name for name, _ in conductors)
    by_name: dict[str, tuple[list, list, list, list]] = {}
    for name, polygon in conductors:
        if polygon.is_empty or not polygon.is_valid or polygon.area <= 0:
            raise MeshingError(f"conductor '{name}' is degenerate")

        source = mirror_pairs.get(name)
        if source in by_name:
            src_polygon = dict(conductors)[source]
            if mirror_y(src_polygon).symmetric_difference(polygon).area < 1e-9 * polygon.area:
                panels, rings, lows, highs = by_name[source]
                reflected = list(shapely.transform(np.array(panels, dtype=object), lambda c: c * [1.0, -1.0]))
                by_name[name] = (reflected, rings, lows, highs)
                continue
            logger.warning("Conductor '%s' is not the mirror image of '%s'; meshing it separately", name, source)

        factor = coarse_factors.get(name, 1.0)
        by_name[name] = _mesh_polygon(
            polygon, target_panel_size * factor, edge_band_size, growth, from_holes=name in hole_graded
        )

    panels, ids, rings, lows, highs = [], [], [], [], []
    for k, name in enumerate(names):
        p, r, lo, hi = by_name[name]
        if not p:
            raise MeshingError(f"conductor '{name}' produced no panels")
        panels += p
        ids += [k] * len(p)
        rings += r
        lows += lo
        highs += hi

    mesh = PanelMesh(
        panels=np.array(panels, dtype=object),
        conductor_ids=np.array(ids, dtype=int),
        conductor_names=names,
        ring=np.array(rings, dtype=int),
        d_lo=np.array(lows, dtype=float),
        d_hi=np.array(highs, dtype=float),
        band=edge_band_size,
        refinement_level=refinement_level,
    )
    logger.debug("Mesh: %s", mesh.summary())
    return mesh


def level_sizes(config: SolverSettings, level: int, wire: bool = False) -> tuple[float, float]:
    """Target panel size and edge band at a refinement level (halved per level)."""
    if level < 0:
        raise ConfigError(f"mesh level must be >= 0, got {level}")
    target = config.wire_target_panel_size if wire else config.target_panel_size
    band = config.wire_edge_band_size if wire else config.edge_band_size
    return target / 2**level, band / 2**level


def mesh_layout(
    layout: PadLayout,
    config: SolverSettings | None = None,
    level: int | None = None,
) -> PanelMesh:
    """Mesh a pad layout.

    The ground frame core is coarser by ground_panel_factor and is graded only
    along its inner edge.
    """
    config = config or settings.solver
    level = config.mesh_level if level is None else level
    target, band = level_sizes(config, level)
    if band > settings.participation.x0 / 4:
        logger.warning(
            "Edge band %.3g µm is wider than x0/4 = %.3g µm; the accurate band is under-resolved",
            band,
            settings.participation.x0 / 4,
        )
    return mesh_conductors(
        layout.conductors(),
        target,
        band,
        growth=config.growth,
        coarse_factors={"ground": config.ground_panel_factor},
        mirror_pairs={"pad2": "pad1"} if layout.mirror_pair else None,
        hole_graded=("ground",),
        refinement_level=level,
    )


def dump_mesh(mesh: PanelMesh, path: Path) -> Path:
    """Write the panel list as JSON."""
    doc = {
        "version": 1,
        "conductor_names": list(mesh.conductor_names),
        "band": mesh.band,
        "refinement_level": mesh.refinement_level,
        "panels": [
            {
                "conductor_id": int(mesh.conductor_ids[i]),
                "ring": int(mesh.ring[i]),
                "d_lo": float(mesh.d_lo[i]),
                "d_hi": None if np.isinf(mesh.d_hi[i]) else float(mesh.d_hi[i]),
                "centroid": mesh.centroids[i].tolist(),
                "area": float(mesh.areas[i]),
                "exterior": np.asarray(p.exterior.coords).tolist(),
                "holes": [np.asarray(r.coords).tolist() for r in p.interiors],
            }
            for i, p in enumerate(mesh.panels)
        ],
    }
    path.write_text(json.dumps(doc))
    return path


def load_mesh(path: Path) -> PanelMesh:
    """Read a mesh written by dump_mesh."""
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != 1:
        raise ConfigError(f"unsupported mesh file version {doc.get('version')}")
    panels = doc["panels"]
    return PanelMesh(
        panels=np.array([Polygon(p["exterior"], p["holes"] or None) for p in panels], dtype=object),
        conductor_ids=np.array([p["conductor_id"] for p in panels], dtype=int),
        conductor_names=tuple(doc["conductor_names"]),
        ring=np.array([p["ring"] for p in panels], dtype=int),
        d_lo=np.array([p["d_lo"] for p in panels], dtype=float),
        d_hi=np.array([np.inf if p["d_hi"] is None else p["d_hi"] for p in panels], dtype=float),
        band=doc["band"],
        refinement_level=doc["refinement_level"],
    )
