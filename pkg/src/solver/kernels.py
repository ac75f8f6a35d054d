"""Closed-form in-plane integrals over uniformly charged polygon panels.

For a point p in the panel plane and a polygon with outward edge normals
n_e, the integral of 1/|r - p| over the polygon is

    sum_e h_e * (asinh(s_B / |h_e|) - asinh(s_A / |h_e|))

with h_e = (A - p) . n_e and s the coordinate of the edge ends along the
edge direction measured from the foot of the perpendicular. The in-plane
gradient follows from the divergence theorem and gives the field sum
n_e * (asinh(s_B / |h_e|) - asinh(s_A / |h_e|)). All lengths in µm.
"""

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from .mesh import PanelMesh

_H_FLOOR = 1e-12


def _edge_frames(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = b - a
    length = np.linalg.norm(d, axis=-1, keepdims=True)
    u = d / length
    n = np.stack([u[..., 1], -u[..., 0]], axis=-1)
    return u, n, length[..., 0]


def _edge_terms(points: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Per (point, edge) pair: signed distance h, outward normal, asinh difference."""
    u, n, _ = _edge_frames(a, b)
    h = np.einsum("...i,...i->...", a - points, n)
    s_a = np.einsum("...i,...i->...", a - points, u)
    s_b = np.einsum("...i,...i->...", b - points, u)
    habs = np.maximum(np.abs(h), _H_FLOOR)
    return h, n, np.arcsinh(s_b / habs) - np.arcsinh(s_a / habs)


def _expand_pairs(mesh: PanelMesh, targets: np.ndarray, sources: np.ndarray):
    """Edge-level index arrays for a list of (target point, source panel) pairs."""
    counts = np.diff(mesh.edge_offsets)[sources]
    pair = np.repeat(np.arange(len(sources)), counts)
    first = np.repeat(mesh.edge_offsets[sources], counts)
    within = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    return pair, first + within


def near_pairs(mesh: PanelMesh, points: np.ndarray, near_factor: float) -> tuple[np.ndarray, np.ndarray]:
    """(point, panel) pairs closer than near_factor panel diameters."""
    tree = cKDTree(points)
    hits = tree.query_ball_point(mesh.centroids, r=near_factor * mesh.diameters)
    sources = np.repeat(np.arange(mesh.n_panels), [len(h) for h in hits])
    targets = np.fromiter((i for h in hits for i in h), dtype=int, count=len(sources))
    return targets, sources


def potential_matrix(mesh: PanelMesh, points: np.ndarray, near_factor: float) -> np.ndarray:
    """M[i, j] = integral of 1/|r - p_i| over panel j, µm.

    Far pairs use the centroid approximation area / distance.
    """
    dist = cdist(points, mesh.centroids)
    with np.errstate(divide="ignore"):
        matrix = mesh.areas[None, :] / dist

    targets, sources = near_pairs(mesh, points, near_factor)
    pair, edges = _expand_pairs(mesh, targets, sources)
    h, _, arc = _edge_terms(points[targets[pair]], mesh.edge_a[edges], mesh.edge_b[edges])
    exact = np.bincount(pair, weights=h * arc, minlength=len(targets))
    matrix[targets, sources] = exact
    return matrix


def field_matrices(
    mesh: PanelMesh, points: np.ndarray, near_factor: float
) -> tuple[np.ndarray, np.ndarray]:
    """Gx, Gy with in-plane field at p_i = k * sum_j G[i, j] * sigma_j.

    Dimensionless; multiply by the kernel constant 1/(4 pi eps0 eps_eff).
    """
    diff = points[:, None, :] - mesh.centroids[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = mesh.areas[None, :] / dist**3
    gx = diff[..., 0] * scale
    gy = diff[..., 1] * scale

    targets, sources = near_pairs(mesh, points, near_factor)
    pair, edges = _expand_pairs(mesh, targets, sources)
    _, n, arc = _edge_terms(points[targets[pair]], mesh.edge_a[edges], mesh.edge_b[edges])
    gx[targets, sources] = np.bincount(pair, weights=n[:, 0] * arc, minlength=len(targets))
    gy[targets, sources] = np.bincount(pair, weights=n[:, 1] * arc, minlength=len(targets))
    return gx, gy


def on_edge(mesh: PanelMesh, points: np.ndarray, near_factor: float, tol: float = 1e-9) -> np.ndarray:
    """Index of a panel whose edge passes through each point, -1 if none."""
    hit = np.full(len(points), -1)
    targets, sources = near_pairs(mesh, points, near_factor)
    pair, edges = _expand_pairs(mesh, targets, sources)
    if len(pair) == 0:
        return hit
    p = points[targets[pair]]
    a, b = mesh.edge_a[edges], mesh.edge_b[edges]
    u, n, length = _edge_frames(a, b)
    h = np.einsum("ij,ij->i", a - p, n)
    s = np.einsum("ij,ij->i", p - a, u)
    touching = (np.abs(h) <= tol * mesh.diameters[sources[pair]]) & (s >= 0) & (s <= length)
    hit[targets[pair[touching]]] = sources[pair[touching]]
    return hit
