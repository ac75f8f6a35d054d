"""Cross-section of a thin metal edge, for the edge scaling factors F_i.

A semi-infinite film (thickness T, at 1 V) lies on a substrate half-plane
inside a grounded box. The 2D Laplace equation with piecewise permittivity
is discretized by finite volumes on a tensor grid graded towards the film
corners and solved with a sparse direct solver. Lineal energies of the MS,
MA and SA layers are integrated over bands of lateral distance from the
edge: accurate [x0/2, x0] and diverging [t_i, x0/2].
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np
from scipy import sparse
from scipy.constants import epsilon_0
from scipy.integrate import trapezoid
from scipy.sparse.linalg import spsolve

from ..core.config import EdgeSettings, settings
from ..core.errors import ConfigError, SolverError

if TYPE_CHECKING:
    from ..participation.materials import MaterialStack

logger = logging.getLogger(__name__)

UM = 1e-6
NM = 1e-9


@dataclass(frozen=True, eq=False)
class EdgeProblemSolution:
    """Per-layer lineal energies (J/m at 1 V) and their ratio F = diverging/accurate."""

    film_thickness: float
    x0: float
    energy_accurate: dict[str, float]
    energy_diverging: dict[str, float]
    factors: dict[str, float]
    grid_shape: tuple[int, int]

    def factor(self, layer: str) -> float:
        return self.factors[layer]


def graded_axis(
    lo: float, hi: float, anchors: list[float], h_min: float, growth: float, h_max: float
) -> np.ndarray:
    """Grid lines on [lo, hi], spacing h_min at each anchor growing by `growth`."""
    anchors = sorted(a for a in anchors if lo < a < hi)
    stops = [lo, *anchors, hi]
    marks = np.array(anchors) if anchors else np.array([0.5 * (lo + hi)])

    def spacing(x: float) -> float:
        return min(h_max, h_min + (growth - 1.0) * float(np.min(np.abs(marks - x))))

    points = [lo]
    for a, b in zip(stops[:-1], stops[1:]):
        x = a
        while True:
            h = spacing(x)
            if x + h >= b - 0.5 * spacing(b):
                points.append(b)
                break
            x += h
            points.append(x)
    return np.array(points)


def _assemble(x: np.ndarray, z: np.ndarray, eps_cell: np.ndarray, fixed: np.ndarray, values: np.ndarray):
    nx, nz = len(x), len(z)
    dx, dz = np.diff(x), np.diff(z)
    index = np.full((nx, nz), -1)
    free = ~fixed
    index[free] = np.arange(free.sum())

    # East couplings between (i, j) and (i+1, j); north between (i, j) and (i, j+1).
    pad_z = np.zeros((nx - 1, nz + 1))
    pad_z[:, 1:-1] = eps_cell * dz[None, :] / 2
    c_east = (pad_z[:, :-1] + pad_z[:, 1:]) / dx[:, None]
    pad_x = np.zeros((nx + 1, nz - 1))
    pad_x[1:-1, :] = eps_cell * dx[:, None] / 2
    c_north = (pad_x[:-1, :] + pad_x[1:, :]) / dz[None, :]

    rows, cols, data = [], [], []
    rhs = np.zeros(free.sum())
    diag = np.zeros(free.sum())

    def couple(p_idx, q_idx, p_val, q_val, c):
        for a_idx, b_idx, b_val in ((p_idx, q_idx, q_val), (q_idx, p_idx, p_val)):
            active = a_idx >= 0
            np.add.at(diag, a_idx[active], c[active])
            both = active & (b_idx >= 0)
            rows.append(a_idx[both])
            cols.append(b_idx[both])
            data.append(-c[both])
            dirichlet = active & (b_idx < 0)
            np.add.at(rhs, a_idx[dirichlet], c[dirichlet] * b_val[dirichlet])

    couple(index[:-1, :].ravel(), index[1:, :].ravel(), values[:-1, :].ravel(), values[1:, :].ravel(), c_east.ravel())
    couple(index[:, :-1].ravel(), index[:, 1:].ravel(), values[:, :-1].ravel(), values[:, 1:].ravel(), c_north.ravel())

    n = free.sum()
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    data.append(diag)
    matrix = sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return matrix, rhs, index


def _band_integral(d: np.ndarray, f: np.ndarray, lo: float, hi: float) -> float:
    order = np.argsort(d)
    d, f = d[order], f[order]
    inside = (d > lo) & (d < hi)
    dd = np.concatenate([[lo], d[inside], [hi]])
    return float(trapezoid(np.interp(dd, d, f), dd))


@lru_cache(maxsize=32)
def _solve_edge(
    film_thickness: float,
    x0: float,
    layers: tuple[tuple[str, float, float], ...],
    eps_substrate: float,
    min_spacing: float,
    growth: float,
    domain_size: float,
    mirrored: bool,
) -> EdgeProblemSolution:
    T, D = film_thickness, domain_size
    h_max = max(D / 25, min_spacing)
    x = graded_axis(-D, D, [0.0], min_spacing, growth, h_max)
    if mirrored:
        x = -x[::-1]
    z = graded_axis(-D, D, [0.0, T], min_spacing, growth, h_max)

    side = 1.0 if mirrored else -1.0  # metal where side * x > 0
    X, Z = np.meshgrid(x, z, indexing="ij")
    tol = 1e-12 * D
    film = (side * X >= -tol) & (Z >= -tol) & (Z <= T + tol)
    boundary = np.zeros_like(film)
    boundary[[0, -1], :] = True
    boundary[:, [0, -1]] = True
    fixed = film | boundary
    values = np.where(film, 1.0, 0.0)

    zc = 0.5 * (z[:-1] + z[1:])
    eps_cell = np.broadcast_to(np.where(zc < 0, eps_substrate, 1.0), (len(x) - 1, len(zc)))

    matrix, rhs, index = _assemble(x, z, eps_cell, fixed, values)
    phi = values.copy()
    phi[index >= 0] = spsolve(matrix.tocsc(), rhs)
    if not np.all(np.isfinite(phi)):
        raise SolverError("edge problem produced non-finite potentials")

    j0 = int(np.argmin(np.abs(z)))
    jT = int(np.argmin(np.abs(z - T)))
    dz_below = (z[j0] - z[j0 - 1]) * UM
    dz_above = (z[jT + 1] - z[jT]) * UM
    dist = np.abs(x)

    metal = side * x > tol
    bare = (side * x < -tol) & (np.arange(len(x)) > 0) & (np.arange(len(x)) < len(x) - 1)

    ez_sub = (phi[:, j0] - phi[:, j0 - 1]) / dz_below
    ez_air = (phi[:, jT] - phi[:, jT + 1]) / dz_above
    ex = np.zeros(len(x))
    ex[1:-1] = -(phi[2:, j0] - phi[:-2, j0]) / ((x[2:] - x[:-2]) * UM)

    accurate, diverging, factors = {}, {}, {}
    for name, eps_layer, t_nm in layers:
        cutoff = t_nm * NM / UM
        if cutoff >= 0.5 * x0:
            raise ConfigError(f"{name} thickness {t_nm} nm is not below x0/2 = {0.5 * x0} µm")

        if name == "MS":
            d, e2 = dist[metal], (eps_substrate / eps_layer * ez_sub[metal]) ** 2
        elif name == "MA":
            # top face only; the side wall is at lateral distance 0, below the cutoff
            d, e2 = dist[metal], (ez_air[metal] / eps_layer) ** 2
        else:
            d, e2 = dist[bare], ex[bare] ** 2 + (eps_substrate / eps_layer * ez_sub[bare]) ** 2

        prefactor = 0.5 * epsilon_0 * eps_layer * t_nm * NM * UM
        u_acc = prefactor * _band_integral(d, e2, 0.5 * x0, x0)
        u_div = prefactor * _band_integral(d, e2, cutoff, 0.5 * x0)
        if u_acc <= 0:
            raise SolverError(f"no {name} energy in the accurate band")
        accurate[name], diverging[name], factors[name] = u_acc, u_div, u_div / u_acc

    logger.debug(
        "Edge problem on %dx%d grid: F = %s",
        len(x),
        len(z),
        {k: round(v, 4) for k, v in factors.items()},
    )
    return EdgeProblemSolution(
        film_thickness=T,
        x0=x0,
        energy_accurate=accurate,
        energy_diverging=diverging,
        factors=factors,
        grid_shape=(len(x), len(z)),
    )


def solve_edge_problem(
    film_thickness: float,
    x0: float,
    layers: "MaterialStack",
    config: EdgeSettings | None = None,
    mirrored: bool = False,
) -> EdgeProblemSolution:
    """Scaling factors F_i for every layer of a stack (cached per input).

    Raises:
        ConfigError: non-positive sizes, or a grid too coarse for the
            thinnest layer (minimum spacing above half its thickness).
    """
    config = config or settings.edge
    if film_thickness <= 0 or x0 <= 0:
        raise ConfigError(f"film thickness and x0 must be positive ({film_thickness}, {x0})")
    if config.domain_size <= 4 * x0:
        raise ConfigError(f"edge domain {config.domain_size} µm is too small for x0 = {x0} µm")

    thinnest = min(layer.thickness_nm for layer in layers.layers) * NM / UM
    if config.min_spacing > thinnest / 2:
        raise ConfigError(
            f"edge grid spacing {config.min_spacing} µm cannot resolve the {thinnest} µm cutoff"
        )

    key = tuple((layer.name, layer.eps_r, layer.thickness_nm) for layer in layers.layers)
    return _solve_edge(
        float(film_thickness),
        float(x0),
        key,
        float(layers.eps_substrate),
        config.min_spacing,
        config.growth,
        config.domain_size,
        mirrored,
    )
