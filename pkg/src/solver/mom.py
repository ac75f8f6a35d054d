"""Collocation method of moments for conductors on a dielectric half-space.

Charges sit on the vacuum/substrate interface, where the Green's function
is 1/(4 pi eps0 eps_eff |r - r'|) with eps_eff = (1 + eps_substrate)/2.
One LU factorization per mesh serves every excitation.
"""

import logging
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.constants import epsilon_0
from scipy.linalg import lu_factor, lu_solve
from scipy.spatial import cKDTree

from ..core.config import settings
from ..core.errors import ConfigError, SolverError, UsageError
from .kernels import potential_matrix
from .mesh import PanelMesh

logger = logging.getLogger(__name__)

UM = 1e-6
MAX_PANELS = 20000
ASYMMETRY_WARNING = 0.01


@dataclass(frozen=True)
class HalfSpaceDielectric:
    """Vacuum above z = 0, substrate of relative permittivity eps_substrate below."""

    eps_substrate: float = 11.7

    def __post_init__(self):
        if not self.eps_substrate >= 1:
            raise ConfigError(f"eps_substrate must be >= 1, got {self.eps_substrate}")

    @property
    def eps_eff(self) -> float:
        return (1.0 + self.eps_substrate) / 2.0

    @property
    def kernel_constant(self) -> float:
        """1/(4 pi eps0 eps_eff), V m / C."""
        return 1.0 / (4.0 * np.pi * epsilon_0 * self.eps_eff)

    def normal_field(self, sigma: np.ndarray) -> np.ndarray:
        """|E| just above and just below an interface charge sigma, V/m."""
        return np.abs(sigma) / (epsilon_0 * (1.0 + self.eps_substrate))


@dataclass(frozen=True, eq=False)
class ChargeSolution:
    """Panel charge densities for one excitation.

    sigma in C/m², potentials in V per conductor, charges in C per conductor,
    total_energy W = ½ Σ Q_k V_k in J.
    """

    mesh: PanelMesh
    dielectric: HalfSpaceDielectric
    sigma: np.ndarray
    potentials: np.ndarray
    charges: np.ndarray
    total_energy: float
    near_factor: float = 2.0

    @property
    def panel_charges(self) -> np.ndarray:
        return self.sigma * self.mesh.areas * UM**2

    def potential_at(self, points: np.ndarray) -> np.ndarray:
        """Potential in V at in-plane points, from the solved charges."""
        matrix = potential_matrix(self.mesh, np.atleast_2d(points), self.near_factor)
        return self.dielectric.kernel_constant * UM * (matrix @ self.sigma)


@dataclass(frozen=True, eq=False)
class CapacitanceMatrix:
    """Maxwell capacitance matrix in F, symmetrized."""

    C: np.ndarray
    conductor_names: tuple[str, ...]
    asymmetry: float

    def index(self, name: str) -> int:
        if name not in self.conductor_names:
            raise UsageError(f"no conductor '{name}' in {list(self.conductor_names)}")
        return self.conductor_names.index(name)

    def energy(self, potentials: np.ndarray) -> float:
        v = np.asarray(potentials, dtype=float)
        return 0.5 * float(v @ self.C @ v)


class MomSystem:
    """Assembled and LU-factorized collocation system of one mesh."""

    def __init__(
        self,
        mesh: PanelMesh,
        dielectric: HalfSpaceDielectric,
        near_factor: float | None = None,
        pivot_tolerance: float | None = None,
    ):
        self.mesh = mesh
        self.dielectric = dielectric
        self.near_factor = settings.solver.near_field_factor if near_factor is None else near_factor
        pivot_tolerance = settings.solver.pivot_tolerance if pivot_tolerance is None else pivot_tolerance

        if mesh.n_panels > MAX_PANELS:
            raise SolverError(f"{mesh.n_panels} panels exceed the dense solver limit of {MAX_PANELS}")
        _check_duplicates(mesh)

        start = time.perf_counter()
        matrix = dielectric.kernel_constant * UM * potential_matrix(mesh, mesh.centroids, self.near_factor)
        if not np.all(np.isfinite(matrix)):
            raise SolverError("system matrix has non-finite entries")

        self._lu = lu_factor(matrix, check_finite=False)
        pivots = np.abs(np.diag(self._lu[0]))
        ratio = pivots.min() / pivots.max()
        if ratio < pivot_tolerance:
            raise SolverError(
                f"system is ill-conditioned: pivot ratio {ratio:.2e} below {pivot_tolerance:.0e} "
                f"({mesh.n_panels} panels)"
            )
        logger.debug(
            "Factorized %d panels in %.2fs (pivot ratio %.2e)",
            mesh.n_panels,
            time.perf_counter() - start,
            ratio,
        )

    def _potential_vector(self, potentials) -> np.ndarray:
        names = self.mesh.conductor_names
        if isinstance(potentials, Mapping):
            unknown = set(potentials) - set(names)
            if unknown:
                raise UsageError(f"unknown conductors {sorted(unknown)}; mesh has {list(names)}")
            values = np.array([float(potentials.get(name, 0.0)) for name in names])
        else:
            values = np.asarray(potentials, dtype=float)
            if values.shape != (len(names),):
                raise UsageError(f"expected {len(names)} potentials, got {values.shape}")
        return values

    def solve(self, potentials: Mapping[str, float] | Sequence[float]) -> ChargeSolution:
        v = self._potential_vector(potentials)
        rhs = v[self.mesh.conductor_ids]
        sigma = lu_solve(self._lu, rhs, check_finite=False)

        q_panel = sigma * self.mesh.areas * UM**2
        charges = np.bincount(self.mesh.conductor_ids, weights=q_panel, minlength=len(v))
        return ChargeSolution(
            mesh=self.mesh,
            dielectric=self.dielectric,
            sigma=sigma,
            potentials=v,
            charges=charges,
            total_energy=0.5 * float(charges @ v),
            near_factor=self.near_factor,
        )

    def capacitance(self) -> CapacitanceMatrix:
        n = self.mesh.n_conductors
        raw = np.column_stack([self.solve(np.eye(n)[k]).charges for k in range(n)])
        scale = np.max(np.abs(raw))
        asymmetry = float(np.max(np.abs(raw - raw.T)) / scale) if scale > 0 else 0.0
        if asymmetry > ASYMMETRY_WARNING:
            logger.warning("Capacitance matrix asymmetry %.2f%% before symmetrization", 100 * asymmetry)
        return CapacitanceMatrix(
            C=0.5 * (raw + raw.T),
            conductor_names=self.mesh.conductor_names,
            asymmetry=asymmetry,
        )


def _check_duplicates(mesh: PanelMesh) -> None:
    tree = cKDTree(mesh.centroids)
    pairs = tree.query_pairs(r=1e-9 * max(float(mesh.diameters.max()), 1e-12), output_type="ndarray")
    if len(pairs):
        i, j = pairs[0]
        raise SolverError(
            f"{len(pairs)} duplicate panels (e.g. {i} and {j} at {mesh.centroids[i].tolist()}); "
            "the system would be singular"
        )


def solve_charges(
    mesh: PanelMesh,
    dielectric: HalfSpaceDielectric,
    conductor_potentials: Mapping[str, float] | Sequence[float],
    system: MomSystem | None = None,
) -> ChargeSolution:
    """Charge densities for fixed conductor potentials."""
    system = system or MomSystem(mesh, dielectric)
    return system.solve(conductor_potentials)


def capacitance_matrix(
    mesh: PanelMesh,
    dielectric: HalfSpaceDielectric,
    conductor_ids: Sequence[str] | None = None,
    system: MomSystem | None = None,
) -> CapacitanceMatrix:
    """Maxwell capacitance matrix, one unit excitation per column.

    `conductor_ids` selects and orders a subset of the rows/columns.
    """
    system = system or MomSystem(mesh, dielectric)
    full = system.capacitance()
    if conductor_ids is None:
        return full
    idx = [full.index(name) for name in conductor_ids]
    return CapacitanceMatrix(
        C=full.C[np.ix_(idx, idx)],
        conductor_names=tuple(conductor_ids),
        asymmetry=full.asymmetry,
    )
