"""Transmon energies. All energies are frequencies E/h in GHz."""

import logging
import math

from pydantic import BaseModel, computed_field
from scipy.constants import e, h, physical_constants

from ..core.errors import GeometryError, NoSolutionError, SolverError, UsageError
from ..solver.mom import CapacitanceMatrix

logger = logging.getLogger(__name__)

PHI0 = physical_constants["mag. flux quantum"][0]
GHZ = 1e9
TRANSMON_RATIO = 20.0


class TransmonParams(BaseModel):
    """Junction and charging energies of one design."""

    ej_ghz: float
    ec_ghz: float
    inductance_nh: float
    capacitance_ff: float | None = None

    @computed_field
    @property
    def f01_ghz(self) -> float:
        return f01_from_energies(self.ej_ghz, self.ec_ghz)

    @computed_field
    @property
    def anharmonicity_ghz(self) -> float:
        return -self.ec_ghz

    @computed_field
    @property
    def ej_ec_ratio(self) -> float:
        return self.ej_ghz / self.ec_ghz


def ej_from_inductance(inductance_nh: float) -> float:
    """E_J/h = (Phi0 / 2 pi)² / L_J."""
    if inductance_nh <= 0:
        raise UsageError(f"junction inductance must be positive, got {inductance_nh} nH")
    return (PHI0 / (2 * math.pi)) ** 2 / (inductance_nh * 1e-9) / h / GHZ


def f01_from_energies(ej_ghz: float, ec_ghz: float) -> float:
    return math.sqrt(8 * ej_ghz * ec_ghz) - ec_ghz


def ec_from_frequency(f01_ghz: float, ej_ghz: float) -> float:
    """Charging energy giving f01 for a junction energy, transmon branch.

    Solves E_C² + (2 f01 - 8 E_J) E_C + f01² = 0 for its smaller root.

    Raises:
        NoSolutionError: f01 is out of reach for this E_J.
    """
    if f01_ghz <= 0 or ej_ghz <= 0:
        raise UsageError(f"f01 and E_J must be positive, got {f01_ghz}, {ej_ghz}")

    b = 2 * f01_ghz - 8 * ej_ghz
    disc = b * b - 4 * f01_ghz**2
    if disc < 0 or b >= 0:
        raise NoSolutionError(f"no transmon solution for f01 = {f01_ghz} GHz with E_J = {ej_ghz} GHz")

    # Product of the roots is f01², so the small root avoids cancellation.
    ec = 2 * f01_ghz**2 / (-b + math.sqrt(disc))
    back = f01_from_energies(ej_ghz, ec)
    if abs(back - f01_ghz) > 1e-9 * f01_ghz:
        raise SolverError(f"E_C back-substitution gives f01 = {back} GHz instead of {f01_ghz} GHz")
    return ec


def shunt_capacitance(
    C: CapacitanceMatrix,
    pads: tuple[str, str] = ("pad1", "pad2"),
    junction_shunt_ff: float = 0.0,
) -> float:
    """C12 + C1g C2g / (C1g + C2g) + junction shunt, in F.

    Raises:
        GeometryError: non-positive result.
    """
    i, j = C.index(pads[0]), C.index(pads[1])
    c12 = -C.C[i, j]
    c1g = C.C[i, i] - c12
    c2g = C.C[j, j] - c12
    series = c1g * c2g / (c1g + c2g) if c1g + c2g != 0 else 0.0
    cq = c12 + series + junction_shunt_ff * 1e-15
    if cq <= 0:
        raise GeometryError(f"non-positive shunt capacitance {cq:.3e} F")
    return cq


def ec_from_capacitance(
    C: CapacitanceMatrix,
    pads: tuple[str, str] = ("pad1", "pad2"),
    junction_shunt_ff: float = 0.0,
) -> float:
    """E_C/h = e² / (2 C_q) / h of the floating pad pair."""
    cq = shunt_capacitance(C, pads, junction_shunt_ff)
    return e**2 / (2 * cq) / h / GHZ


def penalty(ec_ghz: float, beta: float, threshold_ghz: float = 0.35) -> float:
    """beta * max(0, E_C - threshold)²."""
    return beta * max(0.0, ec_ghz - threshold_ghz) ** 2


def transmon_params(
    inductance_nh: float, ec_ghz: float, capacitance_ff: float | None = None
) -> TransmonParams:
    params = TransmonParams(
        ej_ghz=ej_from_inductance(inductance_nh),
        ec_ghz=ec_ghz,
        inductance_nh=inductance_nh,
        capacitance_ff=capacitance_ff,
    )
    if params.ej_ec_ratio < TRANSMON_RATIO:
        logger.warning(
            "E_J/E_C = %.1f is below %.0f; outside the transmon regime",
            params.ej_ec_ratio,
            TRANSMON_RATIO,
        )
    return params
