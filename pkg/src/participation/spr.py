"""Surface participation ratios of the interface layers.

p_i = t_i eps_i eps0 / (2 W) * integral of |E_layer|² over the layer, with the
field inside each thin layer derived from the interface field:

    MS  (eps_sub / eps_MS) * E_normal, substrate side
    MA  E_normal / eps_MA, vacuum side
    SA  sqrt(E_t² + ((eps_sub / eps_SA) * E_normal)²)
"""

import logging
from collections.abc import Mapping

import numpy as np
from scipy.constants import epsilon_0
from scipy.integrate import trapezoid

from ..core.errors import OutOfModelError, UsageError
from ..geometry.wire import WireProfile
from ..solver.fields import FieldSamples
from .materials import MaterialLayer, MaterialStack
from .regions import PadRegions
from .report import LayerParticipation

logger = logging.getLogger(__name__)

UM = 1e-6
HALVING_TOLERANCE = 0.01
THICKNESS_CORRECTION = 5.0


def layer_field(
    e_normal: np.ndarray, e_tangential: np.ndarray, layer: MaterialLayer, eps_substrate: float
) -> np.ndarray:
    """|E| inside a thin interface layer, V/m."""
    if layer.name == "MS":
        return eps_substrate / layer.eps_r * np.asarray(e_normal)
    if layer.name == "MA":
        return np.asarray(e_normal) / layer.eps_r
    return np.hypot(e_tangential, eps_substrate / layer.eps_r * np.asarray(e_normal))


def surface_participation(
    samples: FieldSamples, layer: MaterialLayer, total_energy: float, eps_substrate: float
) -> float:
    """Participation of one layer over one sample region."""
    if total_energy <= 0:
        raise UsageError(f"total energy must be positive, got {total_energy}")
    if len(samples.region.weights) == 0:
        logger.warning("Region '%s' has no samples; %s participation is zero", samples.region.name, layer.name)
        return 0.0

    e_layer = layer_field(samples.e_normal, samples.e_tangential, layer, eps_substrate)
    integral = float(np.sum(samples.region.weights * UM**2 * e_layer**2))
    return layer.thickness_m * layer.eps_r * epsilon_0 * integral / (2.0 * total_energy)


def apply_edge_scaling(p_accurate: float, factor: float) -> tuple[float, float]:
    """(diverging, perimeter) from the accurate band and F = U_div / U_acc."""
    if p_accurate < 0 or factor < 0:
        raise UsageError(f"negative participation {p_accurate} or scaling factor {factor}")
    diverging = factor * p_accurate
    return diverging, p_accurate + diverging


def pad_participation(
    fields: Mapping[str, FieldSamples],
    regions: PadRegions,
    stack: MaterialStack,
    total_energy: float,
    factors: Mapping[str, float],
) -> dict[str, LayerParticipation]:
    """Interior, accurate and diverging participation of every layer."""
    out = {}
    for layer in stack.layers:
        interior_region, accurate_region = regions.for_layer(layer.name)
        interior = surface_participation(
            fields[interior_region.name], layer, total_energy, stack.eps_substrate
        )
        accurate = surface_participation(
            fields[accurate_region.name], layer, total_energy, stack.eps_substrate
        )
        diverging, _ = apply_edge_scaling(accurate, factors[layer.name])
        out[layer.name] = LayerParticipation(
            interior=interior, accurate=accurate, diverging=diverging
        )
    return out


def _wire_energy(y_um: np.ndarray, e_layer: np.ndarray, r_um: np.ndarray, layer: MaterialLayer) -> float:
    t = layer.thickness_m
    r = r_um * UM
    integrand = e_layer**2 * r * (np.log(4.0 * r / t) + THICKNESS_CORRECTION)
    return layer.thickness_m * layer.eps_r * epsilon_0 * float(trapezoid(integrand, y_um * UM))


def wire_participation(
    profile: WireProfile,
    y: np.ndarray,
    e: np.ndarray,
    layer: MaterialLayer,
    total_energy: float,
    eps_substrate: float,
    check_halving: bool = True,
) -> float:
    """Participation of both junction wires in the flat-coax model.

    `e` is the on-metal normal field along the upper wire's centerline.

    Raises:
        OutOfModelError: half width at or below a quarter of the layer
            thickness, where the model's logarithm turns non-positive.
    """
    if layer.name == "SA":
        raise UsageError("the wire model has no substrate-air term")
    if total_energy <= 0:
        raise UsageError(f"total energy must be positive, got {total_energy}")

    y = np.asarray(y, dtype=float)
    r = profile.r(y)
    if np.any(r * UM <= layer.thickness_m / 4):
        raise OutOfModelError(
            f"wire half width {float(r.min()):.4f} µm is within t/4 of the {layer.name} layer"
        )

    e_layer = layer_field(e, np.zeros_like(e), layer, eps_substrate)
    energy = _wire_energy(y, e_layer, r, layer)
    p = 2.0 * energy / total_energy

    if check_halving and len(y) >= 5 and len(y) % 2 == 1:
        coarse = 2.0 * _wire_energy(y[::2], e_layer[::2], r[::2], layer) / total_energy
        if p > 0 and abs(coarse - p) / p > HALVING_TOLERANCE:
            logger.warning(
                "Wire %s participation changes by %.2f%% on halving the samples",
                layer.name,
                100 * abs(coarse - p) / p,
            )
    return p


def wire_layers(
    profile: WireProfile,
    y: np.ndarray,
    e: np.ndarray,
    stack: MaterialStack,
    total_energy: float,
) -> dict[str, LayerParticipation]:
    """MS and MA wire terms; the wire carries no SA term."""
    out = {}
    for layer in stack.layers:
        wire = 0.0
        if layer.name != "SA":
            wire = wire_participation(profile, y, e, layer, total_energy, stack.eps_substrate)
        out[layer.name] = LayerParticipation(wire=wire)
    return out
