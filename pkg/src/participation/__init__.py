"""Surface participation, edge scaling, Q_TLS and transmon energies."""

from .materials import MaterialLayer, MaterialStack, get_material_stack, list_material_presets
from .regions import PadRegions, build_pad_regions
from .report import LayerParticipation, ParticipationReport, compose, q_tls, t1_from_q
from .spr import (
    apply_edge_scaling,
    layer_field,
    pad_participation,
    surface_participation,
    wire_layers,
    wire_participation,
)
from .transmon import (
    TransmonParams,
    ec_from_capacitance,
    ec_from_frequency,
    ej_from_inductance,
    f01_from_energies,
    penalty,
    transmon_params,
)

__all__ = [
    "LayerParticipation",
    "MaterialLayer",
    "MaterialStack",
    "PadRegions",
    "ParticipationReport",
    "TransmonParams",
    "apply_edge_scaling",
    "build_pad_regions",
    "compose",
    "ec_from_capacitance",
    "ec_from_frequency",
    "ej_from_inductance",
    "f01_from_energies",
    "get_material_stack",
    "layer_field",
    "list_material_presets",
    "pad_participation",
    "penalty",
    "q_tls",
    "surface_participation",
    "t1_from_q",
    "transmon_params",
    "wire_layers",
    "wire_participation",
]
