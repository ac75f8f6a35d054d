"""Geometry to participation: the solves behind every command.

A pad evaluation meshes the layout once, factorizes once, and reuses the
factorization for the capacitance columns and the differential drive
(pad1 at +0.5 V, pad2 at -0.5 V, ground at 0 V).
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from ..core.errors import ConfigError, UsageError
from ..core.run import Run, RunConfig
from ..geometry import (
    PadDesignVector,
    PadLayout,
    WireDesignVector,
    WireProfile,
    build_pad_outline,
    build_wire_profile,
    geometry_hash,
    load_geometry,
    make_baseline,
)
from ..optimizer import ObjectiveResult
from ..participation import (
    MaterialStack,
    ParticipationReport,
    build_pad_regions,
    ec_from_capacitance,
    get_material_stack,
    pad_participation,
    surface_participation,
    transmon_params,
    wire_layers,
    wire_participation,
)
from ..participation.regions import metal_regions
from ..participation.transmon import shunt_capacitance
from ..solver import (
    CapacitanceMatrix,
    ChargeSolution,
    HalfSpaceDielectric,
    MomSystem,
    PanelMesh,
    centerline_field,
    interface_fields,
    mesh_layout,
    solve_edge_problem,
)

logger = logging.getLogger(__name__)

DIFFERENTIAL = {"pad1": 0.5, "pad2": -0.5}
REFINEMENT_TOLERANCE = 0.01
WIRE_BASELINES = ("straight_wire", "linear_taper")


@dataclass(frozen=True, eq=False)
class PadSolve:
    """Mesh, capacitance and differential-mode charges of one layout."""

    layout: PadLayout
    mesh: PanelMesh
    capacitance: CapacitanceMatrix
    solution: ChargeSolution
    ec_ghz: float
    shunt_ff: float

    @property
    def total_energy(self) -> float:
        return self.solution.total_energy


def material_stack(config: RunConfig) -> MaterialStack:
    return get_material_stack(config.materials)


def solve_pad(
    layout: PadLayout,
    config: RunConfig,
    stack: MaterialStack,
    level: int | None = None,
) -> PadSolve:
    level = config.solver.mesh_level if level is None else level
    mesh = mesh_layout(layout, config.solver, level)
    system = MomSystem(
        mesh,
        HalfSpaceDielectric(stack.eps_substrate),
        near_factor=config.solver.near_field_factor,
        pivot_tolerance=config.solver.pivot_tolerance,
    )
    C = system.capacitance()
    shunt = config.transmon.junction_shunt_ff
    return PadSolve(
        layout=layout,
        mesh=mesh,
        capacitance=C,
        solution=system.solve(DIFFERENTIAL),
        ec_ghz=ec_from_capacitance(C, junction_shunt_ff=shunt),
        shunt_ff=shunt_capacitance(C, junction_shunt_ff=shunt) * 1e15,
    )


def interior_p_ms(pad: PadSolve, stack: MaterialStack, x0: float) -> float:
    """Metal-substrate participation of the pad interior (farther than x0 from any edge)."""
    interior, _ = metal_regions(pad.mesh, x0)
    fields = interface_fields(pad.solution, [interior])
    return surface_participation(
        fields[interior.name], stack.layer("MS"), pad.total_energy, stack.eps_substrate
    )


def pad_report(
    layout: PadLayout,
    config: RunConfig,
    stack: MaterialStack | None = None,
    level: int | None = None,
    pad: PadSolve | None = None,
) -> ParticipationReport:
    """Interior, accurate-band and edge-scaled participation of every layer."""
    stack = stack or material_stack(config)
    level = config.solver.mesh_level if level is None else level
    pad = pad or solve_pad(layout, config, stack, level)
    x0 = config.participation.x0

    regions = build_pad_regions(layout, pad.mesh, x0, config.solver)
    fields = interface_fields(pad.solution, regions.all())
    edge = solve_edge_problem(config.edge.film_thickness, x0, stack, config.edge)
    layers = pad_participation(fields, regions, stack, pad.total_energy, edge.factors)

    return ParticipationReport.build(
        layers,
        stack,
        config.transmon.f01_ghz,
        transmon_params(config.transmon.inductance_nh, pad.ec_ghz, pad.shunt_ff),
        geometry=layout.kind,
        geometry_hash=geometry_hash(layout),
        mesh_level=level,
        n_panels=pad.mesh.n_panels,
        total_energy_j=pad.total_energy,
        edge_factors=dict(edge.factors),
        wire_length_um=layout.wire_length,
    )


def reference_layout(config: RunConfig) -> PadLayout:
    """Pad whose energy normalizes wire-only participation."""
    if config.pad_run:
        run = Run.load(config.pad_run)
        path = run.path / "geometry.json"
        if not path.exists():
            raise ConfigError(f"pad run {run.id} has no geometry.json")
        layout = load_geometry(path)
    else:
        layout = make_baseline(config.reference_pad, config=config.geometry)
    if not isinstance(layout, PadLayout):
        raise ConfigError(f"reference geometry '{layout.kind}' is not a pad layout")
    return layout


def reference_energy(config: RunConfig, stack: MaterialStack) -> float:
    """W of the reference pad under the differential drive, J."""
    layout = reference_layout(config)
    pad = solve_pad(layout, config, stack)
    logger.info(
        "Reference pad '%s': W = %.4e J, E_C = %.1f MHz", layout.kind, pad.total_energy, 1e3 * pad.ec_ghz
    )
    return pad.total_energy


def wire_report(
    profile: WireProfile,
    config: RunConfig,
    total_energy: float,
    stack: MaterialStack | None = None,
    level: int | None = None,
) -> ParticipationReport:
    """MS and MA participation of the junction-wire pair."""
    stack = stack or material_stack(config)
    level = config.solver.mesh_level if level is None else level
    field = _centerline(profile, config, stack, level)
    layers = wire_layers(profile, field.y, field.e, stack, total_energy)
    return ParticipationReport.build(
        layers,
        stack,
        config.transmon.f01_ghz,
        geometry=profile.kind,
        geometry_hash=geometry_hash(profile),
        mesh_level=level,
        wire_length_um=profile.wire_length,
        total_energy_j=total_energy,
    )


def _centerline(profile: WireProfile, config: RunConfig, stack: MaterialStack, level: int):
    return centerline_field(
        profile,
        HalfSpaceDielectric(stack.eps_substrate),
        n_samples=config.participation.centerline_samples,
        level=level,
        geometry=config.geometry,
        solver=config.solver,
    )


def refinement_delta(coarse: ParticipationReport, fine: ParticipationReport) -> dict[str, float]:
    """Relative change of each layer's total between two mesh levels."""
    deltas = {}
    for name, layer in fine.layers.items():
        ref = layer.total
        deltas[name] = abs(coarse.layers[name].total - ref) / ref if ref > 0 else 0.0
    worst = max(deltas, key=deltas.get)
    if deltas[worst] > REFINEMENT_TOLERANCE:
        logger.warning(
            "%s participation changes by %.2f%% on mesh refinement", worst, 100 * deltas[worst]
        )
    return deltas


# ============================================================================
# Geometry sources
# ============================================================================


def resolve_geometry(source: str, config: RunConfig) -> PadLayout | WireProfile:
    """A geometry JSON file or `baseline:<kind>`.

    Wire baselines take the configured wire length and junction width.
    """
    if source.startswith("baseline:"):
        kind = source.split(":", 1)[1]
        if kind in WIRE_BASELINES:
            return make_baseline(
                kind, width=config.geometry.junction_width, length=config.geometry.wire_length
            )
        return make_baseline(kind, config=config.geometry)

    path = Path(source)
    if not path.exists():
        raise ConfigError(f"geometry '{source}' is neither a file nor baseline:<kind>")
    return load_geometry(path)


def layout_from_vector(x: np.ndarray, config: RunConfig) -> PadLayout:
    return build_pad_outline(PadDesignVector.from_array(x), config.geometry)


def profile_from_vector(x: np.ndarray, config: RunConfig, wire_length: float) -> WireProfile:
    return build_wire_profile(
        WireDesignVector.from_array(x),
        wire_length=wire_length,
        junction_width=config.geometry.junction_width,
        degree=config.geometry.spline_degree,
    )


# ============================================================================
# Objectives
# ============================================================================


class PadObjective:
    """Interior p_MS of the pad built from a design vector, with its E_C."""

    def __init__(self, config: RunConfig, stack: MaterialStack):
        self.config = config
        self.stack = stack

    def _p_ms(self, layout: PadLayout, level: int) -> tuple[float, PadSolve]:
        pad = solve_pad(layout, self.config, self.stack, level)
        return interior_p_ms(pad, self.stack, self.config.participation.x0), pad

    def __call__(self, x: np.ndarray) -> ObjectiveResult:
        layout = layout_from_vector(x, self.config)
        level = self.config.solver.mesh_level
        p, pad = self._p_ms(layout, level)
        extras: dict[str, Any] = {"wire_length": layout.wire_length, "n_panels": pad.mesh.n_panels}

        if self.config.solver.refinement_check:
            fine, _ = self._p_ms(layout, level + 1)
            extras["refinement_delta"] = abs(p - fine) / fine if fine > 0 else 0.0
            p = fine
        return ObjectiveResult(raw=p, ec_ghz=pad.ec_ghz, extras=extras)


class WireObjective:
    """p_MS of the wire pair built from four half widths."""

    def __init__(self, config: RunConfig, stack: MaterialStack, wire_length: float, total_energy: float):
        if wire_length <= 0:
            raise UsageError(f"wire length must be positive, got {wire_length}")
        self.config = config
        self.stack = stack
        self.wire_length = wire_length
        self.total_energy = total_energy

    def __call__(self, x: np.ndarray) -> ObjectiveResult:
        profile = profile_from_vector(x, self.config, self.wire_length)
        field = _centerline(profile, self.config, self.stack, self.config.solver.mesh_level)
        p = wire_participation(
            profile,
            field.y,
            field.e,
            self.stack.layer("MS"),
            self.total_energy,
            self.stack.eps_substrate,
            check_halving=False,
        )
        return ObjectiveResult(raw=p)

