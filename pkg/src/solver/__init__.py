"""Planar method-of-moments solver, interface fields and the 2D edge problem."""

from .edge import EdgeProblemSolution, solve_edge_problem
from .fields import (
    CenterlineField,
    FieldSamples,
    SampleRegion,
    centerline_field,
    in_plane_field,
    interface_fields,
)
from .mesh import PanelMesh, dump_mesh, load_mesh, mesh_conductors, mesh_layout
from .mom import (
    CapacitanceMatrix,
    ChargeSolution,
    HalfSpaceDielectric,
    MomSystem,
    capacitance_matrix,
    solve_charges,
)

__all__ = [
    "CapacitanceMatrix",
    "CenterlineField",
    "ChargeSolution",
    "EdgeProblemSolution",
    "FieldSamples",
    "HalfSpaceDielectric",
    "MomSystem",
    "PanelMesh",
    "SampleRegion",
    "capacitance_matrix",
    "centerline_field",
    "dump_mesh",
    "in_plane_field",
    "interface_fields",
    "load_mesh",
    "mesh_conductors",
    "mesh_layout",
    "solve_charges",
    "solve_edge_problem",
]
