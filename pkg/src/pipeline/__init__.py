"""Workflows tying geometry, solver, participation and optimizer together."""

from .evaluation import (
    PadObjective,
    PadSolve,
    WireObjective,
    pad_report,
    reference_energy,
    refinement_delta,
    resolve_geometry,
    solve_pad,
    wire_report,
)
from .functions import (
    baselines,
    evaluate,
    list_runs,
    optimize_pad,
    optimize_wire,
    report,
    show_run,
    sweep,
)
from .tables import comparison_table, write_convergence, write_trace

__all__ = [
    "PadObjective",
    "PadSolve",
    "WireObjective",
    "baselines",
    "comparison_table",
    "evaluate",
    "list_runs",
    "optimize_pad",
    "optimize_wire",
    "pad_report",
    "reference_energy",
    "refinement_delta",
    "report",
    "resolve_geometry",
    "show_run",
    "solve_pad",
    "sweep",
    "wire_report",
    "write_convergence",
    "write_trace",
]
