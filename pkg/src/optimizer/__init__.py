"""DIRECT optimizer with penalty composition and dynamic stopping."""

from .checkpoint import read_checkpoint, write_checkpoint
from .direct import (
    DirectOptimizer,
    EvaluationRecord,
    Hyperrectangle,
    ObjectiveResult,
    OptimizationResult,
    OptimizerState,
    PenaltySpec,
    minimize,
    potentially_optimal,
    trisect,
)
from .space import DesignSpace
from .termination import TerminationConfig, TerminationReason, check_termination

__all__ = [
    "DesignSpace",
    "DirectOptimizer",
    "EvaluationRecord",
    "Hyperrectangle",
    "ObjectiveResult",
    "OptimizationResult",
    "OptimizerState",
    "PenaltySpec",
    "TerminationConfig",
    "TerminationReason",
    "check_termination",
    "minimize",
    "potentially_optimal",
    "read_checkpoint",
    "trisect",
    "write_checkpoint",
]
