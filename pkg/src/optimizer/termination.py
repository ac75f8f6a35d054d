"""Stopping rules: evaluation budget, iteration cap and the dynamic criteria.

The dynamic criteria compare f_current, the best value among the current
iteration's potentially optimal rectangles, with the mean of the previous
`window` iterations' f_current:

    |f_current - f_mean| / |f_mean| <= rel_tol
    |f_current - f_mean|            <= abs_tol
"""

from enum import Enum
from typing import Literal, Protocol

from pydantic import BaseModel, Field

from ..core.config import OptimizerSettings


class TerminationReason(str, Enum):
    CONTINUE = "continue"
    MAX_NFE = "max_nfe"
    MAX_ITERATIONS = "max_iterations"
    DYNAMIC = "dynamic"


class TerminationConfig(BaseModel):
    max_nfe: int = Field(default=360, ge=1)
    max_iterations: int | None = Field(default=None, ge=1)
    rel_tol: float = Field(default=0.5e-2, gt=0)
    abs_tol: float = Field(default=0.2e-6, gt=0)
    window: int = Field(default=3, ge=1)
    epsilon: float = Field(default=1e-4, ge=0)
    dynamic: bool = True
    combine: Literal["and", "or"] = "and"

    @classmethod
    def from_settings(cls, config: OptimizerSettings, **overrides) -> "TerminationConfig":
        values = {name: getattr(config, name) for name in cls.model_fields}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class _Progress(Protocol):
    nfe: int
    iteration: int
    iteration_log: list[float]


def budget_exhausted(nfe: int, config: TerminationConfig) -> bool:
    return nfe >= config.max_nfe


def dynamic_criteria(log: list[float], config: TerminationConfig) -> bool:
    if not config.dynamic or len(log) < config.window + 1:
        return False
    current = log[-1]
    previous = log[-1 - config.window : -1]
    mean = sum(previous) / len(previous)
    delta = abs(current - mean)

    relative = delta <= config.rel_tol * abs(mean)
    absolute = delta <= config.abs_tol
    return (relative and absolute) if config.combine == "and" else (relative or absolute)


def check_termination(state: _Progress, config: TerminationConfig) -> TerminationReason:
    """Budget first, then the iteration cap, then the dynamic criteria."""
    if budget_exhausted(state.nfe, config):
        return TerminationReason.MAX_NFE
    if config.max_iterations is not None and state.iteration >= config.max_iterations:
        return TerminationReason.MAX_ITERATIONS
    if dynamic_criteria(state.iteration_log, config):
        return TerminationReason.DYNAMIC
    return TerminationReason.CONTINUE
