"""Box-bounded design spaces and their unit-cube normalization."""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from ..core.errors import ConfigError, UsageError


@dataclass(frozen=True, eq=False)
class DesignSpace:
    """Named variables with lower/upper bounds in µm.

    A variable with lower == upper is fixed: it maps to the cube center and
    always denormalizes to its bound.
    """

    names: tuple[str, ...]
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

        if not (lower.shape == upper.shape == (len(self.names),)):
            raise ConfigError(
                f"{len(self.names)} variables but bounds of shape {lower.shape} and {upper.shape}"
            )
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ConfigError("design space bounds must be finite")
        bad = np.flatnonzero(lower > upper)
        if len(bad):
            name = self.names[bad[0]]
            raise ConfigError(f"lower bound above upper bound for '{name}': {lower[bad[0]]} > {upper[bad[0]]}")

    @classmethod
    def from_bounds(cls, bounds: Mapping[str, Sequence[float]]) -> "DesignSpace":
        names = tuple(bounds)
        lower = [float(bounds[name][0]) for name in names]
        upper = [float(bounds[name][1]) for name in names]
        return cls(names, np.array(lower), np.array(upper))

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def fixed(self) -> np.ndarray:
        return self.span == 0

    def normalize(self, x) -> np.ndarray:
        x = self._check(x)
        span = np.where(self.fixed, 1.0, self.span)
        return np.where(self.fixed, 0.5, (x - self.lower) / span)

    def denormalize(self, u) -> np.ndarray:
        u = self._check(u)
        return self.lower + u * self.span

    def to_dict(self) -> dict[str, list[float]]:
        return {name: [float(lo), float(hi)] for name, lo, hi in zip(self.names, self.lower, self.upper)}

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise UsageError(f"expected {self.n} coordinates, got shape {x.shape}")
        return x
