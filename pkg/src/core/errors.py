"""Exception hierarchy for qubitshape.

Every error carries the process exit code the CLI maps it to.
"""


class QubitShapeError(Exception):
    """Base class for all qubitshape errors."""

    exit_code: int = 1


class ConfigError(QubitShapeError):
    """Invalid or missing configuration."""

    exit_code = 2


class UsageError(QubitShapeError):
    """Invalid call, e.g. an unknown baseline kind."""

    exit_code = 2


class GeometryError(QubitShapeError):
    """Geometry could not be built or failed validation."""

    exit_code = 3


class InvalidCurveError(GeometryError):
    """Spline knot vector or control points are inconsistent."""


class InfeasibleGeometryError(GeometryError):
    """Self-intersecting outline, footprint overflow, zero wire width."""


class OutOfModelError(GeometryError):
    """Geometry outside the validity range of an analytic model."""


class MeshingError(GeometryError):
    """Degenerate polygon handed to the mesher."""


class SolverError(QubitShapeError):
    """Field solve failed (singular system, bad grid)."""

    exit_code = 4


class NoSolutionError(SolverError):
    """A closed-form relation has no physical solution."""


class OptimizerError(QubitShapeError):
    """Optimization aborted, e.g. too many failed evaluations."""

    exit_code = 4


class ConstraintUnsatisfiedError(QubitShapeError):
    """The optimum violates the E_C constraint."""

    exit_code = 5
