"""Clamped B-spline curves in the plane."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.interpolate import BSpline

from ..core.errors import GeometryError, InvalidCurveError, UsageError


class ControlPoint(NamedTuple):
    """A point in the conductor plane, µm."""

    x: float
    y: float


def clamped_uniform_knots(n_points: int, degree: int) -> np.ndarray:
    """Knot vector on [0, 1] with both ends repeated degree+1 times."""
    if degree < 1:
        raise InvalidCurveError(f"degree must be >= 1, got {degree}")
    if n_points <= degree:
        raise InvalidCurveError(f"{n_points} control points cannot carry a degree-{degree} curve")

    n_inner = n_points - degree - 1
    inner = np.linspace(0.0, 1.0, n_inner + 2)[1:-1]
    return np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])


def validate_knots(knots: np.ndarray, n_points: int, degree: int) -> None:
    """Raise InvalidCurveError unless the knot vector is consistent and clamped."""
    if len(knots) != n_points + degree + 1:
        raise InvalidCurveError(
            f"expected {n_points + degree + 1} knots for {n_points} points of degree {degree}, "
            f"got {len(knots)}"
        )
    if not np.all(np.isfinite(knots)):
        raise InvalidCurveError("knot vector contains non-finite values")
    if np.any(np.diff(knots) < 0):
        raise InvalidCurveError("knot vector is not nondecreasing")
    if np.ptp(knots[: degree + 1]) != 0 or np.ptp(knots[-(degree + 1) :]) != 0:
        raise InvalidCurveError("knot vector is not clamped")
    if knots[degree] == knots[n_points]:
        raise InvalidCurveError("knot vector has an empty parameter domain")


@dataclass(frozen=True, eq=False)
class SplineCurve:
    """Clamped B-spline over a control polygon.

    The parameter t in [0, 1] is mapped linearly onto the knot domain, so
    non-normalized clamped knot vectors behave like normalized ones.
    """

    control_points: np.ndarray
    degree: int = 3
    knots: np.ndarray | None = None

    def __post_init__(self):
        points = np.asarray(self.control_points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise InvalidCurveError(f"control points must have shape (n, 2), got {points.shape}")
        if not np.all(np.isfinite(points)):
            raise InvalidCurveError("control points must be finite")

        if self.knots is None:
            knots = clamped_uniform_knots(len(points), self.degree)
        else:
            knots = np.asarray(self.knots, dtype=float)
        validate_knots(knots, len(points), self.degree)

        object.__setattr__(self, "control_points", points)
        object.__setattr__(self, "knots", knots)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[len(self.control_points)])

    def evaluate(self, t: float | np.ndarray) -> np.ndarray:
        """Evaluate at parameter(s) t in [0, 1]; returns shape (..., 2)."""
        t = np.asarray(t, dtype=float)
        if np.any((t < 0.0) | (t > 1.0)) or not np.all(np.isfinite(t)):
            raise UsageError("spline parameter must lie in [0, 1]")

        lo, hi = self.domain
        u = lo + t * (hi - lo)
        spline = BSpline(self.knots, self.control_points, self.degree, extrapolate=False)
        return spline(u)

    def sample(self, n: int) -> np.ndarray:
        """n points at uniform parameter spacing, endpoints included."""
        return self.evaluate(np.linspace(0.0, 1.0, n))


def bspline_evaluate(curve: SplineCurve, t: float) -> ControlPoint:
    """De Boor evaluation of a curve at a single parameter."""
    x, y = curve.evaluate(float(t))
    return ControlPoint(float(x), float(y))


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    length_sq = np.einsum("ij,ij->i", ab, ab)
    t = np.einsum("ij,ij->i", p - a, ab) / np.where(length_sq > 0, length_sq, 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


def polygonize_curve(curve: SplineCurve, tolerance: float, max_points: int = 1 << 16) -> np.ndarray:
    """Sample the curve densely enough that no chord strays more than tolerance.

    Uniform parameter sampling is doubled until the deviation at every chord
    midpoint is within tolerance. Endpoints are always included.
    """
    if tolerance <= 0:
        raise UsageError("chord tolerance must be positive")

    n_segments = 8 * (len(curve.control_points) - 1)
    while True:
        t = np.linspace(0.0, 1.0, n_segments + 1)
        points = curve.evaluate(t)
        mids = curve.evaluate(0.5 * (t[:-1] + t[1:]))
        deviation = np.max(_point_segment_distance(mids, points[:-1], points[1:]))
        if deviation <= tolerance:
            return points
        n_segments *= 2
        if n_segments + 1 > max_points:
            raise GeometryError(
                f"curve needs more than {max_points} points to meet chord tolerance {tolerance}"
            )
