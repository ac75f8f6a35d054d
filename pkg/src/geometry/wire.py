"""Junction-wire half-width profiles r(y) and the local wire layout."""

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from shapely.geometry import Polygon, box
from shapely.ops import unary_union

from ..core.config import GeometrySettings, settings
from ..core.errors import InfeasibleGeometryError, UsageError
from .polygon import make_polygon, mirror_y
from .spline import SplineCurve

logger = logging.getLogger(__name__)

N_PROFILE_SAMPLES = 2049


@dataclass(frozen=True)
class WireDesignVector:
    """Half-widths (µm) of the four free control points, junction side first."""

    values: tuple[float, float, float, float]

    @classmethod
    def from_array(cls, values) -> "WireDesignVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (4,):
            raise UsageError(f"wire design vector needs 4 values, got {values.shape}")
        return cls(tuple(float(v) for v in values))

    def to_array(self) -> np.ndarray:
        return np.array(self.values)


@dataclass(frozen=True, eq=False)
class WireProfile:
    """Half-width r(y) of the upper wire for y in [0, wire_length], µm."""

    design_vector: WireDesignVector
    wire_length: float
    junction_half_width: float
    control_points: np.ndarray
    kind: str = "spline_wire"
    _y: np.ndarray | None = None
    _r: np.ndarray | None = None

    def r(self, y: float | np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if np.any((y < -1e-9) | (y > self.wire_length + 1e-9)):
            raise UsageError(f"y outside the wire span [0, {self.wire_length}]")
        return np.interp(y, self._y, self._r)

    @property
    def r_of_y(self) -> Callable[[np.ndarray], np.ndarray]:
        return self.r

    def polygon(self, y_start: float = 0.0) -> Polygon:
        """Upper wire outline from y_start to the pad end."""
        keep = self._y > y_start
        ys = np.concatenate([[y_start], self._y[keep]])
        rs = self.r(ys)
        right = np.column_stack([rs, ys])
        left = np.column_stack([-rs, ys])[::-1]
        return make_polygon(np.vstack([right, left]), what="wire outline")


def build_wire_profile(
    v: WireDesignVector,
    wire_length: float | None = None,
    junction_width: float | None = None,
    degree: int | None = None,
) -> WireProfile:
    """Spline half-width profile with control points at fixed y = L*k/4.

    P0 is pinned to the junction half width; only the x of P1..P4 is free.

    Raises:
        InfeasibleGeometryError: the profile reaches zero width.
    """
    wire_length = settings.geometry.wire_length if wire_length is None else wire_length
    junction_width = settings.geometry.junction_width if junction_width is None else junction_width
    degree = settings.geometry.spline_degree if degree is None else degree

    if wire_length <= 0:
        raise UsageError(f"wire length must be positive, got {wire_length}")
    if junction_width <= 0:
        raise UsageError(f"junction width must be positive, got {junction_width}")

    half = junction_width / 2
    ys = wire_length * np.arange(5) / 4
    xs = np.concatenate([[half], v.to_array()])
    points = np.column_stack([xs, ys])

    curve = SplineCurve(points, degree=degree)
    samples = curve.sample(N_PROFILE_SAMPLES)
    # y(t) is increasing because the control ordinates are, so r(y) is single valued.
    y_curve, r_curve = samples[:, 1], samples[:, 0]
    y_curve[0], y_curve[-1] = 0.0, wire_length

    if np.any(r_curve <= 0):
        y_bad = y_curve[np.argmax(r_curve <= 0)]
        raise InfeasibleGeometryError(f"wire width reaches zero at y = {y_bad:.2f} µm")

    return WireProfile(
        design_vector=v,
        wire_length=float(wire_length),
        junction_half_width=half,
        control_points=points,
        _y=y_curve,
        _r=r_curve,
    )


def wire_layout(
    profile: WireProfile,
    config: GeometrySettings | None = None,
) -> list[tuple[str, Polygon]]:
    """Upper and lower wire with their pad stubs, for the local wire model.

    The wires stop junction_gap/2 short of the origin; each ends in a
    rectangular stub standing in for the nearby part of its pad.
    """
    config = config or settings.geometry
    y_start = config.junction_gap / 2
    if y_start >= profile.wire_length:
        raise UsageError("junction gap is longer than the wire")

    L = profile.wire_length
    stub = box(-config.stub_width / 2, L, config.stub_width / 2, L + config.stub_extent)
    upper = unary_union([profile.polygon(y_start), stub])
    if not isinstance(upper, Polygon):
        raise InfeasibleGeometryError("wire and pad stub do not join")
    upper = make_polygon(np.asarray(upper.exterior.coords), what="wire with stub")
    lower = make_polygon(np.asarray(mirror_y(upper).exterior.coords), what="lower wire")
    return [("wire1", upper), ("wire2", lower)]
