"""Spline capacitor pads and the pad/pad/ground layout around them.

The junction sits at the origin. The upper pad is built from a clamped
spline P0 -> P4 on the right of the y axis plus its mirror image; the lower
pad is the reflection of the upper one across the x axis. P0 and P4 lie on
the axis, so the upper junction wire runs from the origin to P0.
"""

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from shapely.geometry import Polygon
from shapely.ops import unary_union

from ..core.config import GeometrySettings, settings
from ..core.errors import InfeasibleGeometryError, UsageError
from .polygon import ground_frame, make_polygon, mirror_y
from .spline import SplineCurve, polygonize_curve

logger = logging.getLogger(__name__)

CONDUCTORS = ("pad1", "pad2", "ground")

_AXIS_TOL = 1e-9


@dataclass(frozen=True)
class PadDesignVector:
    """Free coordinates of the pad spline, µm.

    Array order is (x1, y1, x2, y2, x3, y3, y0, y4).
    """

    x1: float
    y1: float
    x2: float
    y2: float
    x3: float
    y3: float
    y0: float
    y4: float

    NAMES = ("x1", "y1", "x2", "y2", "x3", "y3", "y0", "y4")

    @classmethod
    def from_array(cls, values) -> "PadDesignVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (8,):
            raise UsageError(f"pad design vector needs 8 values, got {values.shape}")
        return cls(*(float(v) for v in values))

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in self.NAMES])

    def control_points(self) -> np.ndarray:
        return np.array(
            [
                [0.0, self.y0],
                [self.x1, self.y1],
                [self.x2, self.y2],
                [self.x3, self.y3],
                [0.0, self.y4],
            ]
        )

    def mirrored(self) -> "PadDesignVector":
        """The same pad described by the left-hand control points."""
        return PadDesignVector(-self.x1, self.y1, -self.x2, self.y2, -self.x3, self.y3, self.y0, self.y4)


@dataclass(frozen=True)
class PadLayout:
    """Two pads and a grounded frame, all polygons in µm.

    `mirror_pair` marks layouts whose lower pad is the exact reflection of
    the upper one across y = 0; the mesher and solver exploit it.
    """

    kind: str
    pad1: Polygon
    pad2: Polygon
    ground: Polygon | None
    ground_gap: float
    footprint_limit: tuple[float, float]
    design_vector: PadDesignVector | None = None
    mirror_axis: tuple[tuple[float, float], tuple[float, float]] | None = None
    mirror_pair: bool = True
    wire_length: float | None = None
    parameters: dict[str, Any] = field(default_factory=dict)

    @property
    def outline(self) -> Polygon:
        return self.pad1

    @property
    def pads(self) -> Polygon:
        return unary_union([self.pad1, self.pad2])

    @property
    def footprint(self) -> tuple[float, float]:
        minx, miny, maxx, maxy = self.pads.bounds
        return maxx - minx, maxy - miny

    def conductors(self) -> list[tuple[str, Polygon]]:
        items = [("pad1", self.pad1), ("pad2", self.pad2)]
        if self.ground is not None:
            items.append(("ground", self.ground))
        return items

    def gap_region(self) -> Polygon:
        """Bare substrate between the pads and the inner edge of the frame."""
        if self.ground is None:
            raise UsageError("layout has no ground frame")
        inner = Polygon(self.ground.interiors[0].coords)
        return inner.difference(self.pads)


def check_footprint(pads: Polygon, limit: tuple[float, float]) -> None:
    minx, miny, maxx, maxy = pads.bounds
    width, height = maxx - minx, maxy - miny
    if width > limit[0] + 1e-9 or height > limit[1] + 1e-9:
        raise InfeasibleGeometryError(
            f"footprint {width:.1f} x {height:.1f} µm exceeds {limit[0]:.0f} x {limit[1]:.0f} µm"
        )


def finish_layout(
    kind: str,
    pad1: Polygon,
    pad2: Polygon,
    config: GeometrySettings,
    with_ground: bool = True,
    **kwargs,
) -> PadLayout:
    """Validate a pad pair and surround it with the ground frame."""
    if pad1.intersects(pad2):
        raise InfeasibleGeometryError("pads overlap")

    limit = (config.footprint_width, config.footprint_height)
    pads = unary_union([pad1, pad2])
    check_footprint(pads, limit)

    ground = None
    if with_ground:
        ground = ground_frame(pads.bounds, config.ground_gap, config.ground_frame_width)

    return PadLayout(
        kind=kind,
        pad1=pad1,
        pad2=pad2,
        ground=ground,
        ground_gap=config.ground_gap,
        footprint_limit=limit,
        **kwargs,
    )


def build_pad_outline(
    v: PadDesignVector,
    config: GeometrySettings | None = None,
    with_ground: bool = True,
) -> PadLayout:
    """Turn a design vector into a validated, mirror-symmetric pad layout.

    Raises:
        InfeasibleGeometryError: self-intersecting outline, outline crossing
            the mirror axis, pads too close, or footprint exceeded.
    """
    config = config or settings.geometry

    curve = SplineCurve(v.control_points(), degree=config.spline_degree)
    half = polygonize_curve(curve, config.chord_tolerance)

    xs = half[1:-1, 0]
    if not (np.all(xs >= -_AXIS_TOL) or np.all(xs <= _AXIS_TOL)):
        raise InfeasibleGeometryError("pad outline crosses its mirror axis")

    # Right half P0 -> P4, then the mirror image walked back towards P0.
    other = half[-2:0:-1] * np.array([-1.0, 1.0])
    ring = np.vstack([half, other])
    pad1 = make_polygon(ring, what="pad outline")

    clearance = pad1.bounds[1]
    if clearance < config.min_pad_separation / 2:
        raise InfeasibleGeometryError(
            f"pads are {2 * clearance:.2f} µm apart, need {config.min_pad_separation:.2f} µm"
        )

    pad2 = make_polygon(np.asarray(mirror_y(pad1).exterior.coords), what="lower pad")
    layout = finish_layout(
        "spline_pad",
        pad1,
        pad2,
        config,
        with_ground=with_ground,
        design_vector=v,
        mirror_axis=((0.0, v.y0), (0.0, v.y4)),
        wire_length=v.y0,
    )
    logger.debug(
        "Pad outline: %d vertices, footprint %.1f x %.1f µm",
        len(pad1.exterior.coords),
        *layout.footprint,
    )
    return layout
