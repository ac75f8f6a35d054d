"""Reference geometries the optimized shapes are compared against."""

import dataclasses
import inspect
import logging
from collections.abc import Callable

import numpy as np
from shapely.geometry import box

from ..core.config import GeometrySettings, settings
from ..core.errors import UsageError
from .pad import PadLayout, finish_layout
from .polygon import circle, make_polygon, mirror_y
from .wire import WireDesignVector, WireProfile, build_wire_profile

logger = logging.getLogger(__name__)


def double_pad(
    width: float = 800.0,
    height: float = 600.0,
    pad_gap: float = 162.0,
    config: GeometrySettings | None = None,
) -> PadLayout:
    """Two rectangular pads stacked along y, total bounding box width x height."""
    config = config or settings.geometry
    if not 0 < pad_gap < height or width <= 0:
        raise UsageError(f"invalid double pad {width} x {height} with gap {pad_gap}")

    pad1 = make_polygon(box(-width / 2, pad_gap / 2, width / 2, height / 2).exterior.coords)
    pad2 = make_polygon(np.asarray(mirror_y(pad1).exterior.coords))
    return finish_layout(
        "double_pad",
        pad1,
        pad2,
        config,
        mirror_axis=((0.0, pad_gap / 2), (0.0, height / 2)),
        wire_length=pad_gap / 2,
        parameters={"width": width, "height": height, "pad_gap": pad_gap},
    )


def concentric(
    diameter: float = 800.0,
    inner_diameter: float = 360.0,
    ring_inner_diameter: float = 480.0,
    config: GeometrySettings | None = None,
) -> PadLayout:
    """Inner disk plus a surrounding annulus of outer diameter `diameter`."""
    config = config or settings.geometry
    if not 0 < inner_diameter < ring_inner_diameter < diameter:
        raise UsageError(
            f"concentric diameters must increase: {inner_diameter}, {ring_inner_diameter}, {diameter}"
        )

    tol = config.chord_tolerance
    disk = circle(inner_diameter / 2, tol)
    outer = circle(diameter / 2, tol)
    hole = circle(ring_inner_diameter / 2, tol)
    ring = make_polygon(outer.exterior.coords, [hole.exterior.coords], what="concentric ring")
    return finish_layout(
        "concentric",
        make_polygon(disk.exterior.coords, what="concentric disk"),
        ring,
        config,
        mirror_pair=False,
        wire_length=(ring_inner_diameter - inner_diameter) / 4,
        parameters={
            "diameter": diameter,
            "inner_diameter": inner_diameter,
            "ring_inner_diameter": ring_inner_diameter,
        },
    )


def straight_wire(width: float = 1.0, length: float = 81.0) -> WireProfile:
    """Constant-width wire."""
    v = WireDesignVector.from_array(np.full(4, width / 2))
    profile = build_wire_profile(v, wire_length=length, junction_width=width)
    return dataclasses.replace(profile, kind="straight_wire")


def linear_taper(slope: float = 0.4, width: float = 1.0, length: float = 81.0) -> WireProfile:
    """Wire whose half width grows as r0 + slope * y."""
    ys = length * np.arange(1, 5) / 4
    v = WireDesignVector.from_array(width / 2 + slope * ys)
    profile = build_wire_profile(v, wire_length=length, junction_width=width)
    return dataclasses.replace(profile, kind="linear_taper")


BASELINES: dict[str, tuple[Callable, str]] = {
    "double_pad": (double_pad, "two rectangular pads, 800 x 600 µm overall"),
    "concentric": (concentric, "disk inside an annulus, outer diameter 800 µm"),
    "straight_wire": (straight_wire, "1 µm wide, 81 µm long junction wire"),
    "linear_taper": (linear_taper, "junction wire tapering with slope 0.4"),
}


def list_baselines() -> list[dict[str, object]]:
    """Kinds with their description and default parameters."""
    out = []
    for kind, (builder, description) in BASELINES.items():
        defaults = {
            name: p.default
            for name, p in inspect.signature(builder).parameters.items()
            if name != "config"
        }
        out.append({"kind": kind, "description": description, "defaults": defaults})
    return out


def make_baseline(kind: str, **parameters) -> PadLayout | WireProfile:
    """Build a named baseline.

    Raises:
        UsageError: unknown kind or parameters the kind does not take.
    """
    if kind not in BASELINES:
        raise UsageError(f"Unknown baseline '{kind}'. Available: {', '.join(BASELINES)}")

    builder, _ = BASELINES[kind]
    accepted = set(inspect.signature(builder).parameters)
    unknown = set(parameters) - accepted
    if unknown:
        raise UsageError(f"baseline '{kind}' does not take {', '.join(sorted(unknown))}")

    return builder(**parameters)

