"""Pad outlines, junction-wire profiles and reference geometries."""

from .baselines import BASELINES, list_baselines, make_baseline
from .export import geometry_hash, load_geometry, save_geometry, to_svg
from .pad import PadDesignVector, PadLayout, build_pad_outline
from .polygon import offset_polygon
from .spline import ControlPoint, SplineCurve, bspline_evaluate
from .wire import WireDesignVector, WireProfile, build_wire_profile, wire_layout

__all__ = [
    "BASELINES",
    "ControlPoint",
    "PadDesignVector",
    "PadLayout",
    "SplineCurve",
    "WireDesignVector",
    "WireProfile",
    "bspline_evaluate",
    "build_pad_outline",
    "build_wire_profile",
    "geometry_hash",
    "list_baselines",
    "load_geometry",
    "make_baseline",
    "offset_polygon",
    "save_geometry",
    "to_svg",
    "wire_layout",
]
