"""Participation reports, Q_TLS and T1."""

import logging
import math
from collections.abc import Mapping
from typing import Any

from pydantic import BaseModel, Field, computed_field

from ..core.errors import UsageError
from .materials import LAYER_NAMES, MaterialStack
from .transmon import TransmonParams

logger = logging.getLogger(__name__)

PPM = 1e6


def q_tls(participation: Mapping[str, float], tan_delta: Mapping[str, float]) -> float:
    """1 / sum of p_i tan(delta_i); math.inf when nothing is lossy."""
    loss = sum(participation[name] * tan_delta[name] for name in participation)
    if loss <= 0:
        logger.warning("All participations are zero; Q_TLS is unbounded")
        return math.inf
    return 1.0 / loss


def t1_from_q(q: float, f01_ghz: float) -> float:
    """T1 = Q / (2 pi f01), seconds."""
    if f01_ghz <= 0:
        raise UsageError(f"f01 must be positive, got {f01_ghz}")
    return q / (2 * math.pi * f01_ghz * 1e9)


class LayerParticipation(BaseModel):
    """Participation of one layer, as fractions (not ppm)."""

    interior: float = Field(default=0.0, ge=0.0)
    accurate: float = Field(default=0.0, ge=0.0)
    diverging: float = Field(default=0.0, ge=0.0)
    wire: float = Field(default=0.0, ge=0.0)

    @computed_field
    @property
    def perimeter(self) -> float:
        return self.accurate + self.diverging

    @computed_field
    @property
    def total(self) -> float:
        return self.interior + self.perimeter + self.wire

    @computed_field
    @property
    def accurate_only(self) -> float:
        """Total without the extrapolated diverging band."""
        return self.interior + self.accurate + self.wire

    def __add__(self, other: "LayerParticipation") -> "LayerParticipation":
        return LayerParticipation(
            interior=self.interior + other.interior,
            accurate=self.accurate + other.accurate,
            diverging=self.diverging + other.diverging,
            wire=self.wire + other.wire,
        )


class ParticipationReport(BaseModel):
    """Per-layer participation of a pad, a wire pair, or both."""

    layers: dict[str, LayerParticipation]
    material_preset: str
    tan_delta: dict[str, float]
    f01_ghz: float = 5.0
    transmon: TransmonParams | None = None
    provenance: dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def build(
        cls,
        layers: Mapping[str, LayerParticipation],
        stack: MaterialStack,
        f01_ghz: float,
        transmon: TransmonParams | None = None,
        **provenance: Any,
    ) -> "ParticipationReport":
        return cls(
            layers={name: layers.get(name, LayerParticipation()) for name in LAYER_NAMES},
            material_preset=stack.preset_name,
            tan_delta=stack.tan_delta,
            f01_ghz=f01_ghz,
            transmon=transmon,
            provenance=provenance,
        )

    @property
    def totals(self) -> dict[str, float]:
        return {name: layer.total for name, layer in self.layers.items()}

    @computed_field
    @property
    def q_tls(self) -> float:
        return q_tls(self.totals, self.tan_delta)

    @computed_field
    @property
    def t1_us(self) -> float:
        return t1_from_q(self.q_tls, self.f01_ghz) * 1e6

    @computed_field
    @property
    def q_tls_accurate_only(self) -> float:
        return q_tls({n: v.accurate_only for n, v in self.layers.items()}, self.tan_delta)

    def ppm(self) -> dict[str, dict[str, float]]:
        """Per layer and region, in ppm."""
        return {
            name: {
                key: value * PPM
                for key, value in layer.model_dump().items()
            }
            for name, layer in self.layers.items()
        }

    def summary(self) -> dict[str, Any]:
        """Deterministic JSON content of the report, p values in ppm."""
        return {
            "participation_ppm": self.ppm(),
            "material_preset": self.material_preset,
            "tan_delta": self.tan_delta,
            "f01_ghz": self.f01_ghz,
            "q_tls": _finite(self.q_tls),
            "q_tls_accurate_only": _finite(self.q_tls_accurate_only),
            "t1_us": _finite(self.t1_us),
            "transmon": self.transmon.model_dump() if self.transmon else None,
            "provenance": self.provenance,
        }


def _finite(value: float) -> float | str:
    return value if math.isfinite(value) else "unbounded"


def compose(pad: ParticipationReport, wire: ParticipationReport) -> ParticipationReport:
    """Pad plus wire, layer by layer.

    Raises:
        UsageError: the reports use different material presets.
    """
    if pad.material_preset != wire.material_preset:
        raise UsageError(
            f"cannot compose reports of presets '{pad.material_preset}' and '{wire.material_preset}'"
        )
    layers = {name: pad.layers[name] + wire.layers[name] for name in pad.layers}
    return pad.model_copy(
        update={
            "layers": layers,
            "provenance": {"pad": pad.provenance, "wire": wire.provenance},
        }
    )
