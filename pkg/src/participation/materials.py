"""Interface dielectric layers and material presets."""

import logging
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..core.config import get_material_config, list_material_files
from ..core.errors import ConfigError

logger = logging.getLogger(__name__)

LayerName = Literal["MS", "MA", "SA"]
LAYER_NAMES: tuple[str, ...] = ("MS", "MA", "SA")


class MaterialLayer(BaseModel):
    """One lossy interface layer: metal-substrate, metal-air or substrate-air."""

    model_config = ConfigDict(frozen=True)

    name: LayerName
    eps_r: float = Field(ge=1.0)
    thickness_nm: float = Field(gt=0.0)
    tan_delta: float = Field(default=1e-3, ge=0.0)

    @property
    def thickness_m(self) -> float:
        return self.thickness_nm * 1e-9


class MaterialStack(BaseModel):
    """The three interface layers on a given substrate."""

    model_config = ConfigDict(frozen=True)

    layers: tuple[MaterialLayer, ...]
    eps_substrate: float = Field(default=11.7, ge=1.0)
    preset_name: str = "inline"

    @model_validator(mode="after")
    def _one_layer_per_interface(self) -> "MaterialStack":
        names = sorted(layer.name for layer in self.layers)
        if names != sorted(LAYER_NAMES):
            raise ValueError(f"need exactly one MS, MA and SA layer, got {names}")
        return self

    def layer(self, name: str) -> MaterialLayer:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise ConfigError(f"no layer '{name}' in stack '{self.preset_name}'")

    @property
    def tan_delta(self) -> dict[str, float]:
        return {layer.name: layer.tan_delta for layer in self.layers}


def _stack(name: str, eps_substrate: float, **layers: tuple[float, float, float]) -> MaterialStack:
    return MaterialStack(
        preset_name=name,
        eps_substrate=eps_substrate,
        layers=tuple(
            MaterialLayer(name=key, eps_r=eps, thickness_nm=t, tan_delta=tan)
            for key, (eps, t, tan) in layers.items()
        ),
    )


# (eps_r, thickness in nm, tan delta)
BUILTIN_PRESETS: dict[str, MaterialStack] = {
    "simplified": _stack(
        "simplified", 11.7, MS=(10.0, 3.0, 1e-3), MA=(10.0, 3.0, 1e-3), SA=(10.0, 3.0, 1e-3)
    ),
    "nb-on-si": _stack(
        "nb-on-si", 11.7, MS=(11.7, 2.0, 1.3e-3), MA=(33.0, 5.0, 4.7e-2), SA=(4.2, 5.0, 2.1e-3)
    ),
}


def stack_from_dict(data: dict[str, Any], name: str = "inline") -> MaterialStack:
    """Build a stack from {'eps_substrate': .., 'layers': {MS: {...}, ...}} or a layer list."""
    layers = data.get("layers", {})
    if isinstance(layers, dict):
        layers = [{"name": key, **value} for key, value in layers.items()]
    try:
        return MaterialStack(
            preset_name=data.get("name", name),
            eps_substrate=data.get("eps_substrate", 11.7),
            layers=tuple(MaterialLayer(**layer) for layer in layers),
        )
    except (ValidationError, TypeError) as e:
        raise ConfigError(f"invalid material stack '{name}': {e}") from e


def get_material_stack(preset: str | dict[str, Any] | MaterialStack) -> MaterialStack:
    """Resolve a preset name, an inline stack dict or a stack.

    Preset files under the materials directory take precedence over the
    built-ins of the same name.

    Raises:
        ConfigError: unknown preset or invalid stack content.
    """
    if isinstance(preset, MaterialStack):
        return preset
    if isinstance(preset, dict):
        return stack_from_dict(preset)

    data = get_material_config(preset)
    if data:
        logger.debug("Material preset '%s' loaded from file", preset)
        return stack_from_dict(data, name=preset)
    if preset in BUILTIN_PRESETS:
        return BUILTIN_PRESETS[preset]

    raise ConfigError(
        f"Unknown material preset '{preset}'. Available: {', '.join(list_material_presets())}"
    )


def list_material_presets() -> list[str]:
    """Names of all presets, files and built-ins."""
    return sorted(set(BUILTIN_PRESETS) | set(list_material_files()))
