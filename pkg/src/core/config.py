"""Configuration management for qubitshape."""

from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel
from pydantic_settings import BaseSettings, SettingsConfigDict


class GeometrySettings(BaseModel):
    footprint_width: float = 800.0  # µm, pad pair bounding box limit
    footprint_height: float = 800.0
    ground_gap: float = 100.0
    ground_frame_width: float = 200.0
    chord_tolerance: float = 0.5
    spline_degree: int = 3
    min_pad_separation: float = 10.0  # between the two pads along the mirror axis
    wire_length: float = 81.0  # junction to pad, one wire
    junction_width: float = 1.0
    junction_gap: float = 0.2  # split between the two wires at the junction
    stub_extent: float = 20.0
    stub_width: float = 40.0


class SolverSettings(BaseModel):
    eps_substrate: float = 11.7
    target_panel_size: float = 40.0
    edge_band_size: float = 0.25  # µm, at most x0/4
    growth: float = 2.0
    ground_panel_factor: float = 2.0
    mesh_level: int = 0
    near_field_factor: float = 2.0
    pivot_tolerance: float = 1e-12
    refinement_check: bool = False
    sa_sample_spacing: float = 40.0
    wire_target_panel_size: float = 2.0
    wire_edge_band_size: float = 0.25


class EdgeSettings(BaseModel):
    film_thickness: float = 0.1  # µm
    min_spacing: float = 0.0005  # µm, finest grid step at the film corners
    growth: float = 1.15
    domain_size: float = 50.0  # µm, distance to the grounded boundary


class ParticipationSettings(BaseModel):
    material_preset: str = "simplified"
    x0: float = 1.0  # µm, interior/perimeter boundary
    centerline_samples: int = 101


class TransmonSettings(BaseModel):
    inductance_nh: float = 10.0
    f01_ghz: float = 5.0
    ec_threshold_ghz: float = 0.35
    beta: float = 1e-2  # penalty weight, objective units per GHz²
    junction_shunt_ff: float = 0.0


class OptimizerSettings(BaseModel):
    max_nfe: int = 100
    max_iterations: int | None = None
    rel_tol: float = 0.5e-2
    abs_tol: float = 0.2e-6
    window: int = 3
    epsilon: float = 1e-4
    dynamic: bool = True
    combine: Literal["and", "or"] = "and"
    workers: int = 1
    sentinel_floor: float = 1.0
    max_sentinel_rate: float = 0.5
    checkpoint: bool = True


class PathSettings(BaseModel):
    runs: str = "runs"
    database: str = "data/qubitshape.db"
    materials: str = "config/materials"


_SECTIONS: dict[str, type[BaseModel]] = {
    "geometry": GeometrySettings,
    "solver": SolverSettings,
    "edge": EdgeSettings,
    "participation": ParticipationSettings,
    "transmon": TransmonSettings,
    "optimizer": OptimizerSettings,
    "paths": PathSettings,
}


class Settings(BaseSettings):
    """Main settings loaded from environment and config files."""

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")

    log_level: str = "INFO"

    # Nested settings (loaded from YAML)
    geometry: GeometrySettings = GeometrySettings()
    solver: SolverSettings = SolverSettings()
    edge: EdgeSettings = EdgeSettings()
    participation: ParticipationSettings = ParticipationSettings()
    transmon: TransmonSettings = TransmonSettings()
    optimizer: OptimizerSettings = OptimizerSettings()
    paths: PathSettings = PathSettings()

    @classmethod
    def load(cls, config_path: Path | None = None) -> "Settings":
        """Load settings from environment and YAML config."""
        instance = cls()

        config_path = config_path or Path("config/settings.yaml")
        if config_path.exists():
            with open(config_path) as f:
                yaml_config = yaml.safe_load(f) or {}

            for name, model in _SECTIONS.items():
                if name in yaml_config:
                    setattr(instance, name, model(**yaml_config[name]))

        return instance


# Global settings instance
settings = Settings.load()


def get_material_config(preset: str) -> dict[str, Any]:
    """Load a material preset file from the materials directory.

    Args:
        preset: Preset name (e.g., 'nb-on-si').

    Returns:
        Preset dictionary, empty if no such file exists.
    """
    preset_path = get_materials_dir() / f"{preset}.yaml"
    if not preset_path.exists():
        return {}

    with open(preset_path) as f:
        return yaml.safe_load(f) or {}


def list_material_files() -> list[str]:
    """Names of the presets available as files."""
    materials_dir = get_materials_dir()
    if not materials_dir.exists():
        return []
    return sorted(p.stem for p in materials_dir.glob("*.yaml"))


def get_project_root() -> Path:
    """Get the project root directory."""
    return Path.cwd()


def get_runs_dir() -> Path:
    """Get the runs directory path."""
    return get_project_root() / settings.paths.runs


def get_materials_dir() -> Path:
    """Get the material presets directory path."""
    return get_project_root() / settings.paths.materials


def get_database_path() -> Path:
    """Get the database file path."""
    return get_project_root() / settings.paths.database
