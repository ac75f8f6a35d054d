"""Shared fixtures: isolated run registry, small layouts and test functions."""

from pathlib import Path

import numpy as np
import pytest
import yaml

from src.core.config import GeometrySettings, PathSettings, SolverSettings, settings
from src.core.database import reset_db
from src.geometry.baselines import double_pad
from src.participation import get_material_stack

# Small pad pair in a 100 x 100 µm footprint; cheap enough to solve in every test.
SMALL_GEOMETRY = {
    "footprint_width": 100,
    "footprint_height": 100,
    "ground_gap": 10,
    "ground_frame_width": 10,
}
SMALL_SOLVER = {
    "target_panel_size": 5,
    "edge_band_size": 0.25,
    "sa_sample_spacing": 5,
}
# Default 800 µm geometry on a coarse mesh of a few thousand panels.
DESK_SOLVER = {
    "target_panel_size": 80,
    "edge_band_size": 1.0,
}


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    """Runs and the registry database under tmp_path."""
    monkeypatch.setattr(
        settings,
        "paths",
        PathSettings(
            runs=str(tmp_path / "runs"),
            database=str(tmp_path / "data" / "qubitshape.db"),
            materials=str(Path.cwd() / settings.paths.materials),
        ),
    )
    reset_db()
    yield tmp_path
    reset_db()


@pytest.fixture
def small_geometry() -> GeometrySettings:
    return GeometrySettings(**SMALL_GEOMETRY)


@pytest.fixture
def small_solver() -> SolverSettings:
    return SolverSettings(**SMALL_SOLVER)


@pytest.fixture
def small_layout(small_geometry):
    return double_pad(width=60, height=50, pad_gap=10, config=small_geometry)


@pytest.fixture
def small_config_file(tmp_path) -> Path:
    """Run config with the small footprint and a coarse mesh."""
    path = tmp_path / "small.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "materials": "simplified",
                "geometry": SMALL_GEOMETRY,
                "solver": SMALL_SOLVER,
                "transmon": {"ec_threshold_ghz": 100.0},
            }
        )
    )
    return path


@pytest.fixture
def desk_config_file(tmp_path) -> Path:
    """Default geometry and presets on the coarse desk mesh."""
    path = tmp_path / "desk.yaml"
    path.write_text(yaml.safe_dump({"materials": "simplified", "solver": DESK_SOLVER}))
    return path


@pytest.fixture
def simplified():
    return get_material_stack("simplified")


@pytest.fixture
def sphere():
    def f(x):
        return float(np.sum(np.asarray(x) ** 2))

    return f


@pytest.fixture
def camel():
    """Six-hump camel; global minimum -1.0316 at (±0.0898, ∓0.7126)."""

    def f(x):
        a, b = float(x[0]), float(x[1])
        return (4 - 2.1 * a**2 + a**4 / 3) * a**2 + a * b + (-4 + 4 * b**2) * b**2

    return f
