"""Run configuration and run directories.

A run directory holds everything one command produced:

    runs/<date>_<mode>_<hash8>/
        config.json  trace.csv  convergence.csv  report.json  run.json
        geometry.json  geometry.svg  geometry.png  checkpoints/
"""

import hashlib
import json
import logging
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from contextlib import contextmanager
from datetime import datetime, timezone
from enum import Enum
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from .config import (
    EdgeSettings,
    GeometrySettings,
    OptimizerSettings,
    ParticipationSettings,
    SolverSettings,
    TransmonSettings,
    get_runs_dir,
    settings,
)
from .errors import ConfigError

logger = logging.getLogger(__name__)

RunMode = Literal["optimize-pad", "optimize-wire", "evaluate", "baselines", "report", "sweep"]

PAD_VARIABLES = ("x1", "y1", "x2", "y2", "x3", "y3", "y0", "y4")
WIRE_VARIABLES = ("r1", "r2", "r3", "r4")


def package_version() -> str:
    try:
        return version("qubitshape")
    except PackageNotFoundError:
        return "0+unknown"


def default_pad_bounds(geometry: GeometrySettings) -> dict[str, tuple[float, float]]:
    """Control-point box of the upper pad's right half inside the footprint.

    P0 (the wire end) stays in the lower half of the pad's span, P4 in the
    upper half.
    """
    half_w = geometry.footprint_width / 2
    half_h = geometry.footprint_height / 2
    low = geometry.min_pad_separation / 2
    mid = low + (half_h - low) / 2
    bounds = {}
    for name in PAD_VARIABLES:
        if name.startswith("x"):
            bounds[name] = (0.0, half_w)
        elif name == "y0":
            bounds[name] = (low, mid)
        elif name == "y4":
            bounds[name] = (mid, half_h)
        else:
            bounds[name] = (low, half_h)
    return bounds


def default_wire_bounds(geometry: GeometrySettings) -> dict[str, tuple[float, float]]:
    """Half widths from the junction's up to half the wire length."""
    low = geometry.junction_width / 2
    high = max(geometry.stub_width / 2, low + geometry.wire_length / 2)
    return {name: (low, high) for name in WIRE_VARIABLES}


class RunConfig(BaseModel):
    """Everything a command needs; written to config.json."""

    mode: RunMode
    geometry: GeometrySettings = Field(default_factory=GeometrySettings)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    edge: EdgeSettings = Field(default_factory=EdgeSettings)
    participation: ParticipationSettings = Field(default_factory=ParticipationSettings)
    transmon: TransmonSettings = Field(default_factory=TransmonSettings)
    optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    materials: str | dict[str, Any] = "simplified"
    pad_bounds: dict[str, tuple[float, float]] | None = None
    wire_bounds: dict[str, tuple[float, float]] | None = None
    wire_length: float | None = Field(default=None, gt=0)
    pad_run: str | None = None
    reference_pad: str = "double_pad"
    geometry_source: str | None = None
    wire_source: str | None = None
    runs: list[str] = Field(default_factory=list)
    out: str | None = None

    @model_validator(mode="after")
    def _fill_bounds(self) -> "RunConfig":
        if self.pad_bounds is None:
            self.pad_bounds = default_pad_bounds(self.geometry)
        if self.wire_bounds is None:
            self.wire_bounds = default_wire_bounds(self.geometry)
        for label, bounds, names in (
            ("pad_bounds", self.pad_bounds, PAD_VARIABLES),
            ("wire_bounds", self.wire_bounds, WIRE_VARIABLES),
        ):
            if set(bounds) != set(names):
                raise ValueError(f"{label} must name exactly {', '.join(names)}")
        return self

    @classmethod
    def build(
        cls,
        mode: str,
        config_file: Path | None = None,
        overrides: dict[str, Any] | None = None,
    ) -> "RunConfig":
        """Global settings, then the config file, then command-line overrides.

        Raises:
            ConfigError: unreadable file or invalid content.
        """
        base = {
            "mode": mode,
            "geometry": settings.geometry.model_dump(),
            "solver": settings.solver.model_dump(),
            "edge": settings.edge.model_dump(),
            "participation": settings.participation.model_dump(),
            "transmon": settings.transmon.model_dump(),
            "optimizer": settings.optimizer.model_dump(),
            "materials": settings.participation.material_preset,
        }
        if config_file is not None:
            base = deep_merge(base, read_config_file(config_file))
        if overrides:
            base = deep_merge(base, overrides)
        base["mode"] = mode
        try:
            return cls.model_validate(base)
        except ValidationError as e:
            raise ConfigError(f"invalid run config: {e}") from e

    def config_hash(self) -> str:
        data = self.model_dump(mode="json", exclude={"out"})
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()

    @property
    def material_name(self) -> str:
        if isinstance(self.materials, str):
            return self.materials
        return str(self.materials.get("name", "inline"))


def deep_merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    """Nested dict merge; `update` wins on leaves."""
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def read_config_file(path: Path) -> dict[str, Any]:
    """YAML, TOML or JSON by suffix."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        text = path.read_text()
        if path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text) or {}
        elif path.suffix == ".toml":
            data = tomllib.loads(text)
        elif path.suffix == ".json":
            data = json.loads(text)
        else:
            raise ConfigError(f"unsupported config format '{path.suffix}' (use .yaml, .toml or .json)")
    except (yaml.YAMLError, tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return data


class RunStatus(str, Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"
    CONSTRAINT_UNSATISFIED = "constraint_unsatisfied"


class RunRecord(BaseModel):
    """State of one run, saved to run.json."""

    id: str
    mode: str
    status: RunStatus = RunStatus.RUNNING
    version: str = Field(default_factory=package_version)
    config_hash: str
    material_preset: str
    timings: dict[str, float] = Field(default_factory=dict)
    reports: dict[str, dict[str, Any]] = Field(default_factory=dict)
    termination: str | None = None
    best_value: float | None = None
    nfe: int | None = None
    wire_length: float | None = None
    geometry_hash: str | None = None
    artifacts: list[str] = Field(default_factory=list)
    error: str | None = None
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
    updated_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class Run:
    """One run directory and its record."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.id = self.path.name
        self._record: RunRecord | None = None

    @classmethod
    def create(cls, config: RunConfig, out: Path | None = None) -> "Run":
        """New run directory; `out` overrides the default location."""
        if out is None and config.out:
            out = Path(config.out)
        digest = config.config_hash()
        if out is None:
            date_str = datetime.now().strftime("%Y-%m-%d")
            base = get_runs_dir() / f"{date_str}_{config.mode}_{digest[:8]}"
            out, n = base, 1
            while out.exists():
                n += 1
                out = base.with_name(f"{base.name}-{n}")

        run = cls(out)
        run.path.mkdir(parents=True, exist_ok=True)
        run.checkpoints_dir.mkdir(exist_ok=True)
        with open(run.config_path, "w") as f:
            json.dump(config.model_dump(mode="json"), f, indent=2, sort_keys=True)

        run._record = RunRecord(
            id=run.id,
            mode=config.mode,
            config_hash=digest,
            material_preset=config.material_name,
        )
        run.save_record()
        return run

    @classmethod
    def load(cls, path: Path | str) -> "Run":
        """Open an existing run by directory or by id under the runs directory.

        Raises:
            ConfigError: no run there.
        """
        path = Path(path)
        if not (path / "run.json").exists():
            path = get_runs_dir() / str(path)
        run = cls(path)
        if not run.record_path.exists():
            raise ConfigError(f"no run at {path}")
        run._load_record()
        return run

    @classmethod
    def list_all(cls) -> list["Run"]:
        """Runs under the runs directory, newest first."""
        runs_dir = get_runs_dir()
        if not runs_dir.exists():
            return []
        runs = [cls.load(p) for p in runs_dir.iterdir() if (p / "run.json").exists()]
        runs.sort(key=lambda r: r.record.created_at, reverse=True)
        return runs

    def _load_record(self) -> None:
        with open(self.record_path) as f:
            self._record = RunRecord(**json.load(f))

    @property
    def record(self) -> RunRecord:
        if self._record is None:
            self._load_record()
        return self._record

    def load_config(self) -> RunConfig:
        with open(self.config_path) as f:
            return RunConfig.model_validate(json.load(f))

    def save_record(self) -> None:
        self.record.updated_at = datetime.now(timezone.utc)
        with open(self.record_path, "w") as f:
            json.dump(self.record.model_dump(mode="json"), f, indent=2)

    def add_artifact(self, path: Path) -> Path:
        name = str(Path(path).relative_to(self.path))
        if name not in self.record.artifacts:
            self.record.artifacts.append(name)
        return path

    @contextmanager
    def stage(self, name: str):
        """Time a pipeline stage into the record."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record.timings[name] = self.record.timings.get(name, 0.0) + time.perf_counter() - start

    def write_report(self, report: dict[str, Any]) -> Path:
        """report.json: a deterministic report block and a metadata block."""
        doc = {
            "report": report,
            "metadata": {
                "run_id": self.id,
                "version": self.record.version,
                "written_at": datetime.now(timezone.utc).isoformat(),
                "timings": dict(self.record.timings),
            },
        }
        with open(self.report_path, "w") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
        return self.add_artifact(self.report_path)

    def read_report(self) -> dict[str, Any]:
        if not self.report_path.exists():
            raise ConfigError(f"run {self.id} has no report")
        with open(self.report_path) as f:
            return json.load(f)["report"]

    def set_status(self, status: RunStatus, error: str | None = None) -> None:
        self.record.status = status
        self.record.error = error
        self.save_record()

    # File paths
    @property
    def config_path(self) -> Path:
        return self.path / "config.json"

    @property
    def record_path(self) -> Path:
        return self.path / "run.json"

    @property
    def trace_path(self) -> Path:
        return self.path / "trace.csv"

    @property
    def convergence_path(self) -> Path:
        return self.path / "convergence.csv"

    @property
    def report_path(self) -> Path:
        return self.path / "report.json"

    @property
    def checkpoints_dir(self) -> Path:
        return self.path / "checkpoints"

    @property
    def checkpoint_path(self) -> Path:
        return self.checkpoints_dir / "direct.json"

    def get_summary(self) -> dict[str, Any]:
        r = self.record
        return {
            "id": r.id,
            "mode": r.mode,
            "status": r.status.value,
            "material_preset": r.material_preset,
            "termination": r.termination,
            "best_value": r.best_value,
            "nfe": r.nfe,
            "wire_length": r.wire_length,
            "artifacts": len(r.artifacts),
            "created_at": r.created_at.isoformat(),
            "path": str(self.path),
        }
