"""Versioned JSON checkpoints of the optimizer state."""

import json
import logging
import os
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ValidationError

from ..core.errors import ConfigError

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class Checkpoint(BaseModel):
    version: int = CHECKPOINT_VERSION
    space: dict[str, list[float]]
    termination: dict[str, Any]
    iteration: int
    iteration_log: list[float]
    rectangles: list[dict[str, Any]]
    history: list[dict[str, Any]]
    spare: list[dict[str, Any]] = []


def write_checkpoint(path: Path, state: dict[str, Any]) -> Path:
    """Write atomically: a partial file never replaces a good one."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = Checkpoint(**state)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as f:
        f.write(doc.model_dump_json())
    os.replace(tmp, path)
    logger.debug("Checkpoint at iteration %d written to %s", doc.iteration, path)
    return path


def read_checkpoint(path: Path) -> Checkpoint:
    """Load a checkpoint.

    Raises:
        ConfigError: missing, unreadable, or of another version.
    """
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read checkpoint {path}: {e}") from e

    if data.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"checkpoint {path} has version {data.get('version')}, expected {CHECKPOINT_VERSION}")
    try:
        return Checkpoint(**data)
    except ValidationError as e:
        raise ConfigError(f"invalid checkpoint {path}: {e}") from e
