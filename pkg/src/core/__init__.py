from .config import settings, get_material_config
from .database import Database, get_db
from .errors import QubitShapeError
from .run import Run, RunConfig, RunStatus

__all__ = [
    "settings",
    "get_material_config",
    "Database",
    "get_db",
    "QubitShapeError",
    "Run",
    "RunConfig",
    "RunStatus",
]
