"""SQLite registry of runs, their artifacts and their evaluations."""

from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from sqlalchemy import (
    Column,
    DateTime,
    Float,
    ForeignKey,
    Integer,
    String,
    Text,
    create_engine,
)
from sqlalchemy.exc import IntegrityError
from sqlalchemy.orm import Session, declarative_base, relationship, sessionmaker

from .config import get_database_path
from .errors import ConfigError

Base = declarative_base()


def _now() -> datetime:
    return datetime.now(timezone.utc)


class RunRow(Base):
    """One run directory."""

    __tablename__ = "runs"

    id = Column(String, primary_key=True)
    mode = Column(String, nullable=False)
    status = Column(String, default="running")
    path = Column(Text, nullable=False)
    material_preset = Column(String, nullable=True)
    termination = Column(String, nullable=True)
    best_value = Column(Float, nullable=True)
    nfe = Column(Integer, nullable=True)
    created_at = Column(DateTime, default=_now)
    updated_at = Column(DateTime, default=_now, onupdate=_now)

    artifacts = relationship("ArtifactRow", back_populates="run")
    evaluations = relationship("EvaluationRow", back_populates="run")


class ArtifactRow(Base):
    """A file written by a run; a path belongs to one run only."""

    __tablename__ = "artifacts"

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String, ForeignKey("runs.id"), nullable=False)
    kind = Column(String, nullable=False)  # trace, geometry, report, convergence, ...
    path = Column(Text, nullable=False, unique=True)
    created_at = Column(DateTime, default=_now)

    run = relationship("RunRow", back_populates="artifacts")


class EvaluationRow(Base):
    """One objective evaluation of an optimization run."""

    __tablename__ = "evaluations"

    id = Column(Integer, primary_key=True, autoincrement=True)
    run_id = Column(String, ForeignKey("runs.id"), nullable=False)
    nfe = Column(Integer, nullable=False)
    objective = Column(Float, nullable=True)
    penalty = Column(Float, nullable=True)
    ec_ghz = Column(Float, nullable=True)
    sentinel = Column(Integer, default=0)

    run = relationship("RunRow", back_populates="evaluations")


class Database:
    """Database interface for the run registry."""

    def __init__(self, db_path: Optional[Path] = None):
        self.db_path = db_path or get_database_path()
        self.db_path.parent.mkdir(parents=True, exist_ok=True)

        self.engine = create_engine(f"sqlite:///{self.db_path}", echo=False)
        Base.metadata.create_all(self.engine)
        self.SessionLocal = sessionmaker(bind=self.engine, expire_on_commit=False)

    def get_session(self) -> Session:
        """Get a new database session."""
        return self.SessionLocal()

    # Run operations
    def register_run(self, run_id: str, mode: str, path: str, material_preset: str | None = None) -> RunRow:
        """Create or refresh the row of a run."""
        with self.get_session() as session:
            row = session.get(RunRow, run_id)
            if row is None:
                row = RunRow(id=run_id, mode=mode, path=path, material_preset=material_preset)
                session.add(row)
            else:
                row.path = path
                row.status = "running"
            session.commit()
            return row

    def get_run(self, run_id: str) -> Optional[RunRow]:
        with self.get_session() as session:
            return session.get(RunRow, run_id)

    def update_run(self, run_id: str, **kwargs) -> Optional[RunRow]:
        """Update run fields."""
        with self.get_session() as session:
            row = session.get(RunRow, run_id)
            if row:
                for key, value in kwargs.items():
                    if hasattr(row, key):
                        setattr(row, key, value)
                session.commit()
            return row

    def list_runs(self, mode: Optional[str] = None, limit: int | None = None) -> list[RunRow]:
        """Runs, newest first, optionally filtered by mode."""
        with self.get_session() as session:
            query = session.query(RunRow)
            if mode:
                query = query.filter_by(mode=mode)
            query = query.order_by(RunRow.created_at.desc())
            if limit:
                query = query.limit(limit)
            return query.all()

    # Artifacts
    def add_artifact(self, run_id: str, kind: str, path: str) -> ArtifactRow:
        """Record an artifact; re-adding the same path for the same run is a no-op.

        Raises:
            ConfigError: the path already belongs to another run.
        """
        with self.get_session() as session:
            existing = session.query(ArtifactRow).filter_by(path=path).first()
            if existing is not None:
                if existing.run_id != run_id:
                    raise ConfigError(f"{path} is already an artifact of run {existing.run_id}")
                return existing
            row = ArtifactRow(run_id=run_id, kind=kind, path=path)
            session.add(row)
            try:
                session.commit()
            except IntegrityError as e:
                session.rollback()
                raise ConfigError(f"cannot register artifact {path}: {e}") from e
            return row

    def get_artifacts(self, run_id: str) -> list[ArtifactRow]:
        with self.get_session() as session:
            return session.query(ArtifactRow).filter_by(run_id=run_id).order_by(ArtifactRow.id).all()

    # Evaluations
    def set_evaluations(self, run_id: str, records: list[dict]) -> int:
        """Replace the evaluation rows of a run; returns the number stored."""
        with self.get_session() as session:
            session.query(EvaluationRow).filter_by(run_id=run_id).delete()
            session.add_all(
                EvaluationRow(
                    run_id=run_id,
                    nfe=r["nfe"],
                    objective=r.get("value"),
                    penalty=r.get("penalty"),
                    ec_ghz=r.get("ec_ghz"),
                    sentinel=int(bool(r.get("sentinel", False))),
                )
                for r in records
            )
            session.commit()
            return len(records)

    def get_evaluations(self, run_id: str) -> list[EvaluationRow]:
        with self.get_session() as session:
            return session.query(EvaluationRow).filter_by(run_id=run_id).order_by(EvaluationRow.nfe).all()


# Global database instance
_db: Optional[Database] = None


def get_db() -> Database:
    """Get or create the global database instance."""
    global _db
    if _db is None:
        _db = Database()
    return _db


def reset_db() -> None:
    """Drop the global instance, e.g. after the database path changed."""
    global _db
    _db = None
