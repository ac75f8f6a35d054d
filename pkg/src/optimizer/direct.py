"""DIRECT global optimization over a box.

Rectangles live in the unit cube. Side lengths are 3^-k and are stored as the
integer exponents k, so sizes never drift. Each iteration selects the
potentially optimal rectangles (lower-right convex hull of size against
value), samples c ± side/3 along their longest sides, and trisects them in
order of the best sample value along each side.

Samples come in pairs while at least two evaluations of the budget remain;
a last odd evaluation becomes a spare sample, so NFE ends at max_nfe.
"""

import logging
import math
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, Field

from ..core.config import OptimizerSettings, settings
from ..core.errors import GeometryError, OptimizerError, SolverError, UsageError
from .checkpoint import read_checkpoint, write_checkpoint
from .space import DesignSpace
from .termination import TerminationConfig, TerminationReason, check_termination

logger = logging.getLogger(__name__)


@dataclass
class Hyperrectangle:
    """A rectangle of the unit cube with its evaluated center."""

    center: np.ndarray
    levels: np.ndarray
    f: float
    index: int

    @property
    def side_lengths(self) -> np.ndarray:
        return 3.0 ** (-self.levels.astype(float))

    @property
    def size(self) -> float:
        """Half the diagonal."""
        return 0.5 * math.sqrt(math.fsum(9.0 ** (-int(k)) for k in sorted(self.levels)))

    @property
    def volume(self) -> float:
        return float(np.prod(self.side_lengths))

    def longest_dims(self) -> np.ndarray:
        return np.flatnonzero(self.levels == self.levels.min())

    def to_dict(self) -> dict[str, Any]:
        return {
            "center": self.center.tolist(),
            "levels": self.levels.tolist(),
            "f": self.f,
            "index": self.index,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Hyperrectangle":
        return cls(
            center=np.array(data["center"], dtype=float),
            levels=np.array(data["levels"], dtype=int),
            f=float(data["f"]),
            index=int(data["index"]),
        )


@dataclass(frozen=True)
class ObjectiveResult:
    """Objective output with the charging energy for the penalty."""

    raw: float
    ec_ghz: float | None = None
    extras: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class PenaltySpec:
    """beta * max(0, E_C - threshold)² added to the raw objective."""

    beta: float
    threshold_ghz: float = 0.35

    def __call__(self, ec_ghz: float | None) -> float:
        if ec_ghz is None:
            return 0.0
        return self.beta * max(0.0, ec_ghz - self.threshold_ghz) ** 2


class EvaluationRecord(BaseModel):
    """One objective evaluation as it appears in the trace."""

    nfe: int
    x: list[float]
    raw: float | None
    penalty: float = 0.0
    ec_ghz: float | None = None
    value: float
    sentinel: bool = False
    error: str | None = None
    wall_time: float = 0.0
    extras: dict[str, Any] = Field(default_factory=dict)


@dataclass
class OptimizerState:
    rectangles: list[Hyperrectangle] = field(default_factory=list)
    history: list[EvaluationRecord] = field(default_factory=list)
    iteration_log: list[float] = field(default_factory=list)
    iteration: int = 0
    # Single samples taken when one evaluation was left; no rectangle owns them.
    spare: list[dict[str, Any]] = field(default_factory=list)

    @property
    def nfe(self) -> int:
        return len(self.history)

    @property
    def best(self) -> Hyperrectangle:
        return min(self.rectangles, key=lambda r: (r.f, r.index))

    @property
    def best_record(self) -> EvaluationRecord:
        """Best evaluation, spare samples included."""
        return min(self.history, key=lambda r: (r.value, r.nfe))

    @property
    def best_value(self) -> float:
        return self.best_record.value

    @property
    def sentinel_count(self) -> int:
        return sum(record.sentinel for record in self.history)

    @property
    def max_finite(self) -> float | None:
        values = [abs(r.value) for r in self.history if not r.sentinel]
        return max(values) if values else None

    def total_volume(self) -> float:
        return math.fsum(r.volume for r in self.rectangles)


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    best_x: np.ndarray
    best_value: float
    best_record: EvaluationRecord
    history: list[EvaluationRecord]
    iteration_log: list[float]
    termination: TerminationReason
    nfe: int
    iterations: int

    def best_so_far(self) -> list[float]:
        """Running minimum of the objective over the trace."""
        return np.minimum.accumulate([r.value for r in self.history]).tolist()


def potentially_optimal(rectangles: Sequence[Hyperrectangle], epsilon: float = 1e-4) -> list[int]:
    """Positions of the potentially optimal rectangles.

    Rectangle j qualifies iff some K > 0 gives f_j - K d_j <= f_k - K d_k for
    all k and f_j - K d_j <= f_min - epsilon |f_min|. Only the minimum of each
    size class can qualify; ties at that minimum all do. The result is ordered
    largest size first, then by evaluation index.
    """
    if not rectangles:
        return []

    d = np.array([r.size for r in rectangles])
    f = np.array([r.f for r in rectangles])
    f_min = float(f.min())
    sizes = np.unique(d)
    group_min = np.array([f[d == s].min() for s in sizes])
    slack = epsilon * abs(f_min)

    chosen = []
    for g, s in enumerate(sizes):
        fj = group_min[g]
        lower = np.max((fj - group_min[:g]) / (s - sizes[:g])) if g > 0 else -np.inf
        upper = np.min((group_min[g + 1 :] - fj) / (sizes[g + 1 :] - s)) if g < len(sizes) - 1 else np.inf
        if upper <= 0:
            continue
        if max(lower, (fj - f_min + slack) / s) > upper:
            continue
        chosen.extend(np.flatnonzero((d == s) & (f == fj)).tolist())

    return sorted(chosen, key=lambda i: (-d[i], rectangles[i].index))


def sample_centers(rect: Hyperrectangle, dims: Sequence[int]) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """(dim, c + side/3 e_dim, c - side/3 e_dim) for each dimension."""
    out = []
    for dim in dims:
        step = 3.0 ** (-int(rect.levels[dim])) / 3.0
        plus, minus = rect.center.copy(), rect.center.copy()
        plus[dim] += step
        minus[dim] -= step
        out.append((int(dim), plus, minus))
    return out


def divide(
    rect: Hyperrectangle,
    samples: Sequence[tuple[int, Hyperrectangle, Hyperrectangle]],
) -> list[Hyperrectangle]:
    """Trisect `rect` along the sampled dimensions, best sample value first.

    Ties keep ascending dimension order. `rect` keeps its center and shrinks
    on every divided dimension; children shrink on the dimensions divided up
    to and including their own.
    """
    order = sorted(samples, key=lambda s: min(s[1].f, s[2].f))
    children = []
    for dim, plus, minus in order:
        rect.levels[dim] += 1
        for child in (plus, minus):
            child.levels = rect.levels.copy()
            children.append(child)
    return children


def trisect(
    rect: Hyperrectangle,
    objective: Callable[[np.ndarray], float],
    next_index: int = 1,
) -> list[Hyperrectangle]:
    """Sample all longest sides of `rect` and divide it; returns the children.

    `objective` takes points of the unit cube.
    """
    samples = []
    for dim, plus, minus in sample_centers(rect, rect.longest_dims()):
        a = Hyperrectangle(plus, rect.levels.copy(), float(objective(plus)), next_index)
        b = Hyperrectangle(minus, rect.levels.copy(), float(objective(minus)), next_index + 1)
        next_index += 2
        samples.append((dim, a, b))
    return divide(rect, samples)


Objective = Callable[[np.ndarray], "float | ObjectiveResult"]
BatchCallback = Callable[[list[EvaluationRecord]], None]


class DirectOptimizer:
    """DIRECT over a design space; one instance owns one state."""

    def __init__(
        self,
        objective: Objective,
        space: DesignSpace,
        termination: TerminationConfig | None = None,
        penalty: PenaltySpec | None = None,
        config: OptimizerSettings | None = None,
        checkpoint_path: Path | None = None,
        on_batch: BatchCallback | None = None,
    ):
        self.objective = objective
        self.space = space
        self.config = config or settings.optimizer
        self.termination = termination or TerminationConfig.from_settings(self.config)
        self.penalty = penalty
        self.checkpoint_path = checkpoint_path
        self.on_batch = on_batch
        self.state = OptimizerState()

    def _evaluate_one(self, nfe: int, u: np.ndarray) -> EvaluationRecord:
        x = self.space.denormalize(u)
        start = time.perf_counter()
        try:
            out = self.objective(x)
        except (GeometryError, SolverError) as e:
            logger.debug("Evaluation %d failed: %s", nfe, e)
            return EvaluationRecord(
                nfe=nfe, x=x.tolist(), raw=None, value=math.nan, sentinel=True,
                error=f"{type(e).__name__}: {e}", wall_time=time.perf_counter() - start,
            )

        result = out if isinstance(out, ObjectiveResult) else ObjectiveResult(raw=float(out))
        pen = self.penalty(result.ec_ghz) if self.penalty else 0.0
        value = result.raw + pen
        elapsed = time.perf_counter() - start
        if not math.isfinite(value):
            return EvaluationRecord(
                nfe=nfe, x=x.tolist(), raw=result.raw, ec_ghz=result.ec_ghz, value=math.nan,
                sentinel=True, error="non-finite objective", wall_time=elapsed,
            )
        return EvaluationRecord(
            nfe=nfe,
            x=x.tolist(),
            raw=result.raw,
            penalty=pen,
            ec_ghz=result.ec_ghz,
            value=value,
            wall_time=elapsed,
            extras=result.extras,
        )

    def _evaluate_batch(self, points: list[np.ndarray]) -> list[EvaluationRecord]:
        if not points:
            return []
        first = self.state.nfe + 1
        jobs = [(first + k, u) for k, u in enumerate(points)]
        if self.config.workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                records = list(pool.map(lambda job: self._evaluate_one(*job), jobs))
        else:
            records = [self._evaluate_one(*job) for job in jobs]

        # Sentinels depend only on earlier evaluations, in index order.
        largest = self.state.max_finite
        for record in records:
            if record.sentinel:
                record.value = max(10.0 * largest, self.config.sentinel_floor) if largest else self.config.sentinel_floor
            else:
                largest = abs(record.value) if largest is None else max(largest, abs(record.value))

        self.state.history.extend(records)
        if self.on_batch:
            self.on_batch(records)
        return records

    def _check_sentinels(self) -> None:
        nfe, bad = self.state.nfe, self.state.sentinel_count
        if nfe >= 10 and bad / nfe > self.config.max_sentinel_rate:
            raise OptimizerError(
                f"{bad} of {nfe} evaluations failed; last error: "
                f"{next(r.error for r in reversed(self.state.history) if r.sentinel)}"
            )

    def initialize(self) -> None:
        if self.state.rectangles:
            raise UsageError("optimizer already initialized")
        center = np.full(self.space.n, 0.5)
        record = self._evaluate_batch([center])[0]
        self.state.rectangles.append(
            Hyperrectangle(center, np.zeros(self.space.n, dtype=int), record.value, record.nfe)
        )

    def _iterate(self, selected: list[int]) -> bool:
        """Sample and divide; False when nothing could be done."""
        state = self.state
        remaining = self.termination.max_nfe - state.nfe

        plans = []
        for pos in selected:
            rect = state.rectangles[pos]
            dims = []
            for dim in rect.longest_dims():
                if remaining < 2:
                    break
                dims.append(int(dim))
                remaining -= 2
            if dims:
                plans.append((rect, sample_centers(rect, dims)))

        points = [p for _, samples in plans for _, plus, minus in samples for p in (plus, minus)]
        records = iter(self._evaluate_reusing_spares(points))

        for rect, samples in plans:
            evaluated = []
            for dim, plus, minus in samples:
                a, b = next(records), next(records)
                evaluated.append(
                    (
                        dim,
                        Hyperrectangle(plus, rect.levels.copy(), a.value, a.nfe),
                        Hyperrectangle(minus, rect.levels.copy(), b.value, b.nfe),
                    )
                )
            state.rectangles.extend(divide(rect, evaluated))

        if remaining == 1:
            return self._single_sample(selected, plans) or bool(plans)
        return bool(plans)

    def _single_sample(self, selected: list[int], plans: list) -> bool:
        """Spend a last odd evaluation on c +- side/3 of an undivided longest side.

        The sample is kept as a spare: it joins the history and the best
        value, and a later trisection of the same side reuses it.
        """
        planned = {id(rect): {dim for dim, _, _ in samples} for rect, samples in plans}
        taken = {tuple(s["center"]) for s in self.state.spare}
        for pos in selected:
            rect = self.state.rectangles[pos]
            free = [int(d) for d in rect.longest_dims() if int(d) not in planned.get(id(rect), set())]
            for _, plus, minus in sample_centers(rect, free):
                for point in (plus, minus):
                    if tuple(point.tolist()) in taken:
                        continue
                    record = self._evaluate_batch([point])[0]
                    self.state.spare.append({"center": point.tolist(), "nfe": record.nfe})
                    return True
        return False

    def _evaluate_reusing_spares(self, points: list[np.ndarray]) -> list[EvaluationRecord]:
        spares = {tuple(s["center"]): s for s in self.state.spare}
        reused = {}
        for k, u in enumerate(points):
            spare = spares.get(tuple(u.tolist()))
            if spare is not None:
                reused[k] = self.state.history[spare["nfe"] - 1]
                self.state.spare.remove(spare)
        fresh = iter(self._evaluate_batch([u for k, u in enumerate(points) if k not in reused]))
        return [reused[k] if k in reused else next(fresh) for k in range(len(points))]

    def state_dict(self) -> dict[str, Any]:
        return {
            "space": self.space.to_dict(),
            "termination": self.termination.model_dump(),
            "iteration": self.state.iteration,
            "iteration_log": self.state.iteration_log,
            "rectangles": [r.to_dict() for r in self.state.rectangles],
            "history": [r.model_dump() for r in self.state.history],
            "spare": self.state.spare,
        }

    @classmethod
    def resume(
        cls,
        path: Path,
        objective: Objective,
        termination: TerminationConfig | None = None,
        **kwargs,
    ) -> "DirectOptimizer":
        """Reload a checkpoint; `termination` may extend the original budget."""
        doc = read_checkpoint(path)
        space = DesignSpace.from_bounds(doc.space)
        termination = termination or TerminationConfig(**doc.termination)
        optimizer = cls(objective, space, termination, checkpoint_path=path, **kwargs)
        optimizer.state = OptimizerState(
            rectangles=[Hyperrectangle.from_dict(r) for r in doc.rectangles],
            history=[EvaluationRecord(**r) for r in doc.history],
            iteration_log=list(doc.iteration_log),
            iteration=doc.iteration,
            spare=[dict(s) for s in doc.spare],
        )
        logger.info("Resumed at iteration %d with %d evaluations", doc.iteration, optimizer.state.nfe)
        return optimizer

    def run(self) -> OptimizationResult:
        """Iterate until a stopping rule fires."""
        state = self.state
        if not state.rectangles:
            self.initialize()

        while True:
            reason = check_termination(state, self.termination)
            if reason != TerminationReason.CONTINUE:
                break

            selected = potentially_optimal(state.rectangles, self.termination.epsilon)
            f_current = min(state.rectangles[i].f for i in selected)
            state.iteration_log.append(f_current)

            reason = check_termination(state, self.termination)
            if reason != TerminationReason.CONTINUE:
                break

            if not self._iterate(selected):
                # One evaluation left and every candidate side already sampled.
                reason = TerminationReason.MAX_NFE
                break
            state.iteration += 1
            logger.info(
                "Iteration %d: NFE %d, f_current %.6g, best %.6g, %d potentially optimal",
                state.iteration,
                state.nfe,
                f_current,
                state.best_value,
                len(selected),
            )
            if self.checkpoint_path and self.config.checkpoint:
                write_checkpoint(self.checkpoint_path, self.state_dict())
            self._check_sentinels()

        best = state.best_record
        logger.info("Stopped by %s after %d evaluations, best %.6g", reason.value, state.nfe, best.value)
        return OptimizationResult(
            best_x=np.array(best.x, dtype=float),
            best_value=best.value,
            best_record=best,
            history=list(state.history),
            iteration_log=list(state.iteration_log),
            termination=reason,
            nfe=state.nfe,
            iterations=state.iteration,
        )


def minimize(
    objective: Objective,
    space: DesignSpace,
    termination: TerminationConfig | None = None,
    penalty: PenaltySpec | None = None,
    **kwargs,
) -> OptimizationResult:
    """Run DIRECT from scratch."""
    return DirectOptimizer(objective, space, termination, penalty, **kwargs).run()
