"""Tests for DIRECT: selection, trisection, stopping, resume and failure handling."""

import json
from types import SimpleNamespace

import numpy as np
import pytest

from src.core.config import OptimizerSettings
from src.core.errors import ConfigError, InfeasibleGeometryError, OptimizerError, UsageError
from src.optimizer import (
    DesignSpace,
    DirectOptimizer,
    Hyperrectangle,
    ObjectiveResult,
    PenaltySpec,
    TerminationConfig,
    TerminationReason,
    check_termination,
    minimize,
    potentially_optimal,
    read_checkpoint,
    trisect,
    write_checkpoint,
)


def unit_square(n: int = 2) -> DesignSpace:
    return DesignSpace(tuple(f"x{i}" for i in range(n)), np.zeros(n), np.ones(n))


def brute_force_optimal(rects, epsilon):
    """Rectangle j qualifies iff an admissible slope K > 0 exists."""
    d = [r.size for r in rects]
    f = [r.f for r in rects]
    f_min = min(f)
    out = set()
    for j in range(len(rects)):
        if any(d[k] == d[j] and f[k] < f[j] for k in range(len(rects))):
            continue
        lower = max(((f[j] - f[k]) / (d[j] - d[k]) for k in range(len(rects)) if d[k] < d[j]), default=-np.inf)
        upper = min(((f[k] - f[j]) / (d[k] - d[j]) for k in range(len(rects)) if d[k] > d[j]), default=np.inf)
        if upper <= 0:
            continue
        if max(lower, (f[j] - f_min + epsilon * abs(f_min)) / d[j]) <= upper:
            out.add(j)
    return out


# ==================== Potentially optimal selection ====================


@pytest.mark.parametrize("epsilon", [0.0, 1e-4, 1e-2])
def test_potentially_optimal_matches_brute_force(epsilon):
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n_dims = int(rng.integers(2, 4))
        n_rects = int(rng.integers(1, 15))
        rects = []
        for index in range(1, n_rects + 1):
            levels = rng.integers(0, 4, size=n_dims)
            f = float(rng.integers(-3, 4)) if rng.random() < 0.3 else float(rng.normal())
            rects.append(Hyperrectangle(np.full(n_dims, 0.5), levels, f, index))

        chosen = potentially_optimal(rects, epsilon)
        assert set(chosen) == brute_force_optimal(rects, epsilon)
        assert len(chosen) == len(set(chosen))


def test_potentially_optimal_orders_largest_first():
    rects = [
        Hyperrectangle(np.array([0.5, 0.5]), np.array([1, 1]), 0.0, 1),
        Hyperrectangle(np.array([0.5, 0.5]), np.array([0, 1]), 1.0, 2),
        Hyperrectangle(np.array([0.5, 0.5]), np.array([0, 0]), 2.0, 3),
    ]
    chosen = potentially_optimal(rects, 0.0)
    assert chosen == [2, 1, 0]


def test_potentially_optimal_always_includes_a_best_rectangle():
    rects = [
        Hyperrectangle(np.array([0.5]), np.array([2]), -5.0, 1),
        Hyperrectangle(np.array([0.5]), np.array([0]), 3.0, 2),
    ]
    assert 0 in potentially_optimal(rects, 1e-4)


def test_potentially_optimal_empty():
    assert potentially_optimal([]) == []


# ==================== Trisection ====================


def test_trisect_one_dimension():
    rect = Hyperrectangle(np.array([0.5]), np.array([0]), 0.09, 1)
    children = trisect(rect, lambda u: float((u[0] - 0.8) ** 2), next_index=2)

    assert [c.center[0] for c in children] == pytest.approx([5 / 6, 1 / 6])
    assert [c.index for c in children] == [2, 3]
    assert all(c.levels.tolist() == [1] for c in children)
    assert rect.levels.tolist() == [1]
    assert rect.center[0] == 0.5


def test_trisect_divides_best_dimension_first():
    def f(u):
        return float((u[0] - 0.5) ** 2 + 10 * (u[1] - 0.9) ** 2)

    rect = Hyperrectangle(np.array([0.5, 0.5]), np.array([0, 0]), f([0.5, 0.5]), 1)
    children = trisect(rect, f, next_index=2)

    assert len(children) == 4
    dim1 = [c for c in children if c.center[0] == 0.5]
    dim0 = [c for c in children if c.center[1] == 0.5]
    assert all(c.levels.tolist() == [0, 1] for c in dim1)
    assert all(c.levels.tolist() == [1, 1] for c in dim0)
    assert rect.levels.tolist() == [1, 1]
    assert children[0].center[0] == 0.5
    assert sum(c.volume for c in children) + rect.volume == pytest.approx(1.0)


def test_hyperrectangle_geometry():
    rect = Hyperrectangle(np.array([0.5, 0.5]), np.array([0, 1]), 0.0, 1)
    assert rect.volume == pytest.approx(1 / 3)
    assert rect.size == pytest.approx(0.5 * np.sqrt(1 + 1 / 9))
    assert rect.longest_dims().tolist() == [0]


# ==================== Termination ====================


def progress(nfe=1, iteration=0, log=()):
    return SimpleNamespace(nfe=nfe, iteration=iteration, iteration_log=list(log))


def test_termination_needs_a_full_window():
    config = TerminationConfig()
    assert check_termination(progress(log=[1e-4] * 3), config) == TerminationReason.CONTINUE


def test_termination_dynamic_both_criteria():
    config = TerminationConfig()
    log = [1.0000004e-4] * 3 + [1e-4]
    assert check_termination(progress(log=log), config) == TerminationReason.DYNAMIC


def test_termination_combine_and_or():
    log = [1.001] * 3 + [1.0]
    assert check_termination(progress(log=log), TerminationConfig()) == TerminationReason.CONTINUE
    assert check_termination(progress(log=log), TerminationConfig(combine="or")) == TerminationReason.DYNAMIC


def test_termination_dynamic_disabled():
    log = [1e-4] * 10
    assert check_termination(progress(log=log), TerminationConfig(dynamic=False)) == TerminationReason.CONTINUE


def test_termination_budget():
    config = TerminationConfig(max_nfe=360)
    assert check_termination(progress(nfe=359), config) == TerminationReason.CONTINUE
    assert check_termination(progress(nfe=360), config) == TerminationReason.MAX_NFE
    assert check_termination(progress(nfe=361), config) == TerminationReason.MAX_NFE


def test_termination_budget_before_dynamic():
    log = [1e-4] * 4
    assert check_termination(progress(nfe=400, log=log), TerminationConfig()) == TerminationReason.MAX_NFE


def test_termination_iteration_cap():
    config = TerminationConfig(max_iterations=5)
    assert check_termination(progress(iteration=5), config) == TerminationReason.MAX_ITERATIONS
    assert check_termination(progress(iteration=4), config) == TerminationReason.CONTINUE


def test_termination_from_settings_ignores_none_overrides():
    config = TerminationConfig.from_settings(OptimizerSettings(), max_nfe=None, window=5)
    assert config.max_nfe == 100
    assert config.window == 5


# ==================== Design space ====================


def test_design_space_normalization():
    space = DesignSpace.from_bounds({"a": [0, 10], "b": [5, 5]})
    assert space.normalize([2.5, 5]).tolist() == [0.25, 0.5]
    assert space.denormalize([0.25, 0.9]).tolist() == [2.5, 5.0]
    assert space.fixed.tolist() == [False, True]
    assert space.to_dict() == {"a": [0.0, 10.0], "b": [5.0, 5.0]}


def test_design_space_rejects_inverted_bounds():
    with pytest.raises(ConfigError, match="'b'"):
        DesignSpace.from_bounds({"a": [0, 1], "b": [2, 1]})


def test_design_space_rejects_wrong_shape():
    with pytest.raises(UsageError):
        unit_square(2).denormalize([0.5, 0.5, 0.5])


# ==================== Runs ====================


def test_constant_objective_stops_dynamically():
    result = minimize(lambda x: 1.0, unit_square(), TerminationConfig(max_nfe=1000))
    assert result.termination == TerminationReason.DYNAMIC
    assert result.iterations == 3
    assert len(result.iteration_log) == 4


def test_budget_is_respected(sphere):
    result = minimize(sphere, unit_square(), TerminationConfig(max_nfe=360, dynamic=False))
    assert result.termination == TerminationReason.MAX_NFE
    assert result.nfe == 360
    assert len(result.history) == 360


def test_budget_of_one_returns_center(sphere):
    space = DesignSpace.from_bounds({"a": [0, 4], "b": [-2, 0]})
    result = minimize(sphere, space, TerminationConfig(max_nfe=1))
    assert result.nfe == 1
    assert result.best_x.tolist() == [2.0, -1.0]
    assert result.best_value == 5.0


def test_even_budget_ends_on_a_spare_sample():
    optimizer = DirectOptimizer(lambda x: -float(x[0]), unit_square(), TerminationConfig(max_nfe=2, dynamic=False))
    result = optimizer.run()

    assert result.nfe == 2
    assert result.termination == TerminationReason.MAX_NFE
    assert len(optimizer.state.rectangles) == 1
    assert optimizer.state.spare == [{"center": pytest.approx([5 / 6, 0.5]), "nfe": 2}]
    assert result.best_value == pytest.approx(-5 / 6)
    assert result.best_x.tolist() == pytest.approx([5 / 6, 0.5])


def test_resume_reuses_the_spare_sample(tmp_path):
    def objective(x):
        return -float(x[0])

    checkpoint = tmp_path / "direct.json"
    DirectOptimizer(
        objective,
        unit_square(),
        TerminationConfig(max_nfe=2, dynamic=False),
        config=OptimizerSettings(checkpoint=True),
        checkpoint_path=checkpoint,
    ).run()

    optimizer = DirectOptimizer.resume(checkpoint, objective, TerminationConfig(max_nfe=5, dynamic=False))
    result = optimizer.run()

    assert result.nfe == 5
    points = [tuple(r.x) for r in result.history]
    assert len(set(points)) == len(points)
    assert points[1] == pytest.approx((5 / 6, 0.5))
    assert optimizer.state.total_volume() == pytest.approx(1.0, abs=1e-12)
    assert len(optimizer.state.rectangles) + len(optimizer.state.spare) == result.nfe


def test_shifted_sphere():
    space = DesignSpace.from_bounds({"a": [-1, 1], "b": [-1, 1]})
    result = minimize(
        lambda x: float((x[0] - 0.3) ** 2 + (x[1] + 0.55) ** 2),
        space,
        TerminationConfig(max_nfe=200, dynamic=False),
    )
    assert result.best_value <= 5e-3
    assert result.best_so_far()[-1] == result.best_value
    assert result.best_so_far() == sorted(result.best_so_far(), reverse=True)


def test_six_hump_camel(camel):
    a, b = np.meshgrid(np.linspace(-3, 3, 1000), np.linspace(-2, 2, 1000))
    grid = (4 - 2.1 * a**2 + a**4 / 3) * a**2 + a * b + (-4 + 4 * b**2) * b**2
    grid_min = float(grid.min())

    space = DesignSpace.from_bounds({"a": [-3, 3], "b": [-2, 2]})
    result = minimize(camel, space, TerminationConfig(max_nfe=300, dynamic=False))
    assert result.best_value <= grid_min + 0.01 * abs(grid_min)


def test_runs_are_deterministic(camel):
    space = DesignSpace.from_bounds({"a": [-3, 3], "b": [-2, 2]})
    config = TerminationConfig(max_nfe=80, dynamic=False)
    first = minimize(camel, space, config)
    second = minimize(camel, space, config)
    assert [r.x for r in first.history] == [r.x for r in second.history]
    assert first.best_x.tolist() == second.best_x.tolist()


def test_parallel_workers_match_serial(camel):
    space = DesignSpace.from_bounds({"a": [-3, 3], "b": [-2, 2]})
    config = TerminationConfig(max_nfe=80, dynamic=False)
    serial = minimize(camel, space, config, config=OptimizerSettings(workers=1))
    parallel = minimize(camel, space, config, config=OptimizerSettings(workers=4))
    assert [r.x for r in parallel.history] == [r.x for r in serial.history]
    assert [r.nfe for r in parallel.history] == list(range(1, 81))


def test_rectangles_tile_the_cube(camel):
    space = DesignSpace.from_bounds({"a": [-3, 3], "b": [-2, 2]})
    optimizer = DirectOptimizer(camel, space, TerminationConfig(max_nfe=120, dynamic=False))
    optimizer.run()
    assert optimizer.state.total_volume() == pytest.approx(1.0, abs=1e-12)
    assert len(optimizer.state.rectangles) + len(optimizer.state.spare) == optimizer.state.nfe


def test_on_batch_sees_every_evaluation(sphere):
    seen = []
    minimize(sphere, unit_square(), TerminationConfig(max_nfe=41, dynamic=False), on_batch=seen.extend)
    assert [r.nfe for r in seen] == list(range(1, 42))


def test_resume_continues_like_an_uninterrupted_run(tmp_path, camel):
    space = DesignSpace.from_bounds({"a": [-3, 3], "b": [-2, 2]})
    checkpoint = tmp_path / "checkpoints" / "direct.json"

    stopped = DirectOptimizer(
        camel,
        space,
        TerminationConfig(max_nfe=60, max_iterations=3, dynamic=False),
        config=OptimizerSettings(checkpoint=True),
        checkpoint_path=checkpoint,
    ).run()
    assert stopped.termination == TerminationReason.MAX_ITERATIONS
    assert checkpoint.exists()

    resumed = DirectOptimizer.resume(checkpoint, camel, TerminationConfig(max_nfe=60, dynamic=False)).run()
    full = minimize(camel, space, TerminationConfig(max_nfe=60, dynamic=False))

    assert [r.x for r in resumed.history] == [r.x for r in full.history]
    assert [r.value for r in resumed.history] == [r.value for r in full.history]
    assert resumed.best_x.tolist() == full.best_x.tolist()
    assert resumed.iterations == full.iterations


def test_failed_evaluations_become_sentinels():
    def objective(x):
        if x[0] > 0.6:
            raise InfeasibleGeometryError("outside")
        return float((x[0] - 0.2) ** 2 + (x[1] - 0.2) ** 2)

    result = minimize(objective, unit_square(), TerminationConfig(max_nfe=51, dynamic=False))
    sentinels = [r for r in result.history if r.sentinel]

    assert sentinels
    assert all(np.isfinite(r.value) and r.value >= 1.0 for r in sentinels)
    assert all("InfeasibleGeometryError" in r.error for r in sentinels)
    assert not result.best_record.sentinel
    assert result.best_value < 0.05


def test_non_finite_objective_is_a_sentinel():
    result = minimize(
        lambda x: float("inf") if x[1] > 0.7 else float(x[0]),
        unit_square(),
        TerminationConfig(max_nfe=21, dynamic=False),
    )
    assert all(np.isfinite(r.value) for r in result.history)
    assert any(r.sentinel and r.error == "non-finite objective" for r in result.history)


def test_mostly_failing_objective_aborts():
    def objective(x):
        raise InfeasibleGeometryError("never feasible")

    with pytest.raises(OptimizerError, match="never feasible"):
        minimize(objective, unit_square(), TerminationConfig(max_nfe=100))


def test_penalty_composition():
    penalty = PenaltySpec(beta=1.0, threshold_ghz=0.35)
    assert penalty(0.4) == pytest.approx(2.5e-3)
    assert penalty(0.3) == 0.0
    assert penalty(None) == 0.0

    result = minimize(
        lambda x: ObjectiveResult(raw=float(x[0]), ec_ghz=0.45),
        unit_square(1),
        TerminationConfig(max_nfe=1),
        penalty=penalty,
    )
    record = result.best_record
    assert record.penalty == pytest.approx(1e-2)
    assert record.value == pytest.approx(record.raw + 1e-2)


# ==================== Checkpoints ====================


def test_checkpoint_round_trip(tmp_path):
    state = {
        "space": {"a": [0.0, 1.0]},
        "termination": TerminationConfig().model_dump(),
        "iteration": 2,
        "iteration_log": [0.5, 0.25],
        "rectangles": [],
        "history": [],
    }
    path = write_checkpoint(tmp_path / "direct.json", state)
    doc = read_checkpoint(path)
    assert doc.iteration == 2
    assert doc.iteration_log == [0.5, 0.25]
    assert not (tmp_path / "direct.json.tmp").exists()


def test_checkpoint_version_mismatch(tmp_path):
    path = tmp_path / "direct.json"
    path.write_text(json.dumps({"version": 2}))
    with pytest.raises(ConfigError, match="version"):
        read_checkpoint(path)


def test_checkpoint_missing(tmp_path):
    with pytest.raises(ConfigError):
        read_checkpoint(tmp_path / "absent.json")
