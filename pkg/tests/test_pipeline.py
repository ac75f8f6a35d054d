"""End-to-end tests of the run commands on the small footprint."""

import csv

import numpy as np
import pytest
import yaml
from typer.testing import CliRunner

from src.core.database import get_db
from src.core.errors import ConfigError, ConstraintUnsatisfiedError, UsageError
from src.core.run import PAD_VARIABLES, Run, RunConfig, RunStatus, deep_merge
from src.geometry import save_geometry
from src.main import app
from src.participation import LayerParticipation, ParticipationReport, get_material_stack
from src.pipeline import (
    baselines,
    evaluate,
    list_runs,
    optimize_pad,
    optimize_wire,
    report,
    show_run,
    sweep,
)
from src.pipeline.tables import read_convergence, trace_header, write_convergence

runner = CliRunner()


def with_overrides(config_file, name, overrides):
    """Copy of a config file with some sections replaced."""
    data = deep_merge(yaml.safe_load(config_file.read_text()), overrides)
    path = config_file.parent / name
    path.write_text(yaml.safe_dump(data))
    return path


@pytest.fixture
def pad_file(workspace, small_layout):
    return save_geometry(small_layout, workspace / "input", "pad")["json"]


@pytest.fixture
def pad_run(workspace, pad_file, small_config_file):
    return evaluate(str(pad_file), refinement=False, config_file=small_config_file)


# ==================== evaluate ====================


def test_evaluate_pad_file(workspace, pad_run):
    run = Run.load(pad_run["path"])

    assert pad_run["status"] == "completed"
    assert run.report_path.exists()
    assert (run.path / "geometry.json").exists()
    assert pad_run["participation_ppm"]["MS"]["total"] > pad_run["participation_ppm"]["MA"]["total"]
    assert pad_run["ec_mhz"] > 0
    assert pad_run["refinement_delta"] is None

    row = get_db().get_run(run.id)
    assert row.status == "completed"
    assert row.material_preset == "simplified"
    assert len(get_db().get_artifacts(run.id)) == len(run.record.artifacts)


def test_evaluate_is_reproducible(workspace, pad_file, small_config_file, pad_run):
    again = evaluate(str(pad_file), refinement=False, config_file=small_config_file)
    first = Run.load(pad_run["path"]).read_report()["participation"]
    second = Run.load(again["path"]).read_report()["participation"]

    assert again["path"] != pad_run["path"]
    assert second["participation_ppm"] == first["participation_ppm"]
    assert second["q_tls"] == first["q_tls"]


def test_evaluate_with_refinement(workspace, pad_file, small_config_file):
    result = evaluate(str(pad_file), config_file=small_config_file)
    assert set(result["refinement_delta"]) == {"MS", "MA", "SA"}
    assert all(d >= 0 for d in result["refinement_delta"].values())
    assert "refinement" in Run.load(result["path"]).record.timings


def test_evaluate_wire_against_a_pad_run(workspace, small_config_file, pad_run):
    config_file = with_overrides(
        small_config_file, "wire.yaml", {"pad_run": pad_run["path"], "geometry": {"wire_length": 20}}
    )
    result = evaluate("baseline:straight_wire", refinement=False, config_file=config_file)
    ppm = result["participation_ppm"]

    assert result["status"] == "completed"
    assert ppm["MS"]["wire"] > 0
    assert ppm["MS"]["interior"] == 0
    assert ppm["SA"]["total"] == 0


def test_evaluate_pad_with_wire(workspace, pad_file, small_config_file):
    config_file = with_overrides(small_config_file, "wire.yaml", {"geometry": {"wire_length": 20}})
    result = evaluate(str(pad_file), wire="baseline:straight_wire", refinement=False, config_file=config_file)
    block = Run.load(result["path"]).read_report()

    assert set(block["components"]) == {"pad", "wire"}
    pad_ms = block["components"]["pad"]["participation_ppm"]["MS"]["total"]
    wire_ms = block["components"]["wire"]["participation_ppm"]["MS"]["total"]
    assert result["participation_ppm"]["MS"]["total"] == pytest.approx(pad_ms + wire_ms)
    assert (Run.load(result["path"]).path / "wire.json").exists()


def test_evaluate_errors_mark_the_run_failed(workspace, small_config_file):
    with pytest.raises(UsageError, match="Unknown baseline"):
        evaluate("baseline:nope", config_file=small_config_file)
    with pytest.raises(ConfigError, match="neither a file"):
        evaluate(str(workspace / "missing.json"), config_file=small_config_file)

    rows = get_db().list_runs(mode="evaluate")
    assert len(rows) == 2
    assert {r.status for r in rows} == {"failed"}


def test_wire_cannot_follow_a_wire(workspace, small_config_file):
    with pytest.raises(UsageError, match="not with another wire"):
        evaluate("baseline:straight_wire", wire="baseline:linear_taper", config_file=small_config_file)


# ==================== optimize ====================


def test_optimize_pad_with_one_evaluation(workspace, small_config_file):
    result = optimize_pad(config_file=small_config_file, budget=1)
    run = Run.load(result["path"])

    assert result["status"] == "completed"
    assert result["nfe"] == 1
    assert result["iterations"] == 0
    assert result["termination"] == "max_nfe"
    assert run.record.wire_length > 0

    with open(run.trace_path, newline="") as f:
        rows = list(csv.reader(f))
    assert len(rows) == 2
    assert rows[0] == trace_header(PAD_VARIABLES)
    assert run.convergence_path.exists()
    assert len(get_db().get_evaluations(run.id)) == 1

    block = run.read_report()
    assert block["optimization"]["nfe"] == 1
    assert set(block["optimization"]["variables"]) == set(run.load_config().pad_bounds)


def test_optimize_pad_constraint_failure_keeps_artifacts(workspace, small_config_file):
    config_file = with_overrides(small_config_file, "tight.yaml", {"transmon": {"ec_threshold_ghz": 0.001}})
    with pytest.raises(ConstraintUnsatisfiedError, match="above"):
        optimize_pad(config_file=config_file, budget=1)

    (row,) = get_db().list_runs(mode="optimize-pad")
    assert row.status == "constraint_unsatisfied"
    run = Run.load(row.path)
    assert run.record.status == RunStatus.CONSTRAINT_UNSATISFIED
    assert run.report_path.exists()
    assert (run.path / "geometry.svg").exists()


def test_resume_checks_the_mode(workspace, pad_run):
    with pytest.raises(UsageError, match="is a evaluate run"):
        optimize_pad(resume=pad_run["path"], budget=5)


def test_optimize_wire_from_a_pad_run(workspace, small_config_file, pad_run):
    result = optimize_wire(config_file=small_config_file, wire_length=20.0, pad_run=pad_run["path"], budget=1)
    run = Run.load(result["path"])

    assert result["nfe"] == 1
    assert result["wire_length"] == 20.0
    assert result["participation_ppm"]["MS"]["wire"] > 0
    assert run.load_config().pad_run == pad_run["path"]
    assert (run.path / "geometry.json").exists()


def test_collapsed_wire_bounds_reproduce_the_straight_wire(workspace, small_config_file, pad_run):
    pinned = {name: [0.5, 0.5] for name in ("r1", "r2", "r3", "r4")}
    config_file = with_overrides(small_config_file, "pinned.yaml", {"wire_bounds": pinned})
    result = optimize_wire(config_file=config_file, wire_length=20.0, pad_run=pad_run["path"], budget=3)

    reference = with_overrides(
        small_config_file, "reference.yaml", {"pad_run": pad_run["path"], "geometry": {"wire_length": 20.0}}
    )
    straight = evaluate("baseline:straight_wire", refinement=False, config_file=reference)

    block = Run.load(result["path"]).read_report()["optimization"]
    assert list(block["variables"].values()) == [0.5, 0.5, 0.5, 0.5]
    for layer in ("MS", "MA"):
        assert result["participation_ppm"][layer]["wire"] == pytest.approx(
            straight["participation_ppm"][layer]["wire"], rel=1e-6
        )


def test_optimize_wire_needs_a_recorded_length(workspace, small_config_file):
    source = Run.create(RunConfig.build("evaluate"))
    with pytest.raises(ConfigError, match="no recorded wire length"):
        optimize_wire(config_file=small_config_file, pad_run=str(source.path), budget=1)


# ==================== report & registry ====================


def report_run(preset, ms_interior, convergence=None):
    stack = get_material_stack(preset)
    summary = ParticipationReport.build({"MS": LayerParticipation(interior=ms_interior)}, stack, 5.0).summary()
    run = Run.create(RunConfig.build("evaluate", overrides={"materials": preset}))
    run.write_report({"mode": "evaluate", "participation": summary})
    if convergence:
        write_convergence(run.convergence_path, convergence)
    return run


def test_report_compares_runs(workspace):
    a = report_run("simplified", 2e-4, convergence=[3e-4, 2e-4])
    b = report_run("simplified", 1e-4, convergence=[2e-4, 1e-4, 1e-4])
    result = report([str(a.path), b.id])
    rows = {row["quantity"]: row for row in result["table"]["rows"]}

    assert result["table"]["columns"] == [a.id, b.id]
    assert rows["p_MS interior"]["reduction_pct"] == pytest.approx([0.0, 50.0])
    out = Run.load(result["path"])
    assert (out.path / "comparison.csv").exists()
    assert (out.path / "convergence.svg").exists()
    assert out.read_report()["presets"] == ["simplified"]


def test_report_refuses_mixed_presets(workspace):
    a = report_run("simplified", 2e-4)
    b = report_run("nb-on-si", 1e-4)
    with pytest.raises(UsageError, match="different material presets"):
        report([a.id, b.id])

    result = report([a.id, b.id], force=True, plot=False)
    assert len(result["table"]["columns"]) == 2


def test_report_needs_runs(workspace):
    with pytest.raises(UsageError):
        report([])


def test_baseline_listing():
    kinds = {item["kind"] for item in baselines(list_only=True)["baselines"]}
    assert {"double_pad", "straight_wire", "linear_taper"} <= kinds


def test_sweep_needs_three_points(workspace, small_config_file):
    with pytest.raises(UsageError, match="at least 3"):
        sweep(widths=[60.0], heights=[50.0], config_file=small_config_file)


def test_registry_views(workspace, pad_run):
    (entry,) = list_runs(mode="evaluate")
    assert entry["id"] == pad_run["run_id"]
    assert entry["status"] == "completed"
    assert list_runs(mode="optimize-pad") == []

    shown = show_run(pad_run["run_id"])
    assert shown["registered_artifacts"] == len(shown["artifacts"]) > 0
    assert "evaluate" in shown["reports"]
    assert "pad" in shown["timings"]
    assert shown["error"] is None


# ==================== CLI ====================


def test_cli_lists_baselines(workspace):
    result = runner.invoke(app, ["baselines", "--list"])
    assert result.exit_code == 0
    assert "double_pad" in result.output


def test_cli_runs_without_any(workspace):
    assert runner.invoke(app, ["runs"]).exit_code == 0


def test_cli_exit_codes(workspace):
    assert runner.invoke(app, ["show", "missing"]).exit_code == 2
    assert runner.invoke(app, ["evaluate", "-g", "baseline:nope"]).exit_code == 2
    assert runner.invoke(app, ["evaluate", "-g", str(workspace / "missing.json")]).exit_code == 2
    assert runner.invoke(app, ["report", "-r", "missing"]).exit_code == 2


def test_cli_constraint_exit_code(workspace, small_config_file):
    config_file = with_overrides(small_config_file, "tight.yaml", {"transmon": {"ec_threshold_ghz": 0.001}})
    result = runner.invoke(app, ["optimize-pad", "-c", str(config_file), "-b", "1"])
    assert result.exit_code == 5


def test_cli_evaluate_and_show(workspace, pad_file, small_config_file):
    result = runner.invoke(
        app, ["evaluate", "-g", str(pad_file), "-c", str(small_config_file), "--no-refinement"]
    )
    assert result.exit_code == 0, result.output
    (row,) = get_db().list_runs()
    assert runner.invoke(app, ["show", row.id]).exit_code == 0


# ==================== slow: default geometry, desk mesh ====================


@pytest.fixture
def desk_baselines(workspace, desk_config_file):
    return baselines(config_file=desk_config_file)["reports"]


@pytest.mark.slow
def test_default_double_pad_is_substrate_dominated(desk_baselines):
    ppm = desk_baselines["double_pad"]["participation_ppm"]
    assert ppm["MS"]["total"] > ppm["SA"]["total"] > ppm["MA"]["total"]
    assert ppm["MS"]["perimeter"] > 0


@pytest.mark.slow
def test_concentric_pads_hold_more_substrate_energy(desk_baselines):
    concentric = desk_baselines["concentric"]["participation_ppm"]["MS"]["total"]
    double = desk_baselines["double_pad"]["participation_ppm"]["MS"]["total"]
    assert concentric > double


@pytest.mark.slow
def test_taper_beats_a_straight_wire(desk_baselines):
    straight = desk_baselines["straight_wire"]["participation_ppm"]["MS"]["wire"]
    taper = desk_baselines["linear_taper"]["participation_ppm"]["MS"]["wire"]
    assert taper < straight
    assert 1.28 * 0.7 <= straight / taper <= 1.28 * 1.3


@pytest.mark.slow
def test_interior_and_perimeter_are_correlated(workspace, desk_config_file):
    result = sweep(config_file=desk_config_file)
    assert result["spearman"]["n"] == 12
    assert result["spearman"]["rho"] > 0


@pytest.mark.slow
def test_pad_optimization_beats_the_double_pad(desk_baselines, desk_config_file):
    result = optimize_pad(config_file=desk_config_file, budget=100)
    double = desk_baselines["double_pad"]["participation_ppm"]["MS"]["interior"]

    assert result["nfe"] == 100
    assert result["participation_ppm"]["MS"]["interior"] <= double
    assert result["ec_mhz"] <= 350

    _, best = read_convergence(Run.load(result["path"]).convergence_path)
    assert len(best) == 100
    assert np.all(np.diff(best) <= 0)


@pytest.mark.slow
def test_wire_optimization_beats_the_taper(desk_baselines, desk_config_file):
    result = optimize_wire(config_file=desk_config_file, budget=100)
    taper = desk_baselines["linear_taper"]["participation_ppm"]["MS"]["wire"]
    assert result["participation_ppm"]["MS"]["wire"] <= taper


@pytest.mark.slow
def test_optimized_qubit_improves_the_quality_factor(workspace, desk_config_file):
    pad = optimize_pad(config_file=desk_config_file, budget=100, materials="nb-on-si")
    wire = optimize_wire(config_file=desk_config_file, pad_run=pad["path"], budget=100, materials="nb-on-si")
    combined = evaluate(
        str(Run.load(pad["path"]).path / "geometry.json"),
        wire=str(Run.load(wire["path"]).path / "geometry.json"),
        refinement=False,
        materials="nb-on-si",
        config_file=desk_config_file,
    )
    reference = baselines(config_file=desk_config_file, materials="nb-on-si")["reports"]

    ratio = combined["q_tls"] / reference["double_pad+straight_wire"]["q_tls"]
    assert 1.05 <= ratio <= 1.45


@pytest.mark.slow
def test_resumed_pad_optimization_continues(workspace, small_config_file):
    first = optimize_pad(config_file=small_config_file, budget=5, out=workspace / "pad")
    assert first["nfe"] == 5
    assert first["iterations"] == 1
    assert Run.load(workspace / "pad").checkpoint_path.exists()

    resumed = optimize_pad(resume=workspace / "pad", budget=9)
    assert resumed["nfe"] == 9
    assert resumed["iterations"] == 2

    with open(Run.load(workspace / "pad").trace_path, newline="") as f:
        assert len(list(csv.reader(f))) == resumed["nfe"] + 1
