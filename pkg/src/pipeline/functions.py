"""Workflow functions behind the CLI.

Each function creates (or resumes) a run directory, does its work, writes
the artifacts, registers them, and returns a dict for display. Failures
surface as QubitShapeError subclasses; the run directory keeps whatever
was written before the failure.
"""

import logging
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, Optional

import numpy as np
from scipy.stats import spearmanr

from ..core.database import get_db
from ..core.errors import (
    ConfigError,
    ConstraintUnsatisfiedError,
    QubitShapeError,
    UsageError,
)
from ..core.run import PAD_VARIABLES, WIRE_VARIABLES, Run, RunConfig, RunStatus, deep_merge
from ..geometry import PadLayout, WireProfile, list_baselines, make_baseline, save_geometry
from ..optimizer import (
    DesignSpace,
    DirectOptimizer,
    OptimizationResult,
    PenaltySpec,
    TerminationConfig,
)
from ..participation import ParticipationReport, compose
from .evaluation import (
    WIRE_BASELINES,
    PadObjective,
    WireObjective,
    layout_from_vector,
    material_stack,
    pad_report,
    profile_from_vector,
    reference_energy,
    refinement_delta,
    resolve_geometry,
    solve_pad,
    wire_report,
)
from .tables import (
    append_trace,
    comparison_table,
    plot_convergence,
    read_convergence,
    write_comparison,
    write_convergence,
    write_convergence_comparison,
    write_sweep,
    write_trace,
)

logger = logging.getLogger(__name__)

PPM = 1e6
SWEEP_WIDTHS = (300.0, 400.0, 500.0, 600.0, 700.0, 800.0)
SWEEP_HEIGHTS = (400.0, 600.0)


# ============================================================================
# Run plumbing
# ============================================================================


def _overrides(
    budget: Optional[int] = None,
    mesh_level: Optional[int] = None,
    materials: Optional[str] = None,
    out: Optional[Path] = None,
    **fields: Any,
) -> dict[str, Any]:
    data: dict[str, Any] = {k: v for k, v in fields.items() if v is not None}
    if budget is not None:
        data["optimizer"] = {"max_nfe": budget}
    if mesh_level is not None:
        data["solver"] = {"mesh_level": mesh_level}
    if materials is not None:
        data["materials"] = materials
    if out is not None:
        data["out"] = str(out)
    return data


def _start(config: RunConfig) -> Run:
    run = Run.create(config)
    get_db().register_run(run.id, config.mode, str(run.path), config.material_name)
    logger.info("Run %s in %s", run.id, run.path)
    return run


def _resume(path: Path, mode: str, overrides: dict[str, Any]) -> tuple[Run, RunConfig]:
    """Reopen a run; only the optimizer settings may change."""
    run = Run.load(path)
    config = run.load_config()
    if config.mode != mode:
        raise UsageError(f"run {run.id} is a {config.mode} run, not {mode}")
    allowed = {k: overrides[k] for k in ("optimizer",) if k in overrides}
    config = RunConfig.model_validate(deep_merge(config.model_dump(mode="json"), allowed))
    get_db().register_run(run.id, config.mode, str(run.path), config.material_name)
    run.set_status(RunStatus.RUNNING)
    return run, config


def _finish(run: Run, status: RunStatus = RunStatus.COMPLETED, error: str | None = None) -> None:
    """Save the record and sync status and artifacts to the registry."""
    run.set_status(status, error)
    db = get_db()
    r = run.record
    db.update_run(
        run.id,
        status=status.value,
        termination=r.termination,
        best_value=r.best_value,
        nfe=r.nfe,
    )
    for name in r.artifacts:
        db.add_artifact(run.id, Path(name).stem, str((run.path / name).resolve()))


def _save_geometry(run: Run, geometry: PadLayout | WireProfile, stem: str = "geometry") -> None:
    for path in save_geometry(geometry, run.path, stem).values():
        run.add_artifact(path)


def _space(bounds: dict[str, tuple[float, float]], names: Sequence[str]) -> DesignSpace:
    return DesignSpace.from_bounds({name: bounds[name] for name in names})


def _optimize(
    run: Run,
    config: RunConfig,
    objective: Callable,
    names: Sequence[str],
    bounds: dict[str, tuple[float, float]],
    penalty: PenaltySpec | None,
    resume: bool,
) -> OptimizationResult:
    """Run DIRECT with checkpoints and a live trace."""
    termination = TerminationConfig.from_settings(config.optimizer)
    kwargs = {
        "penalty": penalty,
        "config": config.optimizer,
        "on_batch": lambda records: append_trace(run.trace_path, records, names),
    }
    if resume:
        optimizer = DirectOptimizer.resume(run.checkpoint_path, objective, termination, **kwargs)
    else:
        optimizer = DirectOptimizer(
            objective,
            _space(bounds, names),
            termination,
            checkpoint_path=run.checkpoint_path,
            **kwargs,
        )
    run.add_artifact(run.trace_path)

    with run.stage("optimize"):
        result = optimizer.run()

    write_trace(run.trace_path, result.history, names)
    run.add_artifact(write_convergence(run.convergence_path, [r.value for r in result.history]))
    if run.checkpoint_path.exists():
        run.add_artifact(run.checkpoint_path)
    get_db().set_evaluations(run.id, [r.model_dump() for r in result.history])

    run.record.termination = result.termination.value
    run.record.best_value = result.best_value
    run.record.nfe = result.nfe
    return result


def _optimization_block(result: OptimizationResult, names: Sequence[str]) -> dict[str, Any]:
    best = result.best_record
    return {
        "variables": dict(zip(names, (float(v) for v in result.best_x))),
        "best_value_ppm": result.best_value * PPM,
        "objective_ppm": None if best.raw is None else best.raw * PPM,
        "penalty_ppm": best.penalty * PPM,
        "ec_mhz": None if best.ec_ghz is None else best.ec_ghz * 1e3,
        "nfe": result.nfe,
        "iterations": result.iterations,
        "termination": result.termination.value,
    }


def _guarded(run: Run, work: Callable[[], dict[str, Any]]) -> dict[str, Any]:
    """Mark the run failed on any library error and re-raise it."""
    try:
        return work()
    except ConstraintUnsatisfiedError as e:
        _finish(run, RunStatus.CONSTRAINT_UNSATISFIED, str(e))
        raise
    except QubitShapeError as e:
        logger.error("Run %s failed: %s", run.id, e)
        _finish(run, RunStatus.FAILED, f"{type(e).__name__}: {e}")
        raise


# ============================================================================
# Optimization
# ============================================================================


def optimize_pad(
    config_file: Optional[Path] = None,
    budget: Optional[int] = None,
    mesh_level: Optional[int] = None,
    materials: Optional[str] = None,
    out: Optional[Path] = None,
    resume: Optional[Path] = None,
) -> dict[str, Any]:
    """Minimize interior p_MS over the 8-variable pad space under the E_C penalty.

    The optimum is then evaluated in full (interior plus edge-scaled
    perimeter) and its P0 height recorded as the implied wire length.

    Raises:
        ConstraintUnsatisfiedError: the optimum's E_C is above the threshold;
            all artifacts are still written.
    """
    overrides = _overrides(budget, mesh_level, materials, out)
    if resume:
        run, config = _resume(resume, "optimize-pad", overrides)
    else:
        config = RunConfig.build("optimize-pad", config_file, overrides)
        run = _start(config)

    def work() -> dict[str, Any]:
        stack = material_stack(config)
        penalty = PenaltySpec(config.transmon.beta, config.transmon.ec_threshold_ghz)
        result = _optimize(
            run, config, PadObjective(config, stack), PAD_VARIABLES, config.pad_bounds, penalty, bool(resume)
        )

        layout = layout_from_vector(result.best_x, config)
        with run.stage("report"):
            report = pad_report(layout, config, stack)
        _save_geometry(run, layout)

        run.record.wire_length = layout.wire_length
        run.record.geometry_hash = report.provenance["geometry_hash"]
        run.record.reports = {"pad": report.summary()}
        run.write_report(
            {
                "mode": config.mode,
                "participation": report.summary(),
                "optimization": _optimization_block(result, PAD_VARIABLES),
            }
        )

        ec = report.transmon.ec_ghz
        threshold = config.transmon.ec_threshold_ghz
        if ec > threshold:
            raise ConstraintUnsatisfiedError(
                f"optimum has E_C = {1e3 * ec:.1f} MHz, above {1e3 * threshold:.0f} MHz"
            )
        _finish(run)
        return _result(run, report, result)

    return _guarded(run, work)


def optimize_wire(
    config_file: Optional[Path] = None,
    wire_length: Optional[float] = None,
    pad_run: Optional[str] = None,
    budget: Optional[int] = None,
    mesh_level: Optional[int] = None,
    materials: Optional[str] = None,
    out: Optional[Path] = None,
    resume: Optional[Path] = None,
) -> dict[str, Any]:
    """Minimize wire p_MS over the four half widths.

    The wire length comes from --wire-length, else from the pad run's
    optimum, else from the geometry settings. The normalizing energy is
    that of the pad run's geometry or of the reference pad.
    """
    if resume:
        run, config = _resume(resume, "optimize-wire", _overrides(budget, mesh_level, materials, out))
    else:
        if wire_length is None and pad_run:
            wire_length = Run.load(pad_run).record.wire_length
            if wire_length is None:
                raise ConfigError(f"pad run {pad_run} has no recorded wire length")
        overrides = _overrides(budget, mesh_level, materials, out, pad_run=pad_run)
        if wire_length is not None:
            overrides = deep_merge(
                overrides, {"wire_length": wire_length, "geometry": {"wire_length": wire_length}}
            )
        config = RunConfig.build("optimize-wire", config_file, overrides)
        run = _start(config)

    def work() -> dict[str, Any]:
        length = config.wire_length or config.geometry.wire_length
        stack = material_stack(config)
        with run.stage("reference"):
            energy = reference_energy(config, stack)

        objective = WireObjective(config, stack, length, energy)
        result = _optimize(run, config, objective, WIRE_VARIABLES, config.wire_bounds, None, bool(resume))

        profile = profile_from_vector(result.best_x, config, length)
        with run.stage("report"):
            report = wire_report(profile, config, energy, stack)
        _save_geometry(run, profile)

        run.record.wire_length = length
        run.record.geometry_hash = report.provenance["geometry_hash"]
        run.record.reports = {"wire": report.summary()}
        run.write_report(
            {
                "mode": config.mode,
                "participation": report.summary(),
                "optimization": _optimization_block(result, WIRE_VARIABLES),
            }
        )
        _finish(run)
        return _result(run, report, result)

    return _guarded(run, work)


def _result(run: Run, report: ParticipationReport, result: OptimizationResult | None = None) -> dict[str, Any]:
    out = {
        "run_id": run.id,
        "path": str(run.path),
        "status": run.record.status.value,
        "participation_ppm": report.ppm(),
        "q_tls": report.q_tls,
        "t1_us": report.t1_us,
        "ec_mhz": report.transmon.ec_ghz * 1e3 if report.transmon else None,
        "wire_length": run.record.wire_length,
    }
    if result is not None:
        out.update(
            nfe=result.nfe,
            iterations=result.iterations,
            termination=result.termination.value,
            best_value_ppm=result.best_value * PPM,
        )
    return out


# ============================================================================
# Evaluation
# ============================================================================


def evaluate(
    geometry: str,
    wire: Optional[str] = None,
    materials: Optional[str] = None,
    mesh_level: Optional[int] = None,
    refinement: bool = True,
    config_file: Optional[Path] = None,
    out: Optional[Path] = None,
) -> dict[str, Any]:
    """Full report of a geometry file or baseline, optionally with a wire.

    A wire alone is normalized by the reference pad's energy. With
    `refinement` the same geometry is also solved one mesh level finer and
    the per-layer relative deltas are reported.
    """
    overrides = _overrides(
        mesh_level=mesh_level, materials=materials, out=out, geometry_source=geometry, wire_source=wire
    )
    config = RunConfig.build("evaluate", config_file, overrides)
    run = _start(config)

    def work() -> dict[str, Any]:
        stack = material_stack(config)
        level = config.solver.mesh_level
        main = resolve_geometry(geometry, config)
        components: dict[str, Any] = {}
        deltas = None

        if isinstance(main, PadLayout):
            with run.stage("pad"):
                pad = solve_pad(main, config, stack, level)
                report = pad_report(main, config, stack, level, pad=pad)
            components["pad"] = report.summary()
            if refinement:
                with run.stage("refinement"):
                    deltas = refinement_delta(report, pad_report(main, config, stack, level + 1))
            _save_geometry(run, main)

            if wire is not None:
                profile = resolve_geometry(wire, config)
                if not isinstance(profile, WireProfile):
                    raise UsageError(f"'{wire}' is not a wire profile")
                with run.stage("wire"):
                    wire_rep = wire_report(profile, config, pad.total_energy, stack, level)
                components["wire"] = wire_rep.summary()
                report = compose(report, wire_rep)
                _save_geometry(run, profile, stem="wire")
        else:
            if wire is not None:
                raise UsageError("--wire combines with a pad geometry, not with another wire")
            with run.stage("reference"):
                energy = reference_energy(config, stack)
            with run.stage("wire"):
                report = wire_report(main, config, energy, stack, level)
            if refinement:
                with run.stage("refinement"):
                    deltas = refinement_delta(report, wire_report(main, config, energy, stack, level + 1))
            _save_geometry(run, main)

        block: dict[str, Any] = {"mode": config.mode, "participation": report.summary()}
        if components:
            block["components"] = components
        if deltas is not None:
            block["refinement_delta"] = deltas
        run.record.reports = {"evaluate": report.summary()}
        run.record.geometry_hash = report.provenance.get("geometry_hash")
        run.write_report(block)
        _finish(run)

        out = _result(run, report)
        out["refinement_delta"] = deltas
        return out

    return _guarded(run, work)


def baselines(
    list_only: bool = False,
    materials: Optional[str] = None,
    mesh_level: Optional[int] = None,
    config_file: Optional[Path] = None,
    out: Optional[Path] = None,
) -> dict[str, Any]:
    """List the reference geometries, or evaluate all of them.

    Wires are normalized by the reference pad; the double pad with the
    straight wire is also reported as a composite.
    """
    if list_only:
        return {"baselines": list_baselines()}

    config = RunConfig.build("baselines", config_file, _overrides(mesh_level=mesh_level, materials=materials, out=out))
    run = _start(config)

    def work() -> dict[str, Any]:
        stack = material_stack(config)
        reports: dict[str, ParticipationReport] = {}
        energies: dict[str, float] = {}
        for item in list_baselines():
            kind = item["kind"]
            if kind in WIRE_BASELINES:
                continue
            layout = make_baseline(kind, config=config.geometry)
            with run.stage(kind):
                pad = solve_pad(layout, config, stack)
                reports[kind] = pad_report(layout, config, stack, pad=pad)
            energies[kind] = pad.total_energy

        energy = energies.get(config.reference_pad) or reference_energy(config, stack)
        for kind in WIRE_BASELINES:
            profile = make_baseline(
                kind, width=config.geometry.junction_width, length=config.geometry.wire_length
            )
            with run.stage(kind):
                reports[kind] = wire_report(profile, config, energy, stack)

        if "double_pad" in reports:
            reports["double_pad+straight_wire"] = compose(reports["double_pad"], reports["straight_wire"])

        summaries = {kind: rep.summary() for kind, rep in reports.items()}
        run.record.reports = summaries
        run.write_report({"mode": config.mode, "baselines": summaries})
        _finish(run)
        return {
            "run_id": run.id,
            "path": str(run.path),
            "reports": {
                kind: {"participation_ppm": rep.ppm(), "q_tls": rep.q_tls, "t1_us": rep.t1_us}
                for kind, rep in reports.items()
            },
        }

    return _guarded(run, work)


def sweep(
    widths: Sequence[float] = SWEEP_WIDTHS,
    heights: Sequence[float] = SWEEP_HEIGHTS,
    materials: Optional[str] = None,
    mesh_level: Optional[int] = None,
    config_file: Optional[Path] = None,
    out: Optional[Path] = None,
) -> dict[str, Any]:
    """Interior against perimeter p_MS over a grid of double pads, with the
    Spearman rank correlation of the two."""
    config = RunConfig.build("sweep", config_file, _overrides(mesh_level=mesh_level, materials=materials, out=out))
    run = _start(config)

    def work() -> dict[str, Any]:
        stack = material_stack(config)
        points = []
        with run.stage("sweep"):
            for width in widths:
                for height in heights:
                    layout = make_baseline("double_pad", width=width, height=height, config=config.geometry)
                    ms = pad_report(layout, config, stack).layers["MS"]
                    points.append(
                        {
                            "width": float(width),
                            "height": float(height),
                            "interior_ppm": ms.interior * PPM,
                            "perimeter_ppm": ms.perimeter * PPM,
                        }
                    )
        if len(points) < 3:
            raise UsageError("the sweep needs at least 3 points")

        res = spearmanr([p["interior_ppm"] for p in points], [p["perimeter_ppm"] for p in points])
        correlation = {"rho": float(res.statistic), "p_value": float(res.pvalue), "n": len(points)}

        run.add_artifact(write_sweep(run.path / "sweep.csv", points))
        run.write_report({"mode": config.mode, "points": points, "spearman": correlation})
        _finish(run)
        return {"run_id": run.id, "path": str(run.path), "points": points, "spearman": correlation}

    return _guarded(run, work)


# ============================================================================
# Reports & registry
# ============================================================================


def report(
    runs: Sequence[str],
    force: bool = False,
    plot: bool = True,
    out: Optional[Path] = None,
) -> dict[str, Any]:
    """Comparison table of run reports plus their convergence curves.

    The first run is the reference for the percent reductions.

    Raises:
        UsageError: no runs, or runs of different material presets without
            `force`.
    """
    if not runs:
        raise UsageError("report needs at least one run")

    entries: list[tuple[str, dict[str, Any]]] = []
    curves: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for ref in runs:
        source = Run.load(ref)
        block = source.read_report()
        if "participation" in block:
            entries.append((source.id, block["participation"]))
        for kind, summary in block.get("baselines", {}).items():
            entries.append((kind, summary))
        if source.convergence_path.exists():
            curves[source.id] = read_convergence(source.convergence_path)
    if not entries:
        raise UsageError("none of the runs has a participation report")

    presets = sorted({summary["material_preset"] for _, summary in entries})
    if len(presets) > 1 and not force:
        raise UsageError(f"runs use different material presets ({', '.join(presets)}); pass --force to compare")

    config = RunConfig.build("report", overrides=_overrides(out=out, runs=list(runs)))
    run = _start(config)

    def work() -> dict[str, Any]:
        table = comparison_table(entries)
        for path in write_comparison(run.path, table).values():
            run.add_artifact(path)

        if curves:
            run.add_artifact(write_convergence_comparison(run.path / "convergence.csv", curves))
            if plot:
                run.add_artifact(plot_convergence(run.path / "convergence.svg", curves))

        run.write_report({"mode": config.mode, "comparison": table, "presets": presets})
        _finish(run)
        return {"run_id": run.id, "path": str(run.path), "table": table}

    return _guarded(run, work)


def list_runs(mode: Optional[str] = None) -> list[dict[str, Any]]:
    """Registered runs, newest first."""
    return [
        {
            "id": row.id,
            "mode": row.mode,
            "status": row.status,
            "material_preset": row.material_preset,
            "termination": row.termination,
            "best_value_ppm": None if row.best_value is None else row.best_value * PPM,
            "nfe": row.nfe,
            "created_at": row.created_at.isoformat() if row.created_at else "",
            "path": row.path,
        }
        for row in get_db().list_runs(mode=mode)
    ]


def show_run(ref: str) -> dict[str, Any]:
    """Status, timings and artifacts of one run."""
    run = Run.load(ref)
    db = get_db()
    summary = run.get_summary()
    summary["timings"] = dict(run.record.timings)
    summary["error"] = run.record.error
    summary["artifacts"] = list(run.record.artifacts)
    summary["registered_artifacts"] = len(db.get_artifacts(run.id))
    summary["evaluations"] = len(db.get_evaluations(run.id))
    summary["reports"] = {
        name: {"q_tls": s["q_tls"], "t1_us": s["t1_us"]} for name, s in run.record.reports.items()
    }
    return summary
