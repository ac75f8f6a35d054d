"""qubitshape CLI - transmon pad and junction-wire shape optimization."""

from contextlib import contextmanager
from pathlib import Path
from typing import List, Optional

import typer
from rich.table import Table

from .core.config import settings
from .core.errors import QubitShapeError
from .core.log import console, setup_logging
from .pipeline import (
    baselines as run_baselines,
    evaluate as run_evaluate,
    list_runs,
    optimize_pad as run_optimize_pad,
    optimize_wire as run_optimize_wire,
    report as run_report,
    show_run,
    sweep as run_sweep,
)

app = typer.Typer(
    name="qubitshape",
    help="Shape optimization of transmon pads and junction wires for low surface loss",
    add_completion=False,
)

ConfigOpt = typer.Option(None, "--config", "-c", help="Run config file (.yaml, .toml or .json)")
BudgetOpt = typer.Option(None, "--budget", "-b", help="Maximum number of objective evaluations")
MeshLevelOpt = typer.Option(None, "--mesh-level", "-m", help="Mesh refinement level (0 = coarsest)")
MaterialsOpt = typer.Option(None, "--materials", help="Material preset name")
OutOpt = typer.Option(None, "--out", "-o", help="Run directory (default runs/<date>_<mode>_<hash>)")
ResumeOpt = typer.Option(None, "--resume", help="Resume the run in this directory from its checkpoint")
SeedlessOpt = typer.Option(False, "--seedless", help="No-op: DIRECT is deterministic and uses no RNG")


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
):
    """Shape optimization of transmon pads and junction wires."""
    setup_logging("DEBUG" if verbose else settings.log_level)


@contextmanager
def _errors():
    try:
        yield
    except QubitShapeError as e:
        console.print(f"[red]Error: {e}[/]")
        raise typer.Exit(code=e.exit_code)


def _participation_table(ppm: dict[str, dict[str, float]], title: str) -> Table:
    table = Table(title=title)
    table.add_column("Layer", style="cyan")
    for column in ("interior", "perimeter", "wire", "total"):
        table.add_column(column.capitalize(), justify="right")
    for layer, values in ppm.items():
        table.add_row(layer, *(f"{values[k]:.3f}" for k in ("interior", "perimeter", "wire", "total")))
    return table


def _print_result(result: dict) -> None:
    console.print(_participation_table(result["participation_ppm"], "Participation (ppm)"))
    console.print(f"Q_TLS: [bold]{result['q_tls']:.4g}[/]   T1: [bold]{result['t1_us']:.2f} µs[/]")
    if result.get("ec_mhz") is not None:
        console.print(f"E_C: {result['ec_mhz']:.1f} MHz")
    if result.get("wire_length") is not None:
        console.print(f"Wire length: {result['wire_length']:.2f} µm")
    if result.get("nfe") is not None:
        console.print(
            f"[dim]NFE {result['nfe']}, {result['iterations']} iterations, "
            f"stopped by {result['termination']}[/]"
        )
    if result.get("refinement_delta"):
        deltas = ", ".join(f"{k} {100 * v:.2f}%" for k, v in result["refinement_delta"].items())
        console.print(f"[dim]Refinement delta: {deltas}[/]")
    console.print(f"\n[green]Run {result['run_id']}[/] [dim]{result['path']}[/]")


@app.command("optimize-pad")
def optimize_pad(
    config: Optional[Path] = ConfigOpt,
    budget: Optional[int] = BudgetOpt,
    mesh_level: Optional[int] = MeshLevelOpt,
    materials: Optional[str] = MaterialsOpt,
    out: Optional[Path] = OutOpt,
    resume: Optional[Path] = ResumeOpt,
    seedless: bool = SeedlessOpt,
):
    """Optimize the capacitor pad shape."""
    with _errors(), console.status("[bold green]Optimizing pad..."):
        result = run_optimize_pad(config, budget, mesh_level, materials, out, resume)
    _print_result(result)
    console.print(f"\n[yellow]Next: qubitshape optimize-wire --pad-run {result['path']}[/]")


@app.command("optimize-wire")
def optimize_wire(
    config: Optional[Path] = ConfigOpt,
    wire_length: Optional[float] = typer.Option(None, "--wire-length", "-l", help="Wire length in µm"),
    pad_run: Optional[str] = typer.Option(None, "--pad-run", help="Pad run supplying wire length and energy"),
    budget: Optional[int] = BudgetOpt,
    mesh_level: Optional[int] = MeshLevelOpt,
    materials: Optional[str] = MaterialsOpt,
    out: Optional[Path] = OutOpt,
    resume: Optional[Path] = ResumeOpt,
    seedless: bool = SeedlessOpt,
):
    """Optimize the junction-wire width profile."""
    with _errors(), console.status("[bold green]Optimizing wire..."):
        result = run_optimize_wire(config, wire_length, pad_run, budget, mesh_level, materials, out, resume)
    _print_result(result)


@app.command()
def evaluate(
    geometry: str = typer.Option(..., "--geometry", "-g", help="Geometry JSON file or baseline:<kind>"),
    wire: Optional[str] = typer.Option(None, "--wire", "-w", help="Wire JSON file or baseline:<kind>"),
    materials: Optional[str] = MaterialsOpt,
    mesh_level: Optional[int] = MeshLevelOpt,
    refinement: bool = typer.Option(True, "--refinement/--no-refinement", help="Also solve one level finer"),
    config: Optional[Path] = ConfigOpt,
    out: Optional[Path] = OutOpt,
):
    """Participation report of a geometry."""
    with _errors(), console.status(f"[bold green]Evaluating {geometry}..."):
        result = run_evaluate(geometry, wire, materials, mesh_level, refinement, config, out)
    _print_result(result)


@app.command()
def baselines(
    list_only: bool = typer.Option(False, "--list", help="Only list the available baselines"),
    materials: Optional[str] = MaterialsOpt,
    mesh_level: Optional[int] = MeshLevelOpt,
    config: Optional[Path] = ConfigOpt,
    out: Optional[Path] = OutOpt,
):
    """List or evaluate the reference geometries."""
    if list_only:
        table = Table(title="Baselines")
        table.add_column("Kind", style="cyan")
        table.add_column("Description")
        table.add_column("Defaults", style="dim")
        for item in run_baselines(list_only=True)["baselines"]:
            defaults = ", ".join(f"{k}={v}" for k, v in item["defaults"].items())
            table.add_row(item["kind"], item["description"], defaults)
        console.print(table)
        return

    with _errors(), console.status("[bold green]Evaluating baselines..."):
        result = run_baselines(False, materials, mesh_level, config, out)

    table = Table(title="Baselines (ppm)")
    table.add_column("Geometry", style="cyan")
    for layer in ("MS", "MA", "SA"):
        table.add_column(f"p_{layer}", justify="right")
    table.add_column("Q_TLS", justify="right")
    table.add_column("T1 (µs)", justify="right")
    for kind, rep in result["reports"].items():
        ppm = rep["participation_ppm"]
        table.add_row(
            kind,
            *(f"{ppm[layer]['total']:.3f}" for layer in ("MS", "MA", "SA")),
            f"{rep['q_tls']:.4g}",
            f"{rep['t1_us']:.2f}",
        )
    console.print(table)
    console.print(f"\n[green]Run {result['run_id']}[/] [dim]{result['path']}[/]")


@app.command()
def report(
    runs: List[str] = typer.Option(..., "--runs", "-r", help="Run directory or id; repeat to compare"),
    force: bool = typer.Option(False, "--force", help="Compare runs of different material presets"),
    plot: bool = typer.Option(True, "--plot/--no-plot", help="Write convergence.svg"),
    out: Optional[Path] = OutOpt,
):
    """Compare runs; the first is the reference for reductions."""
    with _errors():
        result = run_report(runs, force, plot, out)

    table_data = result["table"]
    table = Table(title="Comparison")
    table.add_column("Quantity", style="cyan")
    for label in table_data["columns"]:
        table.add_column(label[:30], justify="right")
    for row in table_data["rows"]:
        cells = []
        for k, value in enumerate(row["values"]):
            text = f"{value:.4g}" if isinstance(value, float) else str(value)
            change = (row["reduction_pct"] or [None] * (k + 1))[k]
            if k > 0 and change is not None:
                text += f" [dim]({change:+.1f}%)[/]"
            cells.append(text)
        table.add_row(row["quantity"], *cells)
    console.print(table)
    console.print(f"\n[green]Report {result['run_id']}[/] [dim]{result['path']}[/]")


@app.command()
def sweep(
    width: Optional[List[float]] = typer.Option(None, "--width", help="Double-pad width in µm; repeatable"),
    height: Optional[List[float]] = typer.Option(None, "--height", help="Double-pad height in µm; repeatable"),
    materials: Optional[str] = MaterialsOpt,
    mesh_level: Optional[int] = MeshLevelOpt,
    config: Optional[Path] = ConfigOpt,
    out: Optional[Path] = OutOpt,
):
    """Interior/perimeter correlation over a double-pad sweep."""
    kwargs = {}
    if width:
        kwargs["widths"] = width
    if height:
        kwargs["heights"] = height
    with _errors(), console.status("[bold green]Sweeping double pads..."):
        result = run_sweep(materials=materials, mesh_level=mesh_level, config_file=config, out=out, **kwargs)

    table = Table(title="Double-pad sweep, p_MS (ppm)")
    for column in ("Width", "Height", "Interior", "Perimeter"):
        table.add_column(column, justify="right")
    for p in result["points"]:
        table.add_row(
            f"{p['width']:.0f}", f"{p['height']:.0f}", f"{p['interior_ppm']:.3f}", f"{p['perimeter_ppm']:.3f}"
        )
    console.print(table)
    s = result["spearman"]
    console.print(f"Spearman rho = [bold]{s['rho']:.3f}[/] (p = {s['p_value']:.2g}, n = {s['n']})")


@app.command("runs")
def runs_cmd(
    mode: Optional[str] = typer.Option(None, "--mode", help="Filter by mode (e.g., optimize-pad)"),
):
    """List registered runs."""
    rows = list_runs(mode=mode)

    if not rows:
        console.print("[yellow]No runs found.[/]")
        return

    table = Table(title="Runs")
    table.add_column("ID", style="cyan")
    table.add_column("Mode")
    table.add_column("Status", style="green")
    table.add_column("Preset")
    table.add_column("Best (ppm)", justify="right")
    table.add_column("NFE", justify="right")
    table.add_column("Created")

    for r in rows:
        table.add_row(
            r["id"],
            r["mode"],
            r["status"] or "",
            r["material_preset"] or "",
            f"{r['best_value_ppm']:.3f}" if r["best_value_ppm"] is not None else "-",
            str(r["nfe"]) if r["nfe"] is not None else "-",
            r["created_at"][:10],
        )
    console.print(table)


@app.command()
def show(
    run: str = typer.Argument(..., help="Run directory or id"),
):
    """Show the status of a run."""
    with _errors():
        result = show_run(run)

    console.print(f"\n[bold]Run: {result['id']}[/]\n")
    console.print(f"Mode: {result['mode']}")
    console.print(f"Status: [green]{result['status']}[/]")
    console.print(f"Material preset: {result['material_preset']}")
    if result.get("termination"):
        console.print(f"Termination: {result['termination']} after {result['nfe']} evaluations")
    if result.get("wire_length") is not None:
        console.print(f"Wire length: {result['wire_length']:.2f} µm")
    if result.get("error"):
        console.print(f"[red]Error: {result['error']}[/]")
    for name, rep in result["reports"].items():
        console.print(f"{name}: Q_TLS {rep['q_tls']}, T1 {rep['t1_us']} µs")
    for stage, seconds in result["timings"].items():
        console.print(f"[dim]{stage}: {seconds:.1f}s[/]")
    console.print(f"Artifacts: {len(result['artifacts'])} ({result['registered_artifacts']} registered)")
    console.print(f"Path: {result['path']}")


if __name__ == "__main__":
    app()
