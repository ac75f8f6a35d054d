"""Trace, convergence and comparison tables."""

import csv
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from ..optimizer import EvaluationRecord  # noqa: E402

logger = logging.getLogger(__name__)

PPM = 1e6
LAYERS = ("MS", "MA", "SA")
REGIONS = ("interior", "accurate", "diverging", "perimeter", "wire", "total")


# ============================================================================
# Optimization trace
# ============================================================================


def trace_header(names: Sequence[str]) -> list[str]:
    return [
        "nfe",
        *names,
        "objective_ppm",
        "penalty_ppm",
        "value_ppm",
        "ec_mhz",
        "sentinel",
        "error",
        "wall_time_s",
    ]


def _trace_row(record: EvaluationRecord) -> list[Any]:
    def ppm(v: float | None) -> str:
        return "" if v is None or not np.isfinite(v) else f"{v * PPM:.9g}"

    return [
        record.nfe,
        *(f"{v:.12g}" for v in record.x),
        ppm(record.raw),
        ppm(record.penalty),
        ppm(record.value),
        "" if record.ec_ghz is None else f"{record.ec_ghz * 1e3:.6g}",
        int(record.sentinel),
        record.error or "",
        f"{record.wall_time:.3f}",
    ]


def append_trace(path: Path, records: Iterable[EvaluationRecord], names: Sequence[str]) -> None:
    """Append evaluations as they arrive; the header is written once."""
    new = not path.exists()
    with open(path, "a", newline="") as f:
        writer = csv.writer(f)
        if new:
            writer.writerow(trace_header(names))
        writer.writerows(_trace_row(r) for r in records)


def write_trace(path: Path, records: Iterable[EvaluationRecord], names: Sequence[str]) -> Path:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(trace_header(names))
        writer.writerows(_trace_row(r) for r in records)
    return path


# ============================================================================
# Convergence
# ============================================================================


def best_so_far(values: Sequence[float]) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(values, dtype=float))


def write_convergence(path: Path, values: Sequence[float]) -> Path:
    """nfe, value and running best, objective in ppm."""
    values = np.asarray(values, dtype=float)
    best = best_so_far(values)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["nfe", "value_ppm", "best_so_far_ppm"])
        for k, (v, b) in enumerate(zip(values, best), 1):
            writer.writerow([k, f"{v * PPM:.9g}", f"{b * PPM:.9g}"])
    return path


def read_convergence(path: Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    nfe = np.array([int(r["nfe"]) for r in rows])
    best = np.array([float(r["best_so_far_ppm"]) for r in rows])
    return nfe, best


def write_convergence_comparison(path: Path, curves: dict[str, tuple[np.ndarray, np.ndarray]]) -> Path:
    """Long table of run_id, nfe and best-so-far for several runs."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["run_id", "nfe", "best_so_far_ppm"])
        for label, (nfe, best) in curves.items():
            writer.writerows([label, int(n), f"{b:.9g}"] for n, b in zip(nfe, best))
    return path


def plot_convergence(path: Path, curves: dict[str, tuple[np.ndarray, np.ndarray]]) -> Path:
    """Best-so-far against NFE, one line per run."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (nfe, best) in curves.items():
        ax.step(nfe, best, where="post", label=label)
    ax.set_xlabel("function evaluations")
    ax.set_ylabel("best objective (ppm)")
    ax.grid(True, alpha=0.3)
    if len(curves) > 1:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


# ============================================================================
# Sweep
# ============================================================================

SWEEP_COLUMNS = ("width", "height", "interior_ppm", "perimeter_ppm")


def write_sweep(path: Path, points: Sequence[dict[str, float]]) -> Path:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_COLUMNS)
        writer.writerows(
            [p["width"], p["height"], f"{p['interior_ppm']:.9g}", f"{p['perimeter_ppm']:.9g}"] for p in points
        )
    return path


# ============================================================================
# Comparison
# ============================================================================


def _reduction(first: float, value: float) -> float | None:
    if first == 0:
        return None
    return 100.0 * (first - value) / first


def _increase(first: float, value: float) -> float | None:
    if first == 0:
        return None
    return 100.0 * (value - first) / first


def comparison_table(entries: Sequence[tuple[str, dict[str, Any]]]) -> dict[str, Any]:
    """Per-layer, per-region ppm for each report summary, with the percent
    reduction of every column against the first one.

    Reductions are recomputed here from the stored values on every call.
    """
    labels = [label for label, _ in entries]
    rows = []
    for layer in LAYERS:
        for region in REGIONS:
            values = [s["participation_ppm"][layer][region] for _, s in entries]
            if not any(values):
                continue
            rows.append(
                {
                    "quantity": f"p_{layer} {region}",
                    "unit": "ppm",
                    "values": values,
                    "reduction_pct": [_reduction(values[0], v) for v in values],
                }
            )

    for key, unit in (("q_tls", ""), ("t1_us", "us")):
        values = [s[key] for _, s in entries]
        numeric = all(isinstance(v, (int, float)) for v in values)
        rows.append(
            {
                "quantity": key,
                "unit": unit,
                "values": values,
                # percent increase for Q and T1
                "reduction_pct": [_increase(values[0], v) for v in values] if numeric else None,
            }
        )
    return {"columns": labels, "rows": rows}


def write_comparison(directory: Path, table: dict[str, Any]) -> dict[str, Path]:
    """comparison.csv and comparison.json."""
    paths = {"csv": directory / "comparison.csv", "json": directory / "comparison.json"}
    columns = table["columns"]
    with open(paths["csv"], "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["quantity", "unit", *columns, *(f"reduction_pct[{c}]" for c in columns[1:])]
        )
        for row in table["rows"]:
            reductions = row["reduction_pct"] or [None] * len(columns)
            writer.writerow(
                [
                    row["quantity"],
                    row["unit"],
                    *(_fmt(v) for v in row["values"]),
                    *(_fmt(v) for v in reductions[1:]),
                ]
            )
    paths["json"].write_text(json.dumps(table, indent=2, sort_keys=True))
    return paths


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
