"""Static plot files for a convergence report (Agg canvas, nothing is displayed)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .report import ConvergenceReport

PLOT_KINDS = ("error-vs-eps", "lambda-slices", "discount-trace")
DPI = 100


def plot_name(kind: str, config_hash: str) -> str:
    return f"{kind}-{config_hash}.png"


def _save(figure: Figure, path: Path) -> Path:
    figure.tight_layout()
    figure.savefig(path, dpi=DPI, metadata={"Software": None})
    return path


def _error_plot(report: ConvergenceReport) -> Figure:
    figure = Figure(figsize=(5.0, 4.0))
    axes = figure.add_subplot()
    rows = [row for row in report.completed if row.error is not None and row.error > 0.0]
    if rows:
        eps = np.array([row.eps for row in rows])
        error = np.array([row.error for row in rows])
        spread = np.array([row.joint_ci or 0.0 for row in rows])
        axes.errorbar(eps, error, yerr=np.minimum(spread, 0.999 * error), marker="o", capsize=3)
        axes.set_xscale("log")
        axes.set_yscale("log")
    else:
        axes.text(0.5, 0.5, "no completed rows", ha="center", va="center", transform=axes.transAxes)
    axes.set_xlabel("eps")
    axes.set_ylabel("|Y0(eps) - Y0(limit)|")
    slope = report.empirical_slope()
    title = report.name if slope is None else f"{report.name} (slope {slope:.2f})"
    axes.set_title(title)
    return figure


def _lambda_plot(report: ConvergenceReport) -> Figure:
    figure = Figure(figsize=(5.0, 4.0))
    axes = figure.add_subplot()
    slices = report.lambda_table.slices
    for piece in slices:
        axes.plot(piece.z, np.array(piece.values, dtype=float), marker=".", label=f"x1 = {piece.x:g}")
    if slices:
        axes.legend(fontsize="small")
    axes.set_xlabel("z1")
    axes.set_ylabel("lambda")
    axes.set_title(f"lambda table ({report.lambda_table.method})")
    return figure


def _trace_plot(report: ConvergenceReport) -> Figure:
    figure = Figure(figsize=(5.0, 4.0))
    axes = figure.add_subplot()
    trace = report.discount_trace
    if trace is None:
        axes.text(0.5, 0.5, "no discount trace", ha="center", va="center", transform=axes.transAxes)
    else:
        axes.plot(trace.deltas, np.array(trace.values, dtype=float), marker="o", label="delta * Y(delta)")
        axes.axhline(trace.extrapolated, linestyle="--", color="grey", label="extrapolated")
        axes.set_xscale("log")
        axes.legend(fontsize="small")
    axes.set_xlabel("delta")
    axes.set_ylabel("delta * Y0")
    axes.set_title("vanishing discount")
    return figure


def emit_plots(report: ConvergenceReport, directory: Path) -> list[Path]:
    """Write the three plot files; names depend only on the report's config hash."""
    if not report.rows:
        raise ValueError("report has no rows")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    builders = {
        "error-vs-eps": _error_plot,
        "lambda-slices": _lambda_plot,
        "discount-trace": _trace_plot,
    }
    return [
        _save(builders[kind](report), directory / plot_name(kind, report.config_hash))
        for kind in PLOT_KINDS
    ]
