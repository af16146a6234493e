"""Convergence studies: lambda table, limit BSDE, one eps-BSDE per row.

Every row and the limit solve share a single time grid with dt = eps_min / 10
and the same simulation seed, so the slow paths are bit-identical across rows.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import logfire
import numpy as np

from core.bsde import solve_epsilon_bsde, solve_limit_bsde
from core.control import binned_policy_family, brute_force_value
from core.ergodic import EffectiveHamiltonianTable, build_lambda_table, solve_ergodic_bsde
from core.errors import NumericalFailure, TwoScaleError
from core.forward import TimeGrid, simulate_slow_paths
from core.model import galerkin_truncate, load_model_file
from core.model.spec import ModelSpec
from infra.observability import stage_span

from .config import StudyConfig
from .plots import emit_plots
from .report import (
    ControlCheck,
    ConvergenceReport,
    ConvergenceRow,
    DiscountTrace,
    LambdaProvenance,
    LambdaSlice,
    LimitResult,
)
from .run_store import RunStore

DEFAULT_PROBES = 2000


class _Stopwatch:
    def __init__(self) -> None:
        self.timings: dict[str, float] = {}

    def record(self, stage: str, started: float) -> None:
        self.timings[stage] = round(time.perf_counter() - started, 6)


def _finite_or_none(values) -> list[float | None]:
    return [float(value) if np.isfinite(value) else None for value in np.ravel(values)]


def lambda_slices(table: EffectiveHamiltonianTable) -> list[LambdaSlice]:
    """lambda along z_1 for every x_1 node; remaining coordinates sit at their middle node."""
    mid_x, mid_z = table.x_grid.size // 2, table.z_grid.size // 2
    x_nodes = table.x_grid if table.active_x else np.array([0.0])
    z_nodes = table.z_grid if table.active_z else np.array([0.0])
    slices = []
    for i, x in enumerate(x_nodes):
        index: list[int | slice] = [i] + [mid_x] * (table.active_x - 1) if table.active_x else []
        if table.active_z:
            index += [slice(None)] + [mid_z] * (table.active_z - 1)
        values = np.atleast_1d(table.values[tuple(index)])
        slices.append(LambdaSlice(x=float(x), z=[float(z) for z in z_nodes], values=_finite_or_none(values)))
    return slices


def _centre_node(table: EffectiveHamiltonianTable, spec: ModelSpec) -> tuple[np.ndarray, np.ndarray]:
    x = np.zeros(spec.slow_dim)
    z = np.zeros(spec.slow_noise_dim)
    x[: table.active_x] = table.x_grid[table.x_grid.size // 2]
    z[: table.active_z] = table.z_grid[table.z_grid.size // 2]
    return x, z


def _discount_trace(
    spec: ModelSpec, table: EffectiveHamiltonianTable, config: StudyConfig
) -> DiscountTrace | None:
    budgets = config.lambda_table.budgets
    x, z = _centre_node(table, spec)
    try:
        solution = solve_ergodic_bsde(
            spec,
            x,
            z,
            deltas=budgets.deltas,
            horizon=budgets.horizon,
            dt=budgets.dt,
            n_paths=budgets.n_paths,
            degree=budgets.degree,
            seed=budgets.seed,
            tolerance=float("inf"),
        )
    except (NumericalFailure, ValueError) as exc:
        logfire.warn("discount trace unavailable: {error}", error=str(exc))
        return None
    return DiscountTrace(
        x=[float(v) for v in x],
        z=[float(v) for v in z],
        deltas=[delta for delta, _ in solution.discount_trace],
        values=[value for _, value in solution.discount_trace],
        extrapolated=solution.lambda_,
    )


def _resolve_spec(config: StudyConfig, probes: int) -> ModelSpec:
    if config.reaction_diffusion is not None:
        section = config.reaction_diffusion
        return galerkin_truncate(
            section.params, section.n_modes, probes=probes, seed=config.seeds.probe or 0
        )
    return load_model_file(config.model, probes=probes, seed=config.seeds.probe)


def run_convergence_study(
    config: StudyConfig,
    output_dir: Path | None = None,
    workers: int | None = None,
    probes: int = DEFAULT_PROBES,
    lambda_method: str = "time_average",
    spec: ModelSpec | None = None,
) -> ConvergenceReport:
    """Run the study and write report JSON, row and table CSVs, plots and timings.

    Errors from the model, table and limit stages propagate with their stage
    label. A failing eps row is recorded as failed and the report is marked
    partial; the other rows are kept.
    """
    output_dir = output_dir or config.output_dir
    if output_dir is None:
        raise ValueError("study needs an output directory")
    workers = workers or config.workers or 1
    if config.lambda_table.method is None:
        section = config.lambda_table.model_copy(update={"method": lambda_method})
        config = config.model_copy(update={"lambda_table": section})
    config_hash = config.short_hash()
    store = RunStore(output_dir, config_hash)
    stopwatch = _Stopwatch()
    seed = config.seeds.simulation
    grid = TimeGrid.resolving(config.eps_min)
    method = config.lambda_table.method

    with logfire.span("run_convergence_study", name=config.name, config_hash=config_hash, workers=workers):
        started = time.perf_counter()
        if spec is None:
            with stage_span("model"):
                spec = _resolve_spec(config, probes)
        stopwatch.record("model", started)

        started = time.perf_counter()
        with stage_span("lambda", method=method):
            section = config.lambda_table
            table = build_lambda_table(
                spec,
                section.x_grid,
                section.z_grid,
                method=method,
                budgets=section.budgets,
                active_x=section.active_x,
                active_z=section.active_z,
                workers=workers,
            )
            table.to_csv(store.lambda_path)
            trace = _discount_trace(spec, table, config)
        stopwatch.record("lambda", started)

        started = time.perf_counter()
        with stage_span("limit"):
            slow = simulate_slow_paths(spec, grid, config.n_paths, seed)
            limit = solve_limit_bsde(spec, table, grid, config.n_paths, config.degree, seed, bundle=slow)
            del slow
        stopwatch.record("limit", started)

        def solve_row(eps: float) -> tuple[ConvergenceRow, float]:
            row_started = time.perf_counter()
            try:
                with stage_span(f"eps={eps:g}"):
                    solution = solve_epsilon_bsde(spec, eps, grid, config.n_paths, config.degree, seed)
            except TwoScaleError as exc:
                return ConvergenceRow(eps=eps, status="failed", message=str(exc)), time.perf_counter() - row_started
            row = ConvergenceRow(
                eps=eps,
                y0=solution.y0,
                ci=solution.ci,
                error=abs(solution.y0 - limit.y0),
                joint_ci=float(np.hypot(solution.ci, limit.ci)),
            )
            return row, time.perf_counter() - row_started

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(solve_row, config.eps))
        else:
            results = [solve_row(eps) for eps in config.eps]
        rows = [row for row, _ in results]
        for row, elapsed in results:
            stopwatch.timings[f"eps={row.eps:g}"] = round(elapsed, 6)

        control_check = None
        if config.control is not None and spec.control is not None:
            started = time.perf_counter()
            with stage_span("control"):
                control_check = _control_check(spec, config, grid, rows)
            stopwatch.record("control", started)

        report = ConvergenceReport(
            name=config.name,
            model_name=spec.name,
            config_hash=config_hash,
            eps=list(config.eps),
            dt=grid.dt,
            n_paths=config.n_paths,
            degree=config.degree,
            seed=seed,
            rows=rows,
            limit=LimitResult(
                y0=limit.y0,
                ci=limit.ci,
                n_steps=grid.n_steps,
                n_paths=config.n_paths,
                clamped_fraction=limit.diagnostics.get("clamped_fraction", 0.0),
            ),
            lambda_table=LambdaProvenance(
                method=table.method,
                x_grid=list(section.x_grid),
                z_grid=list(section.z_grid),
                active_x=table.active_x,
                active_z=table.active_z,
                seed=section.budgets.seed,
                n_paths=section.budgets.n_paths,
                concave=table.certificates.concave,
                lipschitz=table.certificates.lipschitz,
                invalid_nodes=int(np.count_nonzero(~table.valid)),
                csv=store.lambda_path.name,
                slices=lambda_slices(table),
            ),
            discount_trace=trace,
            control=control_check,
            partial=any(row.status != "ok" for row in rows),
        )
        store.save_report(report)
        store.save_rows(report)
        emit_plots(report, store.run_dir)
        store.save_timings(stopwatch.timings)
        if report.partial:
            logfire.warn("study {name} finished partially", name=config.name)
        logfire.info("study {name} written to {path}", name=config.name, path=str(store.run_dir))
    return report


def _control_check(
    spec: ModelSpec, config: StudyConfig, grid: TimeGrid, rows: list[ConvergenceRow]
) -> ControlCheck | None:
    section = config.control
    eps = config.eps_min
    policies = binned_policy_family(spec.control.size, grid, section.family)
    try:
        result = brute_force_value(
            spec, eps, policies, grid, section.n_paths, config.seeds.simulation
        )
    except NumericalFailure as exc:
        logfire.warn("control check failed: {error}", error=str(exc))
        return None
    reference = next((row for row in rows if row.eps == eps and row.status == "ok"), None)
    return ControlCheck(
        eps=eps,
        policies=len(policies),
        value=result.value,
        ci=result.ci,
        best_index=result.best_index,
        bsde_y0=None if reference is None else reference.y0,
        gap=None if reference is None else result.value - reference.y0,
    )


def run_reaction_diffusion_example(
    config: StudyConfig,
    output_dir: Path | None = None,
    workers: int | None = None,
    probes: int = DEFAULT_PROBES,
    lambda_method: str = "time_average",
) -> ConvergenceReport:
    """Galerkin-truncate the reaction-diffusion example and run the study on it."""
    if config.reaction_diffusion is None:
        raise ValueError("example study needs a 'reaction_diffusion' section")
    with stage_span("model", n_modes=config.reaction_diffusion.n_modes):
        spec = _resolve_spec(config, probes)
    return run_convergence_study(
        config,
        output_dir=output_dir,
        workers=workers,
        probes=probes,
        lambda_method=lambda_method,
        spec=spec,
    )
