"""
子命令处理模块

每个子命令对应一个 handler：读取模型或实验文件、调用求解层、写出产物，
并通过 ResultFormatter 输出摘要。错误交给 ui.cli.runner 统一映射为退出码。
"""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from config.settings import Settings
from core.bsde import solve_epsilon_bsde, solve_limit_bsde
from core.ergodic import EffectiveHamiltonianTable, LambdaBudgets, build_lambda_table
from core.forward import TimeGrid
from core.model import ModelSpec, ValidationReport, build_model_with_report, read_model_file
from core.study import (
    ConvergenceReport,
    StudyConfig,
    emit_plots,
    load_study_config,
    run_convergence_study,
    run_reaction_diffusion_example,
)
from core.study.config import LambdaSection, ReactionDiffusionSection

if TYPE_CHECKING:
    from ui.cli.output_formatter import ResultFormatter


def parse_grid(text: str) -> list[float]:
    """Parse ``start:stop:count`` or a comma-separated list of nodes."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid '{text}' must look like start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("grid count must be >= 1")
        return [float(v) for v in np.linspace(start, stop, count)]
    return [float(part) for part in text.split(",") if part.strip()]


def _probe_seed(args: argparse.Namespace, file_seed: int | None, settings: Settings) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    if file_seed is not None:
        return file_seed
    return settings.probes.seed


def _load_spec(
    path: Path, settings: Settings, seed: int | None = None
) -> tuple[ModelSpec, ValidationReport]:
    model_file = read_model_file(path)
    probe_seed = seed if seed is not None else (
        model_file.seeds.probe if model_file.seeds.probe is not None else settings.probes.seed
    )
    return build_model_with_report(model_file, probes=settings.probes.count, seed=probe_seed)


def _output_path(args: argparse.Namespace, settings: Settings, default_name: str) -> Path:
    if getattr(args, "output", None):
        return Path(args.output)
    return settings.output_dir / default_name


def _simulation_seed(args: argparse.Namespace, path: Path) -> int:
    if getattr(args, "sim_seed", None) is not None:
        return args.sim_seed
    return read_model_file(path).seeds.simulation


def handle_validate(args: argparse.Namespace, settings: Settings, formatter: ResultFormatter) -> int:
    model_file = read_model_file(args.model)
    seed = _probe_seed(args, model_file.seeds.probe, settings)
    _, report = build_model_with_report(model_file, probes=args.probes or settings.probes.count, seed=seed)
    formatter.print_validation(report)
    if args.output:
        path = Path(args.output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        formatter.print_status(f"校验报告已写入 {path}")
    return 0


def _budgets(args: argparse.Namespace) -> LambdaBudgets:
    values = {
        "horizon": args.horizon,
        "dt": args.lambda_dt,
        "n_paths": args.lambda_paths,
        "seed": args.lambda_seed,
    }
    return LambdaBudgets(**{key: value for key, value in values.items() if value is not None})


def _build_table(
    spec: ModelSpec, args: argparse.Namespace, settings: Settings
) -> EffectiveHamiltonianTable:
    if not args.x_grid or not args.z_grid:
        raise ValueError("--x-grid and --z-grid are required to build a lambda table")
    return build_lambda_table(
        spec,
        parse_grid(args.x_grid),
        parse_grid(args.z_grid),
        method=args.method or settings.budgets.lambda_method,
        budgets=_budgets(args),
        active_x=args.active_x,
        active_z=args.active_z,
        workers=settings.workers,
    )


def handle_lambda(args: argparse.Namespace, settings: Settings, formatter: ResultFormatter) -> int:
    spec, _ = _load_spec(args.model, settings, args.seed)
    table = _build_table(spec, args, settings)
    path = table.to_csv(_output_path(args, settings, f"lambda-{spec.name}.csv"))
    formatter.print_lambda_table(table, path)
    return 0


def handle_solve_limit(args: argparse.Namespace, settings: Settings, formatter: ResultFormatter) -> int:
    spec, _ = _load_spec(args.model, settings, args.seed)
    if args.lambda_table:
        table = EffectiveHamiltonianTable.from_csv(
            args.lambda_table,
            spec.constants.lambda_lipschitz_x,
            spec.constants.lambda_lipschitz_z,
        )
    else:
        table = _build_table(spec, args, settings)
    grid = TimeGrid.unit(args.n_steps)
    solution = solve_limit_bsde(
        spec,
        table,
        grid,
        args.n_paths or settings.budgets.default_paths,
        degree=args.degree,
        seed=_simulation_seed(args, args.model),
        workers=settings.workers,
    )
    path = solution.to_json(_output_path(args, settings, f"limit-{spec.name}.json"))
    solution.export_fits_csv(path.with_suffix(".fits.csv"))
    formatter.print_solution("极限 BSDE", solution, path)
    return 0


def handle_solve_eps(args: argparse.Namespace, settings: Settings, formatter: ResultFormatter) -> int:
    spec, _ = _load_spec(args.model, settings, args.seed)
    grid = TimeGrid.unit(args.n_steps) if args.n_steps else TimeGrid.resolving(args.eps)
    solution = solve_epsilon_bsde(
        spec,
        args.eps,
        grid,
        args.n_paths or settings.budgets.default_paths,
        degree=args.degree,
        seed=_simulation_seed(args, args.model),
        workers=settings.workers,
    )
    path = solution.to_json(_output_path(args, settings, f"eps-{args.eps:g}-{spec.name}.json"))
    solution.export_fits_csv(path.with_suffix(".fits.csv"))
    formatter.print_solution(f"ε-BSDE (ε = {args.eps:g})", solution, path)
    return 0


def _with_overrides(config: StudyConfig, args: argparse.Namespace) -> StudyConfig:
    updates = {}
    if getattr(args, "eps", None):
        updates["eps"] = args.eps
    if getattr(args, "n_paths", None):
        updates["n_paths"] = args.n_paths
    if not updates:
        return config
    return StudyConfig.model_validate({**config.model_dump(), **updates})


def _study_output(args: argparse.Namespace, config: StudyConfig, settings: Settings) -> Path:
    if args.output_dir:
        return Path(args.output_dir)
    return config.output_dir or settings.output_dir


def handle_converge(args: argparse.Namespace, settings: Settings, formatter: ResultFormatter) -> int:
    config = _with_overrides(load_study_config(args.study), args)
    output_dir = _study_output(args, config, settings)
    formatter.print_status(f"收敛实验 {config.name} 开始运行...")
    report = run_convergence_study(
        config,
        output_dir=output_dir,
        workers=args.workers or config.workers or settings.workers,
        probes=settings.probes.count,
        lambda_method=settings.budgets.lambda_method,
    )
    formatter.print_convergence(report, output_dir / report.config_hash)
    return 0


def default_example_config(n_modes: int) -> StudyConfig:
    return StudyConfig(
        name=f"reaction-diffusion-{n_modes}",
        reaction_diffusion=ReactionDiffusionSection(n_modes=n_modes),
        lambda_table=LambdaSection(
            x_grid=[-1.0, -0.5, 0.0, 0.5, 1.0],
            z_grid=[-1.5, -0.75, 0.0, 0.75, 1.5],
            active_x=1,
            active_z=1,
        ),
    )


def handle_example_rd(args: argparse.Namespace, settings: Settings, formatter: ResultFormatter) -> int:
    if args.study:
        config = load_study_config(args.study)
        if args.n_modes is not None and config.reaction_diffusion is not None:
            section = config.reaction_diffusion.model_copy(update={"n_modes": args.n_modes})
            config = StudyConfig.model_validate(
                {**config.model_dump(), "reaction_diffusion": section.model_dump()}
            )
    else:
        config = default_example_config(args.n_modes or 2)
    config = _with_overrides(config, args)
    output_dir = _study_output(args, config, settings)
    report = run_reaction_diffusion_example(
        config,
        output_dir=output_dir,
        workers=args.workers or config.workers or settings.workers,
        probes=settings.probes.count,
        lambda_method=settings.budgets.lambda_method,
    )
    formatter.print_convergence(report, output_dir / report.config_hash)
    return 0


def handle_plots(args: argparse.Namespace, settings: Settings, formatter: ResultFormatter) -> int:
    report_path = Path(args.report)
    report = ConvergenceReport.load(report_path)
    directory = Path(args.output_dir) if args.output_dir else report_path.parent
    paths = emit_plots(report, directory)
    formatter.print_paths("图像文件", paths)
    return 0


HANDLERS = {
    "validate": handle_validate,
    "lambda": handle_lambda,
    "solve-limit": handle_solve_limit,
    "solve-eps": handle_solve_eps,
    "converge": handle_converge,
    "example-rd": handle_example_rd,
    "plots": handle_plots,
}
