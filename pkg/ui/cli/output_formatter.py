"""
输出格式化工具

使用 rich 库把校验报告、λ 表、BSDE 结果和收敛实验渲染为终端表格。
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from core.bsde import BsdeSolution
from core.ergodic import EffectiveHamiltonianTable
from core.model import ValidationReport
from core.study import ConvergenceReport


def _fmt(value: float | None, digits: int = 6) -> str:
    if value is None or not np.isfinite(value):
        return "-"
    return f"{value:.{digits}g}"


class ResultFormatter:
    """批处理命令的结果输出器"""

    def __init__(self, console: Console | None = None):
        self.console = console or Console()

    def print_status(self, message: str) -> None:
        self.console.print(f"[dim]{message}[/dim]")

    def print_error(self, message: str, exit_code: int) -> None:
        self.console.print(
            Panel.fit(
                escape(message),
                title=f"[bold red]失败 (exit {exit_code})[/bold red]",
                border_style="red",
                padding=(0, 1),
            )
        )

    def print_validation(self, report: ValidationReport) -> None:
        table = Table(title=f"模型校验：{report.model_name}")
        table.add_column("假设")
        table.add_column("结果")
        table.add_column("估计值", justify="right")
        table.add_column("上限", justify="right")
        table.add_column("说明")
        for check in report.checks:
            table.add_row(
                check.hypothesis,
                "[green]通过[/green]" if check.passed else "[red]未通过[/red]",
                _fmt(check.statistic),
                _fmt(check.threshold),
                escape(check.detail),
            )
        self.console.print(table)
        self.console.print(f"μ = {_fmt(report.mu)}，探针数 {report.probes}，种子 {report.seed}")

    def print_lambda_table(self, table: EffectiveHamiltonianTable, path: Path | None = None) -> None:
        invalid = int(np.count_nonzero(~table.valid))
        lines = [
            f"方法: {table.method}",
            f"网格形状: {table.shape}",
            f"无效节点: {invalid}",
            f"凹性证书: {'通过' if table.certificates.concave else '未通过'}",
            f"Lipschitz 证书: {'通过' if table.certificates.lipschitz else '未通过'}",
        ]
        if path is not None:
            lines.append(f"CSV: {path}")
        self.console.print(
            Panel.fit("\n".join(lines), title="[bold cyan]λ 表[/bold cyan]", border_style="cyan")
        )

    def print_solution(self, title: str, solution: BsdeSolution, path: Path | None = None) -> None:
        lines = [
            f"Y0 = {_fmt(solution.y0, 8)} ± {_fmt(solution.ci, 3)}",
            f"步数 {solution.n_steps}，路径 {solution.n_paths}",
        ]
        for key, value in sorted(solution.diagnostics.items()):
            lines.append(f"{key}: {_fmt(value)}")
        if path is not None:
            lines.append(f"JSON: {path}")
        self.console.print(
            Panel.fit("\n".join(lines), title=f"[bold cyan]{title}[/bold cyan]", border_style="cyan")
        )

    def print_convergence(self, report: ConvergenceReport, run_dir: Path | None = None) -> None:
        table = Table(title=f"收敛实验：{report.name}（{report.config_hash}）")
        table.add_column("ε", justify="right")
        table.add_column("Y0(ε)", justify="right")
        table.add_column("CI", justify="right")
        table.add_column("|误差|", justify="right")
        table.add_column("联合 CI", justify="right")
        table.add_column("状态")
        for row in report.rows:
            status = "[green]ok[/green]" if row.status == "ok" else f"[red]{escape(row.message)}[/red]"
            table.add_row(
                _fmt(row.eps),
                _fmt(row.y0),
                _fmt(row.ci, 3),
                _fmt(row.error, 3),
                _fmt(row.joint_ci, 3),
                status,
            )
        self.console.print(table)
        self.console.print(f"极限 Ȳ0 = {_fmt(report.limit.y0, 8)} ± {_fmt(report.limit.ci, 3)}")
        slope = report.empirical_slope()
        if slope is not None:
            self.console.print(f"经验斜率（log 误差 / log ε）: {slope:.3f}")
        if report.control is not None:
            self.console.print(
                f"策略族上界 ({report.control.policies} 个策略): "
                f"{_fmt(report.control.value)} ± {_fmt(report.control.ci, 3)}，差距 {_fmt(report.control.gap, 3)}"
            )
        if report.partial:
            self.console.print("[yellow]部分 ε 行失败，报告标记为 partial。[/yellow]")
        if run_dir is not None:
            self.console.print(f"产物目录: {run_dir}")

    def print_paths(self, title: str, paths: list[Path]) -> None:
        self.console.print(f"[bold]{title}[/bold]")
        for path in paths:
            self.console.print(f"  {path}")
