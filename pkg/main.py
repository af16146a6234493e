"""
两尺度随机控制数值实验的命令行入口

子命令：validate / lambda / solve-limit / solve-eps / converge / example-rd / plots
退出码：0 成功；2 校验失败；3 数值失败
"""

import argparse
import os
import sys
from pathlib import Path

from dotenv import load_dotenv

from config.settings import load_settings


def _add_model_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("model", type=Path, help="模型描述文件（JSON）")
    parser.add_argument("--seed", type=int, help="假设探针的随机种子")
    parser.add_argument("--sim-seed", type=int, help="路径模拟的随机种子；默认取模型文件 seeds.simulation")
    parser.add_argument("--output", help="结果文件路径；默认写入 TWOSCALE_OUTPUT_DIR")


def _add_table_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x-grid", help="慢变量网格：start:stop:count 或逗号分隔的节点")
    parser.add_argument("--z-grid", help="z 网格：start:stop:count 或逗号分隔的节点")
    parser.add_argument("--method", choices=("time_average", "ergodic_bsde"), help="λ 估计方法")
    parser.add_argument("--active-x", type=int, help="参与制表的慢变量坐标数")
    parser.add_argument("--active-z", type=int, help="参与制表的 z 坐标数")
    parser.add_argument("--horizon", type=float, help="快变量模拟时长（重标度时间）")
    parser.add_argument("--lambda-dt", type=float, help="快变量模拟步长")
    parser.add_argument("--lambda-paths", type=int, help="每个节点的路径数")
    parser.add_argument("--lambda-seed", type=int, help="λ 表的随机种子（所有节点共用）")


def _add_study_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--output-dir", help="产物根目录；默认取实验文件或 TWOSCALE_OUTPUT_DIR")
    parser.add_argument("--workers", type=int, help="并行线程数")
    parser.add_argument("--eps", type=float, nargs="+", help="覆盖实验文件中的 ε 列表")
    parser.add_argument("--n-paths", type=int, help="覆盖实验文件中的路径数")


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="两尺度随机控制数值实验")
    parser.add_argument(
        "--twoscale-home",
        help="数据与配置目录；不传时使用 TWOSCALE_HOME 或 ~/.twoscale",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    validate = subparsers.add_parser("validate", help="检查模型的全部假设")
    validate.add_argument("model", type=Path, help="模型描述文件（JSON）")
    validate.add_argument("--probes", type=int, help="探针数量（>= 100）")
    validate.add_argument("--seed", type=int, help="探针随机种子")
    validate.add_argument("--output", help="把校验报告写成 JSON")

    table = subparsers.add_parser("lambda", help="在网格上计算有效 Hamiltonian λ(x, z)")
    _add_model_options(table)
    _add_table_options(table)

    limit = subparsers.add_parser("solve-limit", help="求解极限 BSDE")
    _add_model_options(limit)
    _add_table_options(limit)
    limit.add_argument("--lambda-table", type=Path, help="已有的 λ 表 CSV")
    limit.add_argument("--n-steps", type=int, default=50, help="时间步数")
    limit.add_argument("--n-paths", type=int, help="路径数；默认 TWOSCALE_DEFAULT_PATHS")
    limit.add_argument("--degree", type=int, default=2, help="回归多项式次数")

    eps = subparsers.add_parser("solve-eps", help="求解 ε 尺度的 BSDE")
    _add_model_options(eps)
    eps.add_argument("--eps", type=float, required=True, help="尺度参数 ε")
    eps.add_argument("--n-steps", type=int, help="时间步数；默认取满足 dt <= ε/10 的最粗网格")
    eps.add_argument("--n-paths", type=int, help="路径数；默认 TWOSCALE_DEFAULT_PATHS")
    eps.add_argument("--degree", type=int, default=2, help="回归多项式次数")

    converge = subparsers.add_parser("converge", help="运行收敛实验")
    converge.add_argument("study", type=Path, help="实验描述文件（JSON）")
    _add_study_overrides(converge)

    example = subparsers.add_parser("example-rd", help="反应扩散示例的收敛实验")
    example.add_argument("study", type=Path, nargs="?", help="可选的实验描述文件")
    example.add_argument("--n-modes", type=int, help="Galerkin 截断的模态数（<= 8）")
    _add_study_overrides(example)

    plots = subparsers.add_parser("plots", help="根据报告 JSON 重新生成图像")
    plots.add_argument("report", type=Path, help="收敛报告 JSON")
    plots.add_argument("--output-dir", help="图像目录；默认与报告同目录")

    return parser.parse_args(argv)


def _load_twoscale_env(home_override: str | None) -> Path:
    """Load the .env file stored under the resolved TWOSCALE_HOME directory."""
    raw_home = home_override or os.environ.get("TWOSCALE_HOME", "~/.twoscale")
    twoscale_home = Path(raw_home).expanduser()
    if not twoscale_home.is_absolute():
        twoscale_home = Path.cwd() / twoscale_home
    twoscale_home = twoscale_home.resolve()

    load_dotenv(twoscale_home / ".env")
    # A TWOSCALE_HOME entry inside that .env must not move the home that was
    # already selected.
    os.environ["TWOSCALE_HOME"] = str(twoscale_home)
    return twoscale_home


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(argv)
    # 在读取配置前，先从 TWOSCALE_HOME 加载 .env。
    _load_twoscale_env(args.twoscale_home)
    try:
        settings = load_settings()
    except ValueError as exc:
        print(f"配置错误：{exc}", file=sys.stderr)
        return 2

    from infra.observability import configure_observability
    from ui.cli.runner import run_command

    configure_observability(settings)
    return run_command(args, settings)


if __name__ == "__main__":
    sys.exit(main())
