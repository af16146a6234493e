"""twoscale-lab 的命令行执行入口。"""

from __future__ import annotations

import argparse

import logfire
from rich.console import Console

from commands.subcommands import HANDLERS
from config.settings import Settings
from core.errors import HypothesisViolation, NumericalFailure, TwoScaleError

from .output_formatter import ResultFormatter

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code (2 validation, 3 numerical)."""
    if isinstance(exc, NumericalFailure):
        return EXIT_NUMERICAL
    if isinstance(exc, HypothesisViolation):
        return EXIT_VALIDATION
    if isinstance(exc, TwoScaleError):
        return exc.exit_code
    if isinstance(exc, ValueError):
        # pydantic.ValidationError is a ValueError
        return EXIT_VALIDATION
    return 1


def run_command(
    args: argparse.Namespace,
    settings: Settings,
    console: Console | None = None,
) -> int:
    """Run one subcommand and return its exit code."""
    formatter = ResultFormatter(console)
    handler = HANDLERS[args.command]
    try:
        with logfire.span("command {command}", command=args.command):
            return handler(args, settings, formatter)
    except (TwoScaleError, ValueError, OSError) as exc:
        code = exit_code_for(exc)
        logfire.warn("command {command} failed: {error}", command=args.command, error=str(exc))
        formatter.print_error(str(exc), code)
        return code
