"""CLI 输出与执行层。"""

from .output_formatter import ResultFormatter
from .runner import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, exit_code_for, run_command

__all__ = [
    "EXIT_NUMERICAL",
    "EXIT_OK",
    "EXIT_VALIDATION",
    "ResultFormatter",
    "exit_code_for",
    "run_command",
]
