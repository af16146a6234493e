"""Effective Hamiltonian: ergodic estimators, tables and the control-side bound."""

from .control_check import ErgodicControlResult, ergodic_control_cross_check
from .estimators import (
    ErgodicSolution,
    LambdaEstimate,
    default_ergodic_horizon,
    estimate_lambda_time_average,
    richardson,
    solve_ergodic_bsde,
)
from .table import (
    Certificates,
    EffectiveHamiltonianTable,
    LambdaBudgets,
    build_lambda_table,
    certify_table,
)

__all__ = [
    "Certificates",
    "EffectiveHamiltonianTable",
    "ErgodicControlResult",
    "ErgodicSolution",
    "LambdaBudgets",
    "LambdaEstimate",
    "build_lambda_table",
    "certify_table",
    "default_ergodic_horizon",
    "ergodic_control_cross_check",
    "estimate_lambda_time_average",
    "richardson",
    "solve_ergodic_bsde",
]
