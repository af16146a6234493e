from __future__ import annotations

from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field


class ConvergenceRow(BaseModel):
    eps: float
    y0: float | None = None
    ci: float | None = Field(None, ge=0.0)
    error: float | None = None
    joint_ci: float | None = Field(None, ge=0.0)
    status: Literal["ok", "failed"] = "ok"
    message: str = ""


class LimitResult(BaseModel):
    y0: float
    ci: float = Field(ge=0.0)
    n_steps: int
    n_paths: int
    clamped_fraction: float = 0.0


class LambdaSlice(BaseModel):
    """lambda along z_1 at one x_1 node, other coordinates at their middle node."""

    x: float
    z: list[float]
    values: list[float | None]


class LambdaProvenance(BaseModel):
    method: str
    x_grid: list[float]
    z_grid: list[float]
    active_x: int
    active_z: int
    seed: int
    n_paths: int
    concave: bool
    lipschitz: bool
    invalid_nodes: int
    csv: str
    slices: list[LambdaSlice] = Field(default_factory=list)


class DiscountTrace(BaseModel):
    x: list[float]
    z: list[float]
    deltas: list[float]
    values: list[float | None]
    extrapolated: float


class ControlCheck(BaseModel):
    eps: float
    policies: int
    value: float
    ci: float
    best_index: int
    bsde_y0: float | None = None
    gap: float | None = None


class ConvergenceReport(BaseModel):
    name: str
    model_name: str
    config_hash: str
    eps: list[float]
    dt: float
    n_paths: int
    degree: int
    seed: int
    rows: list[ConvergenceRow]
    limit: LimitResult
    lambda_table: LambdaProvenance
    discount_trace: DiscountTrace | None = None
    control: ControlCheck | None = None
    partial: bool = False

    @property
    def completed(self) -> list[ConvergenceRow]:
        return [row for row in self.rows if row.status == "ok"]

    def empirical_slope(self) -> float | None:
        """Least-squares slope of log error against log eps over completed rows."""
        rows = [row for row in self.completed if row.error is not None and row.error > 0.0]
        if len(rows) < 2:
            return None
        log_eps = np.log([row.eps for row in rows])
        log_error = np.log([row.error for row in rows])
        slope, _ = np.polyfit(log_eps, log_error, 1)
        return float(slope)

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path) -> "ConvergenceReport":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))
