"""Tabulated effective Hamiltonian with multilinear interpolation.

Every tabulated slow coordinate shares ``x_grid`` and every tabulated noise
coordinate shares ``z_grid``. Only the leading ``active_x`` / ``active_z``
coordinates are tabulated; the others are pinned to zero while the table is
built and ignored when it is queried.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import logfire
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field
from scipy.interpolate import RegularGridInterpolator

from core.errors import NumericalFailure
from core.model.spec import ModelSpec

from .estimators import (
    DEFAULT_DELTAS,
    TIME_AVERAGE_MIXING,
    Z_95,
    estimate_lambda_time_average,
    solve_ergodic_bsde,
)

LambdaMethod = Literal["time_average", "ergodic_bsde"]
CERTIFICATE_SIGMAS = 3.0


class LambdaBudgets(BaseModel):
    model_config = ConfigDict(extra="forbid")

    horizon: float | None = Field(None, gt=0.0)
    dt: float = Field(0.05, gt=0.0)
    n_paths: int = Field(2000, ge=2)
    degree: int = Field(2, ge=1)
    seed: int = 0
    deltas: list[float] = Field(default_factory=lambda: list(DEFAULT_DELTAS))
    tolerance: float = Field(0.05, gt=0.0)


@dataclass
class Certificates:
    concave: bool = True
    lipschitz: bool = True
    concavity_failures: list[tuple[int, ...]] = field(default_factory=list)
    lipschitz_failures: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class EffectiveHamiltonianTable:
    x_grid: np.ndarray
    z_grid: np.ndarray
    active_x: int
    active_z: int
    values: np.ndarray
    ci: np.ndarray
    valid: np.ndarray
    errors: dict[int, str] = field(default_factory=dict)
    certificates: Certificates = field(default_factory=Certificates)
    method: str = "time_average"

    def __post_init__(self) -> None:
        self.x_grid = np.asarray(self.x_grid, dtype=float)
        self.z_grid = np.asarray(self.z_grid, dtype=float)
        shape = self.shape
        self.values = np.asarray(self.values, dtype=float).reshape(shape)
        self.ci = np.asarray(self.ci, dtype=float).reshape(shape)
        self.valid = np.asarray(self.valid, dtype=bool).reshape(shape)
        self._interpolator = self._build_interpolator()

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.x_grid.size,) * self.active_x + (self.z_grid.size,) * self.active_z

    @property
    def axes(self) -> list[np.ndarray]:
        return [self.x_grid] * self.active_x + [self.z_grid] * self.active_z

    def node_points(self) -> np.ndarray:
        """All nodes as rows (x_1..x_ax, z_1..z_az), in C order of ``values``."""
        if not self.axes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([axis.ravel() for axis in mesh], axis=1)

    def _build_interpolator(self):
        moving = [axis for axis, grid in enumerate(self.axes) if grid.size > 1]
        if not moving:
            constant = float(self.values.ravel()[0])
            return lambda points: np.full(points.shape[0], constant)
        squeezed = self.values.reshape([self.axes[axis].size for axis in moving])
        interpolator = RegularGridInterpolator(
            [self.axes[axis] for axis in moving], squeezed, method="linear"
        )
        return lambda points: interpolator(points[:, moving])

    def evaluate(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Interpolated values and a per-row flag for clamped queries."""
        x = np.atleast_2d(x)
        z = np.atleast_2d(z)
        points = np.concatenate([x[:, : self.active_x], z[:, : self.active_z]], axis=1)
        lower = np.array([grid[0] for grid in self.axes])
        upper = np.array([grid[-1] for grid in self.axes])
        clamped_points = np.clip(points, lower, upper)
        clamped = np.any(clamped_points != points, axis=1)
        return self._interpolator(clamped_points), clamped

    def __call__(self, x: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.evaluate(x, z)[0]

    def slice_z(self, x_index: tuple[int, ...] = ()) -> np.ndarray:
        """Values along the z axes at a fixed x node (default: first node)."""
        index = tuple(x_index) + (0,) * (self.active_x - len(x_index))
        return self.values[index]

    def to_frame(self) -> pd.DataFrame:
        points = self.node_points()
        frame = pd.DataFrame(
            points,
            columns=[f"x{i + 1}" for i in range(self.active_x)]
            + [f"z{i + 1}" for i in range(self.active_z)],
        )
        flat = np.arange(self.values.size)
        concave_bad = {i for triple in self.certificates.concavity_failures for i in triple}
        lipschitz_bad = {i for pair in self.certificates.lipschitz_failures for i in pair}
        frame["lambda"] = self.values.ravel()
        frame["ci"] = self.ci.ravel()
        frame["valid"] = self.valid.ravel().astype(int)
        frame["concave_ok"] = [int(i not in concave_bad) for i in flat]
        frame["lipschitz_ok"] = [int(i not in lipschitz_bad) for i in flat]
        frame["error"] = [self.errors.get(int(i), "") for i in flat]
        return frame

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.12g")
        return path

    @classmethod
    def from_csv(
        cls, path: Path, lipschitz_x: float = 1.0, lipschitz_z: float = 1.0
    ) -> "EffectiveHamiltonianTable":
        frame = pd.read_csv(path)
        frame["error"] = frame["error"].fillna("").astype(str)
        x_columns = [column for column in frame.columns if column.startswith("x")]
        z_columns = [column for column in frame.columns if column.startswith("z")]
        x_grid = np.unique(frame[x_columns[0]]) if x_columns else np.array([0.0])
        z_grid = np.unique(frame[z_columns[0]]) if z_columns else np.array([0.0])
        errors = {
            int(index): str(message)
            for index, message in enumerate(frame["error"])
            if str(message)
        }
        table = cls(
            x_grid=x_grid,
            z_grid=z_grid,
            active_x=len(x_columns),
            active_z=len(z_columns),
            values=frame["lambda"].to_numpy(dtype=float),
            ci=frame["ci"].to_numpy(dtype=float),
            valid=frame["valid"].to_numpy(dtype=int).astype(bool),
            errors=errors,
        )
        table.certificates = certify_table(table, lipschitz_x, lipschitz_z)
        return table


def certify_table(
    table: EffectiveHamiltonianTable,
    lipschitz_x: float = 1.0,
    lipschitz_z: float = 1.0,
) -> Certificates:
    """Concavity midpoint test along every z axis and the Lipschitz estimate on node pairs.

    Both tests allow three joint standard deviations of Monte Carlo noise.
    """
    certificates = Certificates()
    values = table.values
    sigma = table.ci / Z_95
    flat_index = np.arange(values.size).reshape(values.shape)

    for axis in range(table.active_x, table.active_x + table.active_z):
        grid = table.z_grid
        for middle in range(1, grid.size - 1):
            if abs(grid[middle - 1] + grid[middle + 1] - 2.0 * grid[middle]) > 1e-9 * (1.0 + abs(grid[middle])):
                continue
            left, centre, right = (np.take(values, [i], axis=axis) for i in (middle - 1, middle, middle + 1))
            s_left, s_centre, s_right = (
                np.take(sigma, [i], axis=axis) for i in (middle - 1, middle, middle + 1)
            )
            deficit = 0.5 * (left + right) - centre
            joint = np.sqrt(s_centre**2 + 0.25 * s_left**2 + 0.25 * s_right**2)
            bad = deficit > CERTIFICATE_SIGMAS * joint + 1e-12
            for position in np.argwhere(bad):
                triple = []
                for offset in (middle - 1, middle, middle + 1):
                    full = position.copy()
                    full[axis] = offset
                    triple.append(int(flat_index[tuple(full)]))
                certificates.concavity_failures.append(tuple(triple))

    points = table.node_points()
    flat_values = values.ravel()
    flat_sigma = sigma.ravel()
    xs, zs = points[:, : table.active_x], points[:, table.active_x :]
    for i, j in itertools.combinations(range(flat_values.size), 2):
        if not (np.isfinite(flat_values[i]) and np.isfinite(flat_values[j])):
            continue
        z_size = max(float(np.linalg.norm(zs[i])), float(np.linalg.norm(zs[j])))
        allowed = lipschitz_x * (1.0 + z_size) * float(np.linalg.norm(xs[i] - xs[j]))
        allowed += lipschitz_z * float(np.linalg.norm(zs[i] - zs[j]))
        noise = CERTIFICATE_SIGMAS * float(np.hypot(flat_sigma[i], flat_sigma[j]))
        if abs(flat_values[i] - flat_values[j]) > allowed + noise + 1e-12:
            certificates.lipschitz_failures.append((i, j))

    certificates.concave = not certificates.concavity_failures
    certificates.lipschitz = not certificates.lipschitz_failures
    return certificates


def _validate_grid(name: str, grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size < 1:
        raise ValueError(f"{name} must be non-empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError(f"{name} must be strictly increasing")
    return grid


def build_lambda_table(
    spec: ModelSpec,
    x_grid,
    z_grid,
    method: LambdaMethod = "time_average",
    budgets: LambdaBudgets | None = None,
    active_x: int | None = None,
    active_z: int | None = None,
    workers: int = 1,
) -> EffectiveHamiltonianTable:
    """Fill lambda on the tensor grid and certify it.

    All nodes use the same seed so that differences between nodes are not
    dominated by Monte Carlo noise. A node whose estimator fails is marked
    invalid and keeps a NaN value. The time-average method falls back to the
    ergodic BSDE when the driver depends on xi; `table.method` records the
    estimator actually used.
    """
    budgets = budgets or LambdaBudgets()
    x_grid = _validate_grid("x_grid", x_grid)
    z_grid = _validate_grid("z_grid", z_grid)
    if method not in ("time_average", "ergodic_bsde"):
        raise ValueError("method must be 'time_average' or 'ergodic_bsde'")
    active_x = spec.slow_dim if active_x is None else active_x
    active_z = spec.slow_noise_dim if active_z is None else active_z
    if not (0 <= active_x <= spec.slow_dim and 0 <= active_z <= spec.slow_noise_dim):
        raise ValueError("active coordinates exceed the model dimensions")
    if method == "time_average" and not spec.xi_free:
        logfire.warn("time-average lambda needs a xi-free driver; switching to ergodic_bsde")
        method = "ergodic_bsde"
    mu = spec.require_mu()
    mixing_horizon = budgets.horizon if budgets.horizon is not None else TIME_AVERAGE_MIXING / mu

    axes = [x_grid] * active_x + [z_grid] * active_z
    nodes = list(itertools.product(*axes)) if axes else [()]

    def solve_node(node: tuple[float, ...]) -> tuple[float, float]:
        x = np.zeros(spec.slow_dim)
        z = np.zeros(spec.slow_noise_dim)
        x[:active_x] = node[:active_x]
        z[:active_z] = node[active_x:]
        if method == "time_average":
            estimate = estimate_lambda_time_average(
                spec, x, z, mixing_horizon, budgets.dt, budgets.n_paths, budgets.seed
            )
            return estimate.value, estimate.ci
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
            tolerance=budgets.tolerance,
        )
        return solution.lambda_, solution.ci

    def guarded(node: tuple[float, ...]) -> tuple[float, float, str]:
        try:
            value, ci = solve_node(node)
            return value, ci, ""
        except (NumericalFailure, ValueError) as exc:
            return float("nan"), float("nan"), str(exc)

    with logfire.span(
        "build_lambda_table", method=method, nodes=len(nodes), active_x=active_x, active_z=active_z
    ):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(guarded, nodes))
        else:
            results = [guarded(node) for node in nodes]

        errors = {index: message for index, (_, _, message) in enumerate(results) if message}
        for index, message in errors.items():
            logfire.warn("lambda node {index} invalid: {message}", index=index, message=message)
        table = EffectiveHamiltonianTable(
            x_grid=x_grid,
            z_grid=z_grid,
            active_x=active_x,
            active_z=active_z,
            values=np.array([value for value, _, _ in results]),
            ci=np.array([ci for _, ci, _ in results]),
            valid=np.array([not message for _, _, message in results]),
            errors=errors,
            method=method,
        )
        table.certificates = certify_table(
            table, spec.constants.lambda_lipschitz_x, spec.constants.lambda_lipschitz_z
        )
        logfire.info(
            "lambda table certificates: concave={concave} lipschitz={lipschitz}",
            concave=table.certificates.concave,
            lipschitz=table.certificates.lipschitz,
        )
    return table
