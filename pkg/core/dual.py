"""Concave conjugate of lambda in z and the reduced control problem it defines.

lambda_*(x, p) = min_z (-z.p - lambda(x, z)) on the tabulated z nodes, with
p restricted to the Euclidean ball |p| <= L. Off the ball lambda_* is -inf,
stored as a sentinel far below every finite value and skipped by all minima.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import logfire
import numpy as np
import pandas as pd
from scipy.interpolate import RegularGridInterpolator

from core.ergodic.table import EffectiveHamiltonianTable
from core.forward import TimeGrid
from core.forward.noise import SLOW_CHANNEL, NoiseStreams
from core.forward.steppers import step_slow_exact
from core.model.spec import ModelSpec

Z_95 = 1.959963984540054
SENTINEL_SCALE = 1e6


@dataclass
class ConjugateTable:
    x_grid: np.ndarray
    p_grid: np.ndarray
    active_x: int
    active_p: int
    radius: float
    values: np.ndarray
    sentinel: float

    @property
    def x_axes(self) -> list[np.ndarray]:
        return [self.x_grid] * self.active_x

    @property
    def p_axes(self) -> list[np.ndarray]:
        return [self.p_grid] * self.active_p

    def p_points(self) -> np.ndarray:
        if not self.active_p:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*self.p_axes, indexing="ij")
        return np.stack([axis.ravel() for axis in mesh], axis=1)

    @property
    def finite(self) -> np.ndarray:
        return self.values > self.sentinel

    def slices(self) -> np.ndarray:
        """Values reshaped to [x nodes, p nodes]."""
        n_x = self.x_grid.size**self.active_x
        return self.values.reshape(n_x, -1)

    def to_frame(self) -> pd.DataFrame:
        x_points = (
            np.stack([a.ravel() for a in np.meshgrid(*self.x_axes, indexing="ij")], axis=1)
            if self.active_x
            else np.zeros((1, 0))
        )
        p_points = self.p_points()
        rows = []
        for i, x in enumerate(x_points):
            for j, p in enumerate(p_points):
                value = self.slices()[i, j]
                rows.append(
                    [*x, *p, value if value > self.sentinel else float("-inf")]
                )
        columns = [f"x{i + 1}" for i in range(self.active_x)] + [
            f"p{i + 1}" for i in range(self.active_p)
        ]
        return pd.DataFrame(rows, columns=columns + ["lambda_star"])

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.12g")
        return path

    def interpolate(self, x: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Multilinear lambda_*(x, p); cells touching the sentinel fall back to the nearest node."""
        axes = self.x_axes + self.p_axes
        points = np.concatenate([x[:, : self.active_x], p[:, : self.active_p]], axis=1)
        moving = [axis for axis, grid in enumerate(axes) if grid.size > 1]
        shape = [axes[axis].size for axis in moving]
        values = self.values.reshape(shape) if moving else self.values.reshape(-1)
        if not moving:
            return np.full(points.shape[0], float(values[0]))
        grids = [axes[axis] for axis in moving]
        clipped = np.clip(
            points[:, moving],
            [grid[0] for grid in grids],
            [grid[-1] for grid in grids],
        )
        linear = RegularGridInterpolator(grids, values, method="linear")(clipped)
        finite = (values > self.sentinel).astype(float)
        broken = RegularGridInterpolator(grids, finite, method="linear")(clipped) < 1.0 - 1e-12
        if np.any(broken):
            nearest = RegularGridInterpolator(grids, values, method="nearest")(clipped[broken])
            linear[broken] = nearest
        return linear


def _sentinel(values: np.ndarray) -> float:
    finite = values[np.isfinite(values)]
    scale = float(np.max(np.abs(finite))) if finite.size else 0.0
    return -SENTINEL_SCALE * (1.0 + scale) - 1.0


def fenchel_conjugate_table(
    table: EffectiveHamiltonianTable,
    p_grid: Sequence[float],
    radius: float | None = None,
) -> ConjugateTable:
    """lambda_*(x, p) per x slice on the tensor p grid over the tabulated z axes."""
    p_grid = np.asarray(p_grid, dtype=float)
    if p_grid.size < 1 or np.any(np.diff(p_grid) <= 0):
        raise ValueError("p_grid must be non-empty and strictly increasing")
    radius = float(np.max(np.abs(p_grid))) if radius is None else float(radius)
    if not table.certificates.concave:
        logfire.warn("conjugating a lambda table without a concavity certificate")

    active_x, active_z = table.active_x, table.active_z
    points = table.node_points()
    z_points = points[:, active_x:][: table.z_grid.size**active_z]
    n_x = table.x_grid.size**active_x
    lam = table.values.reshape(n_x, -1)
    conjugate = ConjugateTable(
        x_grid=table.x_grid,
        p_grid=p_grid,
        active_x=active_x,
        active_p=active_z,
        radius=radius,
        values=np.empty(0),
        sentinel=_sentinel(lam),
    )
    p_points = conjugate.p_points()
    inside = np.linalg.norm(p_points, axis=1) <= radius * (1.0 + 1e-12)

    with logfire.span("fenchel_conjugate_table", x_nodes=n_x, p_nodes=p_points.shape[0]):
        slices = np.empty((n_x, p_points.shape[0]))
        for i in range(n_x):
            row = np.where(np.isfinite(lam[i]), lam[i], np.inf)
            scanned = -p_points @ z_points.T - row[None, :]
            slices[i] = np.min(scanned, axis=1)
            slices[i, ~inside] = conjugate.sentinel
        conjugate.values = slices.reshape(
            (table.x_grid.size,) * active_x + (p_grid.size,) * active_z
        )
    return conjugate


def biconjugate_nodes(conjugate: ConjugateTable, z_points: np.ndarray) -> np.ndarray:
    """min over finite p of (-z.p - lambda_*(x, p)) for every x node and z point: [x nodes, Z]."""
    p_points = conjugate.p_points()
    slices = conjugate.slices()
    out = np.empty((slices.shape[0], z_points.shape[0]))
    for i, row in enumerate(slices):
        finite = row > conjugate.sentinel
        scanned = -z_points @ p_points[finite].T - row[finite][None, :]
        out[i] = np.min(scanned, axis=1)
    return out


def reconstruct_biconjugate(conjugate: ConjugateTable, x: np.ndarray, z: np.ndarray) -> float:
    """lambda**(x, z), multilinear in x between nodes."""
    x = np.asarray(x, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    per_node = biconjugate_nodes(conjugate, z[None, : conjugate.active_p])[:, 0]
    if not conjugate.active_x or conjugate.x_grid.size == 1:
        return float(per_node[0])
    shape = (conjugate.x_grid.size,) * conjugate.active_x
    interpolator = RegularGridInterpolator(conjugate.x_axes, per_node.reshape(shape))
    point = np.clip(x[: conjugate.active_x], conjugate.x_grid[0], conjugate.x_grid[-1])
    return float(interpolator(point[None, :])[0])


class Feedback(Protocol):
    def __call__(self, t: float, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantFeedback:
    p: np.ndarray

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self.p, (x.shape[0], self.p.size))


@dataclass(frozen=True)
class LinearFeedback:
    """p = offset + gain * x_i on coordinate i, clipped to the ball |p| <= radius."""

    offset: np.ndarray
    gain: float
    radius: float
    coordinate: int = 0

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        p = np.broadcast_to(self.offset, (x.shape[0], self.offset.size)).copy()
        p[:, self.coordinate] += self.gain * x[:, self.coordinate]
        norms = np.linalg.norm(p, axis=1, keepdims=True)
        return p * np.minimum(1.0, self.radius / np.maximum(norms, 1e-300))


def default_feedback_family(
    conjugate: ConjugateTable,
    noise_dim: int,
    gains: Sequence[float] = (-0.5, 0.5),
) -> list[Feedback]:
    """Constants at every p node inside the ball, then linear-in-x maps around p = 0."""
    family: list[Feedback] = []
    for point in conjugate.p_points():
        if np.linalg.norm(point) <= conjugate.radius * (1.0 + 1e-12):
            p = np.zeros(noise_dim)
            p[: point.size] = point
            family.append(ConstantFeedback(p))
    if conjugate.active_x and conjugate.active_p:
        for gain in gains:
            family.append(LinearFeedback(np.zeros(noise_dim), gain, conjugate.radius))
    return family


@dataclass(frozen=True)
class ReducedControlResult:
    value: float
    ci: float
    best_index: int
    values: list[float]
    cis: list[float]


def solve_reduced_control(
    spec: ModelSpec,
    conjugate: ConjugateTable,
    grid: TimeGrid,
    n_paths: int,
    feedbacks: Sequence[Feedback],
    seed: int,
) -> ReducedControlResult:
    """min over feedbacks of E[h(X_1) - int lambda_*(X_s, p_s) ds] with dX = AX - Rp + R dW.

    The drift is applied by shifting the slow draws by -p sqrt(dt); every
    feedback uses the same draws.
    """
    if not feedbacks:
        raise ValueError("feedback family must be non-empty")
    dt = grid.dt
    draws = NoiseStreams(seed).draws(SLOW_CHANNEL, n_paths, grid.n_steps, spec.slow_noise_dim)
    times = grid.times

    def cost(feedback: Feedback) -> tuple[float, float]:
        x = np.broadcast_to(spec.x0, (n_paths, spec.slow_dim)).copy()
        running = np.zeros(n_paths)
        for k in range(grid.n_steps):
            p = np.asarray(feedback(times[k], x), dtype=float)
            norms = np.linalg.norm(p, axis=1, keepdims=True)
            p = p * np.minimum(1.0, conjugate.radius / np.maximum(norms, 1e-300))
            running -= conjugate.interpolate(x, p) * dt
            x = step_slow_exact(spec.A, spec.R, x, dt, draws[:, k] - p * np.sqrt(dt))
        samples = spec.h(x) + running
        return float(np.mean(samples)), Z_95 * float(np.std(samples)) / np.sqrt(n_paths)

    with logfire.span("solve_reduced_control", feedbacks=len(feedbacks), n_paths=n_paths):
        results = [cost(feedback) for feedback in feedbacks]
        values = [value for value, _ in results]
        cis = [ci for _, ci in results]
        best = int(np.argmin(values))
        logfire.info("reduced control value {value} (feedback {best})", value=values[best], best=best)
    return ReducedControlResult(
        value=values[best], ci=cis[best], best_index=best, values=values, cis=cis
    )
