"""Backward least-squares Monte Carlo for the eps-scaled and the limit BSDE.

The scheme is explicit: at step k the targets are built from the projected
Y_{k+1}, Z_k and Xi_k are regressions of (Y_{k+1} - E_k Y_{k+1}) dW / dt, and
Y_k is the projection of Y_{k+1} + psi(X_k, Q_k, Z_k, Xi_k / sqrt(eps)) dt.
At the terminal time Y = h(X_1) exactly.
"""

from __future__ import annotations

import json
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import logfire
import numpy as np
import pandas as pd

from core.driver import resolve_driver
from core.errors import NumericalFailure
from core.forward import PathBundle, TimeGrid, simulate_slow_paths, simulate_two_scale_paths
from core.model.spec import ModelSpec
from core.regression import RegressionFit, fit_regression

Z_95 = 1.959963984540054
MAX_CLAMPED_FRACTION = 0.01


class LambdaTable(Protocol):
    def evaluate(self, x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


LambdaSource = LambdaTable | Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BsdeSolution:
    y0: float
    ci: float
    y_fits: list[RegressionFit]
    z_fits: list[RegressionFit]
    xi_fits: list[RegressionFit] | None
    residuals: np.ndarray
    grid: TimeGrid
    n_paths: int
    eps: float | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return len(self.y_fits)

    def summary(self) -> dict[str, object]:
        return {
            "y0": self.y0,
            "ci": self.ci,
            "eps": self.eps,
            "n_paths": self.n_paths,
            "grid": self.grid.to_dict(),
            "residuals": [float(value) for value in self.residuals],
            "diagnostics": {key: float(value) for key, value in self.diagnostics.items()},
        }

    def to_json(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True), encoding="utf-8")
        return path

    def fits_frame(self) -> pd.DataFrame:
        rows = []
        for k in range(self.n_steps):
            row = {
                "step": k,
                "t": self.grid.times[k],
                "residual": self.residuals[k],
                "y_basis": self.y_fits[k].description,
                "y_condition": self.y_fits[k].condition,
                "y_coefficients": " ".join(f"{c:.12g}" for c in np.ravel(self.y_fits[k].coefficients)),
                "z_coefficients": " ".join(f"{c:.12g}" for c in np.ravel(self.z_fits[k].coefficients)),
            }
            if self.xi_fits is not None:
                row["xi_coefficients"] = " ".join(
                    f"{c:.12g}" for c in np.ravel(self.xi_fits[k].coefficients)
                )
            rows.append(row)
        return pd.DataFrame(rows)

    def export_fits_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.fits_frame().to_csv(path, index=False, float_format="%.12g")
        return path


StepDriver = Callable[[int, np.ndarray, np.ndarray | None], np.ndarray]


def _backward_induction(
    states: Callable[[int], np.ndarray],
    terminal: np.ndarray,
    dW1: np.ndarray,
    dW2: np.ndarray | None,
    driver: StepDriver,
    grid: TimeGrid,
    degree: int,
) -> tuple[float, float, list, list, list | None, np.ndarray]:
    dt = grid.dt
    n_steps = grid.n_steps
    y_next = terminal
    pathwise = terminal.copy()
    y_fits: list[RegressionFit] = [None] * n_steps  # type: ignore[list-item]
    z_fits: list[RegressionFit] = [None] * n_steps  # type: ignore[list-item]
    xi_fits: list[RegressionFit] | None = [None] * n_steps if dW2 is not None else None  # type: ignore[list-item]
    residuals = np.empty(n_steps)

    for k in range(n_steps - 1, -1, -1):
        features = states(k)
        conditional = fit_regression(features, y_next, degree, step=k).predict(features)
        centred = (y_next - conditional)[:, None]
        z_fit = fit_regression(features, centred * dW1[:, k] / dt, degree, step=k)
        z = z_fit.predict(features)
        xi = None
        if dW2 is not None:
            xi_fit = fit_regression(features, centred * dW2[:, k] / dt, degree, step=k)
            xi = xi_fit.predict(features)
            xi_fits[k] = xi_fit  # type: ignore[index]
        psi = driver(k, z, xi)
        if not np.all(np.isfinite(psi)):
            raise NumericalFailure("driver returned non-finite values", stage="bsde", step=k)
        y_fit = fit_regression(features, y_next + psi * dt, degree, step=k)
        y_current = y_fit.predict(features)

        martingale = np.sum(z * dW1[:, k], axis=1)
        if xi is not None:
            martingale = martingale + np.sum(xi * dW2[:, k], axis=1)
        residuals[k] = float(np.sqrt(np.mean((y_next - y_current + psi * dt - martingale) ** 2)))

        pathwise += psi * dt
        y_fits[k], z_fits[k] = y_fit, z_fit
        y_next = y_current

    y0 = float(np.mean(y_next))
    ci = Z_95 * float(np.std(pathwise)) / np.sqrt(pathwise.size)
    return y0, ci, y_fits, z_fits, xi_fits, residuals


def solve_epsilon_bsde(
    spec: ModelSpec,
    eps: float,
    grid: TimeGrid,
    n_paths: int,
    degree: int = 2,
    seed: int = 0,
    bundle: PathBundle | None = None,
    workers: int = 1,
) -> BsdeSolution:
    """Solve the eps-scaled system on (X, Q^eps) paths; the driver sees Xi / sqrt(eps)."""
    grid.require_resolution(eps)
    if bundle is None:
        bundle = simulate_two_scale_paths(spec, eps, grid, n_paths, seed, workers=workers)
    elif bundle.eps != eps or bundle.grid != grid:
        raise ValueError("bundle does not match eps and grid")
    driver = resolve_driver(spec)
    X, Q = bundle.X, bundle.Q
    scale = 1.0 / np.sqrt(eps)
    xi_magnitudes: list[float] = []

    def step_driver(k: int, z: np.ndarray, xi: np.ndarray | None) -> np.ndarray:
        xi_magnitudes.append(float(np.median(np.linalg.norm(xi, axis=1))))
        return driver(X[:, k], Q[:, k], z, xi * scale)

    with logfire.span(
        "solve_epsilon_bsde", eps=eps, n_steps=grid.n_steps, n_paths=bundle.n_paths, seed=bundle.seed
    ):
        try:
            y0, ci, y_fits, z_fits, xi_fits, residuals = _backward_induction(
                states=lambda k: np.concatenate([X[:, k], Q[:, k]], axis=1),
                terminal=np.asarray(spec.h(X[:, -1]), dtype=float),
                dW1=bundle.dW1,
                dW2=bundle.dW2,
                driver=step_driver,
                grid=grid,
                degree=degree,
            )
        except NumericalFailure as exc:
            raise exc.with_stage(f"bsde eps={eps:g}") from exc
        logfire.info("eps-BSDE y0 = {y0} +/- {ci}", y0=y0, ci=ci, eps=eps)
    return BsdeSolution(
        y0=y0,
        ci=ci,
        y_fits=y_fits,
        z_fits=z_fits,
        xi_fits=xi_fits,
        residuals=residuals,
        grid=grid,
        n_paths=bundle.n_paths,
        eps=eps,
        diagnostics={"median_xi_over_sqrt_eps": float(np.median(xi_magnitudes)) * scale},
    )


def _lambda_evaluator(source: LambdaSource) -> Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    if hasattr(source, "evaluate"):
        return source.evaluate  # type: ignore[union-attr]

    def evaluate(x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        values = np.broadcast_to(np.asarray(source(x, z), dtype=float), (x.shape[0],))
        return values, np.zeros(x.shape[0], dtype=bool)

    return evaluate


def solve_limit_bsde(
    spec: ModelSpec,
    lambda_source: LambdaSource,
    grid: TimeGrid,
    n_paths: int,
    degree: int = 2,
    seed: int = 0,
    bundle: PathBundle | None = None,
    workers: int = 1,
) -> BsdeSolution:
    """Solve the reduced BSDE on slow paths with driver lambda(X_t, Z_t)."""
    if bundle is None:
        bundle = simulate_slow_paths(spec, grid, n_paths, seed, workers=workers)
    elif bundle.grid != grid:
        raise ValueError("bundle does not match grid")
    evaluate = _lambda_evaluator(lambda_source)
    X = bundle.X
    clamped = 0
    evaluations = 0

    def step_driver(k: int, z: np.ndarray, xi: np.ndarray | None) -> np.ndarray:
        nonlocal clamped, evaluations
        values, flags = evaluate(X[:, k], z)
        clamped += int(np.count_nonzero(flags))
        evaluations += flags.size
        return values

    with logfire.span("solve_limit_bsde", n_steps=grid.n_steps, n_paths=bundle.n_paths, seed=bundle.seed):
        try:
            y0, ci, y_fits, z_fits, _, residuals = _backward_induction(
                states=lambda k: X[:, k],
                terminal=np.asarray(spec.h(X[:, -1]), dtype=float),
                dW1=bundle.dW1,
                dW2=None,
                driver=step_driver,
                grid=grid,
                degree=degree,
            )
        except NumericalFailure as exc:
            raise exc.with_stage("bsde limit") from exc
        fraction = clamped / max(evaluations, 1)
        if fraction > MAX_CLAMPED_FRACTION:
            raise NumericalFailure(
                f"lambda out of range: {fraction:.2%} of evaluations clamped", stage="bsde limit"
            )
        if clamped:
            logfire.warn("lambda table clamped {fraction} of evaluations", fraction=fraction)
        logfire.info("limit BSDE y0 = {y0} +/- {ci}", y0=y0, ci=ci)
    return BsdeSolution(
        y0=y0,
        ci=ci,
        y_fits=y_fits,
        z_fits=z_fits,
        xi_fits=None,
        residuals=residuals,
        grid=grid,
        n_paths=bundle.n_paths,
        diagnostics={"clamped_fraction": fraction},
    )


@dataclass(frozen=True)
class CoarseningReport:
    n_blocks: int
    block_errors: np.ndarray
    integrated_error: float


def step_process_coarsening(
    solution: BsdeSolution, bundle: PathBundle, n_blocks: int
) -> CoarseningReport:
    """Hold Z constant on ``n_blocks`` time blocks and measure E int |Z - Z^N|^2 dt.

    Diagnostic only; the integrated error shrinks as the blocks refine when Z
    is regular in time.
    """
    n_steps = solution.n_steps
    if not 1 <= n_blocks <= n_steps:
        raise ValueError("n_blocks must lie in [1, n_steps]")
    edges = np.linspace(0, n_steps, n_blocks + 1).astype(int)
    dt = solution.grid.dt

    def states(k: int) -> np.ndarray:
        if solution.eps is None:
            return bundle.X[:, k]
        return np.concatenate([bundle.X[:, k], bundle.Q[:, k]], axis=1)

    block_errors = np.zeros(n_blocks)
    for block, (start, stop) in enumerate(zip(edges[:-1], edges[1:])):
        frozen = solution.z_fits[start].predict(states(start))
        for k in range(start, stop):
            z = solution.z_fits[k].predict(states(k))
            block_errors[block] += float(np.mean(np.sum((z - frozen) ** 2, axis=1))) * dt
    return CoarseningReport(
        n_blocks=n_blocks, block_errors=block_errors, integrated_error=float(block_errors.sum())
    )
