"""Two estimators of the effective Hamiltonian lambda(x, z).

* Time average of psi(x, Q, z, 0) along the frozen-x fast equation after a
  burn-in of a quarter of the horizon (xi-free drivers only).
* Vanishing discount: delta Y^delta(q0) for a decreasing discount schedule,
  Richardson-extrapolated from the last two entries.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import logfire
import numpy as np

from core.driver import resolve_driver
from core.errors import NumericalFailure
from core.forward import PathBundle, simulate_frozen_fast
from core.model.spec import ModelSpec
from core.regression import RegressionFit, fit_regression

Z_95 = 1.959963984540054
BURN_IN_FRACTION = 0.25
TIME_AVERAGE_MIXING = 20.0
DEFAULT_DELTAS = (0.2, 0.1, 0.05, 0.025)
MIN_DELTA = 1e-3
DEFAULT_DISCOUNT_TOLERANCE = 0.05
TAIL_PASSES = 3
TAIL_TOLERANCE = 1e-6
TAIL_HORIZON_FACTOR = 1.0
GROWTH_PROBES = 1000


@dataclass(frozen=True)
class LambdaEstimate:
    value: float
    ci: float

    @property
    def stderr(self) -> float:
        return self.ci / Z_95


def _state(value: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(value, dtype=float).reshape(dim)


def _initial_fast(spec: ModelSpec, q0: np.ndarray | None) -> np.ndarray:
    return spec.q0 if q0 is None else np.asarray(q0, dtype=float)


def _burn_in_step(bundle: PathBundle) -> int:
    return int(np.ceil(BURN_IN_FRACTION * bundle.grid.n_steps))


def estimate_lambda_time_average(
    spec: ModelSpec,
    x: np.ndarray,
    z: np.ndarray,
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
    q0: np.ndarray | None = None,
) -> LambdaEstimate:
    """(1/(T - T0)) E int_{T0}^T psi(x, Q_s, z, 0) ds with T0 = T/4."""
    if not spec.xi_free:
        raise ValueError("time-average estimator requires ξ-independent driver (L_xi = 0)")
    mu = spec.require_mu()
    if horizon < TIME_AVERAGE_MIXING / mu * (1.0 - 1e-12):
        raise ValueError(f"horizon must be >= {TIME_AVERAGE_MIXING:g}/mu = {TIME_AVERAGE_MIXING / mu:.4g}")
    driver = resolve_driver(spec)
    x = _state(x, spec.slow_dim)
    z = _state(z, spec.slow_noise_dim)
    with logfire.span("estimate_lambda_time_average", horizon=horizon, dt=dt, n_paths=n_paths, seed=seed):
        bundle = simulate_frozen_fast(spec, x, _initial_fast(spec, q0), horizon, dt, n_paths, seed)
        frozen = np.broadcast_to(x, (n_paths, spec.slow_dim))
        zs = np.broadcast_to(z, (n_paths, spec.slow_noise_dim))
        zero_xi = np.zeros((n_paths, spec.fast_noise_dim))
        start = _burn_in_step(bundle)
        running = np.zeros(n_paths)
        for k in range(start, bundle.grid.n_steps):
            running += driver(frozen, bundle.Q[:, k], zs, zero_xi)
        averages = running / (bundle.grid.n_steps - start)
        estimate = LambdaEstimate(
            value=float(np.mean(averages)),
            ci=Z_95 * float(np.std(averages)) / np.sqrt(n_paths),
        )
        logfire.info("time-average lambda = {value} +/- {ci}", value=estimate.value, ci=estimate.ci)
    return estimate


@dataclass(frozen=True)
class ErgodicSolution:
    lambda_: float
    ci: float
    v_fit: RegressionFit
    v_offset: float
    zeta_fit: RegressionFit
    discount_trace: list[tuple[float, float]]
    diagnostics: dict[str, float] = field(default_factory=dict)

    def v(self, q: np.ndarray) -> np.ndarray:
        """Corrector normalised by v(0) = 0."""
        return self.v_fit.predict(np.atleast_2d(q)) - self.v_offset

    def zeta(self, q: np.ndarray) -> np.ndarray:
        return self.zeta_fit.predict(np.atleast_2d(q))

    @property
    def growth_ok(self) -> bool:
        return bool(self.diagnostics.get("growth_ok", 1.0))


@dataclass(frozen=True)
class _DiscountedPass:
    y0: float
    pathwise: np.ndarray
    y_fits: list[RegressionFit]
    xi_fits: list[RegressionFit]
    residual: float
    window_psi: np.ndarray


def _tail_window(bundle: PathBundle) -> tuple[int, int]:
    """Steps away from both the start-up transient and the terminal layer."""
    n_steps = bundle.grid.n_steps
    start = min(_burn_in_step(bundle), n_steps - 1)
    return start, max(n_steps - start, start + 1)


def _solve_discounted(
    driver,
    bundle: PathBundle,
    x: np.ndarray,
    z: np.ndarray,
    delta: float,
    tail: np.ndarray,
    degree: int,
) -> _DiscountedPass:
    """One backward pass of the delta-discounted BSDE closed by Y_T = tail / delta.

    psi at step k is evaluated with the xi fit of the previous backward step
    (k + 1) at Q_k; the last step has no predecessor and uses xi = 0. The xi
    fits do not depend on the tail level, so neither does `window_psi`.
    """
    n_paths, n_steps, dt = bundle.n_paths, bundle.grid.n_steps, bundle.grid.dt
    discount = np.exp(-delta * dt)
    # exponential-integrator weight; constant drivers give delta Y = psi exactly
    weight = -np.expm1(-delta * dt) / delta
    frozen = np.broadcast_to(x, (n_paths, x.size))
    zs = np.broadcast_to(z, (n_paths, z.size))
    Q, dW = bundle.Q, bundle.dW2
    start, stop = _tail_window(bundle)

    y_next = np.full(n_paths, float(np.mean(tail)) / delta)
    pathwise = np.asarray(tail, dtype=float) / delta * np.exp(-delta * bundle.grid.horizon)
    pathwise = np.broadcast_to(pathwise, (n_paths,)).copy()
    window_psi = np.zeros(n_paths)
    y_fits: list[RegressionFit] = [None] * n_steps  # type: ignore[list-item]
    xi_fits: list[RegressionFit] = [None] * n_steps  # type: ignore[list-item]
    previous_fit: RegressionFit | None = None
    squared_residuals = 0.0
    for k in range(n_steps - 1, -1, -1):
        q = Q[:, k]
        target = discount * y_next
        conditional = fit_regression(q, target, degree, step=k).predict(q)
        xi_fit = fit_regression(q, (target - conditional)[:, None] * dW[:, k] / dt, degree, step=k)
        xi = xi_fit.predict(q)
        lagged = np.zeros_like(xi) if previous_fit is None else previous_fit.predict(q)
        psi = driver(frozen, q, zs, lagged)
        if not np.all(np.isfinite(psi)):
            raise NumericalFailure("driver returned non-finite values", stage="ergodic", step=k)
        y_fit = fit_regression(q, target + psi * weight, degree, step=k)
        y_current = y_fit.predict(q)
        martingale = np.sum(xi * dW[:, k], axis=1)
        squared_residuals += float(np.mean((target - y_current + psi * weight - martingale) ** 2))
        pathwise += np.exp(-delta * k * dt) * psi * weight
        if start <= k < stop:
            window_psi += psi
        y_fits[k], xi_fits[k] = y_fit, xi_fit
        previous_fit = xi_fit
        y_next = y_current
    return _DiscountedPass(
        y0=float(np.mean(y_next)),
        pathwise=pathwise,
        y_fits=y_fits,
        xi_fits=xi_fits,
        residual=float(np.sqrt(squared_residuals / n_steps)),
        window_psi=window_psi / (stop - start),
    )


def richardson(deltas: Sequence[float], values: Sequence[float]) -> float:
    """Extrapolate delta -> 0 linearly through the last two entries."""
    d1, d2 = deltas[-2], deltas[-1]
    a1, a2 = values[-2], values[-1]
    return (d1 * a2 - d2 * a1) / (d1 - d2)


def _check_schedule(deltas: Sequence[float]) -> list[float]:
    schedule = [float(delta) for delta in deltas]
    if len(schedule) < 2:
        raise ValueError("discount schedule needs at least two entries")
    if any(later >= earlier for earlier, later in zip(schedule, schedule[1:])):
        raise ValueError("discount schedule must be strictly decreasing")
    if schedule[-1] < MIN_DELTA:
        raise ValueError(f"discount schedule must stay >= {MIN_DELTA:g}")
    return schedule


def default_ergodic_horizon(spec: ModelSpec, deltas: Sequence[float] = DEFAULT_DELTAS) -> float:
    """max(20/mu, 1/delta_min): long enough to mix and to resolve the finest discount."""
    mu = spec.require_mu()
    return max(TIME_AVERAGE_MIXING / mu, TAIL_HORIZON_FACTOR / min(float(delta) for delta in deltas))


def solve_ergodic_bsde(
    spec: ModelSpec,
    x: np.ndarray,
    z: np.ndarray,
    deltas: Sequence[float] = DEFAULT_DELTAS,
    horizon: float | None = None,
    dt: float = 0.05,
    n_paths: int = 2000,
    degree: int = 2,
    seed: int = 0,
    q0: np.ndarray | None = None,
    tolerance: float = DEFAULT_DISCOUNT_TOLERANCE,
) -> ErgodicSolution:
    """Vanishing-discount solution of the ergodic BSDE at frozen (x, z).

    Every discount level is solved on the same frozen-x paths. The truncated
    horizon is closed with Y_T = ybar / delta. The first pass seeds ybar with
    psi(Q_T, xi = 0); later passes use the per-path average of the controlled
    psi over the middle of the horizon on the finest level, which is a
    stationary average of psi(Q, z, zeta(Q)) and hence an estimate of lambda.
    Passes stop once ybar moves by less than TAIL_TOLERANCE.
    """
    schedule = _check_schedule(deltas)
    if degree < 1:
        raise ValueError("ergodic basis must contain linear functions of q")
    horizon = default_ergodic_horizon(spec, schedule) if horizon is None else horizon
    driver = resolve_driver(spec)
    x = _state(x, spec.slow_dim)
    z = _state(z, spec.slow_noise_dim)

    with logfire.span("solve_ergodic_bsde", horizon=horizon, dt=dt, n_paths=n_paths, seed=seed):
        bundle = simulate_frozen_fast(spec, x, _initial_fast(spec, q0), horizon, dt, n_paths, seed)
        frozen = np.broadcast_to(x, (n_paths, spec.slow_dim))
        tail_samples = driver(
            frozen,
            bundle.Q[:, -1],
            np.broadcast_to(z, (n_paths, spec.slow_noise_dim)),
            np.zeros((n_paths, spec.fast_noise_dim)),
        )
        used = np.asarray(tail_samples, dtype=float)
        passes: list[_DiscountedPass] = []
        trace: list[tuple[float, float]] = []
        extrapolated = float(np.mean(used))
        for n_passes in range(1, TAIL_PASSES + 1):
            tail = float(np.mean(used))
            passes = [
                _solve_discounted(driver, bundle, x, z, delta, used, degree) for delta in schedule
            ]
            trace = [(delta, delta * result.y0) for delta, result in zip(schedule, passes)]
            extrapolated = richardson(schedule, [value for _, value in trace])
            refreshed = passes[-1].window_psi
            shift = abs(float(np.mean(refreshed)) - tail)
            logfire.info(
                "tail pass {n}: ybar = {tail}, lambda = {value}",
                n=n_passes,
                tail=tail,
                value=extrapolated,
            )
            if shift < TAIL_TOLERANCE:
                break
            used = refreshed
        else:
            logfire.warn("tail closure still moving by {shift} after {n} passes", shift=shift, n=TAIL_PASSES)

        gap = abs(trace[-1][1] - trace[-2][1])
        if gap >= tolerance:
            raise NumericalFailure(
                f"no discount convergence: |delta Y| gap {gap:.4g} >= {tolerance:g}", stage="ergodic"
            )

        d1, d2 = schedule[-2], schedule[-1]
        pathwise = (d1 * d2 * passes[-1].pathwise - d2 * d1 * passes[-2].pathwise) / (d1 - d2)
        ci = Z_95 * float(np.std(pathwise)) / np.sqrt(n_paths)

        finest = passes[-1]
        burn_in = max(_burn_in_step(bundle), 1)
        v_fit = finest.y_fits[burn_in]
        zeta_fit = finest.xi_fits[burn_in]
        v_offset = float(v_fit.predict(np.zeros((1, spec.fast_dim)))[0])

        growth = spec.constants.vcheck_growth
        probes = bundle.Q[: min(GROWTH_PROBES, n_paths), burn_in]
        radii = np.linalg.norm(probes, axis=1)
        v_values = np.abs(v_fit.predict(probes) - v_offset)
        ratio = float(np.max(v_values / np.maximum((1.0 + np.linalg.norm(z)) * radii, 1e-12)))
        growth_ok = ratio <= growth
        if not growth_ok:
            logfire.warn("corrector growth ratio {ratio} exceeds {growth}", ratio=ratio, growth=growth)

        diffs = [abs(b[1] - a[1]) for a, b in zip(trace, trace[1:])]
        diagnostics = {
            "tail_level": tail,
            "tail_passes": float(n_passes),
            "residual": float(np.mean([result.residual for result in passes])),
            "growth_ratio": ratio,
            "growth_ok": float(growth_ok),
            "monotone_trace": float(len(diffs) < 2 or diffs[-1] <= diffs[-2] + 1e-12),
        }
        logfire.info("ergodic lambda = {value} +/- {ci}", value=extrapolated, ci=ci)
    return ErgodicSolution(
        lambda_=float(extrapolated),
        ci=ci,
        v_fit=v_fit,
        v_offset=v_offset,
        zeta_fit=zeta_fit,
        discount_trace=trace,
        diagnostics=diagnostics,
    )
