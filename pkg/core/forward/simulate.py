"""Path ensembles for the two-scale system and the frozen-x fast equation."""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import logfire
import numpy as np

from core.model.spec import ModelSpec

from .grid import TimeGrid
from .noise import FAST_CHANNEL, FROZEN_CHANNEL, SLOW_CHANNEL, NoiseStreams
from .steppers import step_fast_semi_implicit, step_slow_exact

MIXING_FACTOR = 10.0

# (step index, time, x [P,n], q [P,m]) -> drift [P,*] or None
StepCallback = Callable[[int, float, np.ndarray, np.ndarray], np.ndarray | None]


@dataclass(frozen=True)
class PathBundle:
    """Immutable ensemble of discretised trajectories.

    ``X`` is ``None`` for frozen-x bundles; ``frozen_x`` then records the slow
    state that was held fixed. Increments carry variance ``dt`` per component.
    """

    grid: TimeGrid
    n_paths: int
    seed: int
    X: np.ndarray | None
    Q: np.ndarray
    dW1: np.ndarray | None
    dW2: np.ndarray
    eps: float = 1.0
    frozen_x: np.ndarray | None = None

    def __post_init__(self) -> None:
        for name in ("X", "Q", "dW1", "dW2", "frozen_x"):
            value = getattr(self, name)
            if value is not None:
                value.setflags(write=False)

    @property
    def dt(self) -> float:
        return self.grid.dt

    @property
    def is_frozen(self) -> bool:
        return self.X is None


def _initial(state: np.ndarray, n_paths: int) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.ndim == 1:
        return np.broadcast_to(state, (n_paths, state.size)).copy()
    if state.shape[0] != n_paths:
        raise ValueError("initial ensemble must have one row per path")
    return state.copy()


def simulate_two_scale_paths(
    spec: ModelSpec,
    eps: float,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    extra_fast_drift: StepCallback | None = None,
    extra_slow_drift: StepCallback | None = None,
    workers: int = 1,
) -> PathBundle:
    """Simulate (X, Q^eps) with the exact slow step and the resolvent fast step.

    ``extra_slow_drift`` enters through the slow draw shifted by
    ``R^{-1} b sqrt(dt)``; the recorded increments stay the unshifted ones.
    """
    grid.require_resolution(eps)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    dt = grid.dt
    streams = NoiseStreams(seed, workers=workers)
    slow_draws = streams.draws(SLOW_CHANNEL, n_paths, grid.n_steps, spec.slow_noise_dim)
    fast_draws = streams.draws(FAST_CHANNEL, n_paths, grid.n_steps, spec.fast_noise_dim)

    X = np.empty((n_paths, grid.n_steps + 1, spec.slow_dim))
    Q = np.empty((n_paths, grid.n_steps + 1, spec.fast_dim))
    X[:, 0] = _initial(spec.x0, n_paths)
    Q[:, 0] = _initial(spec.q0, n_paths)
    times = grid.times
    with logfire.span(
        "simulate_two_scale_paths", eps=eps, n_steps=grid.n_steps, n_paths=n_paths, seed=seed
    ):
        for k in range(grid.n_steps):
            x, q = X[:, k], Q[:, k]
            slow_draw = slow_draws[:, k]
            if extra_slow_drift is not None:
                shift = extra_slow_drift(k, times[k], x, q)
                if shift is not None:
                    slow_draw = slow_draw + spec.R.solve(shift) * np.sqrt(dt)
            fast_extra = None if extra_fast_drift is None else extra_fast_drift(k, times[k], x, q)
            X[:, k + 1] = step_slow_exact(spec.A, spec.R, x, dt, slow_draw)
            Q[:, k + 1] = step_fast_semi_implicit(
                spec.B, spec.F, spec.G, q, x, dt, eps, fast_draws[:, k], fast_extra
            )
    return PathBundle(
        grid=grid,
        n_paths=n_paths,
        seed=seed,
        X=X,
        Q=Q,
        dW1=np.sqrt(dt) * slow_draws,
        dW2=np.sqrt(dt) * fast_draws,
        eps=eps,
    )


def simulate_slow_paths(
    spec: ModelSpec,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    workers: int = 1,
) -> PathBundle:
    """Slow paths alone; identical to the X of :func:`simulate_two_scale_paths` for the same seed."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    dt = grid.dt
    slow_draws = NoiseStreams(seed, workers=workers).draws(
        SLOW_CHANNEL, n_paths, grid.n_steps, spec.slow_noise_dim
    )
    X = np.empty((n_paths, grid.n_steps + 1, spec.slow_dim))
    X[:, 0] = _initial(spec.x0, n_paths)
    with logfire.span("simulate_slow_paths", n_steps=grid.n_steps, n_paths=n_paths, seed=seed):
        for k in range(grid.n_steps):
            X[:, k + 1] = step_slow_exact(spec.A, spec.R, X[:, k], dt, slow_draws[:, k])
    return PathBundle(
        grid=grid,
        n_paths=n_paths,
        seed=seed,
        X=X,
        Q=np.empty((n_paths, grid.n_steps + 1, 0)),
        dW1=np.sqrt(dt) * slow_draws,
        dW2=np.empty((n_paths, grid.n_steps, 0)),
        eps=0.0,
    )


def simulate_frozen_fast(
    spec: ModelSpec,
    x: np.ndarray,
    q0: np.ndarray,
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
    extra_drift: np.ndarray | Callable[[int, float, np.ndarray], np.ndarray] | None = None,
) -> PathBundle:
    """Simulate dQ = (B Q + F(x, Q)) ds + G dW in rescaled time with x frozen.

    ``q0`` may be a single state or one state per path. ``extra_drift`` is a
    constant vector or a callback ``(step, s, q) -> [P, m]``.
    """
    mu = spec.require_mu()
    if horizon < MIXING_FACTOR / mu * (1.0 - 1e-12):
        raise ValueError(
            f"horizon {horizon:g} below mixing time {MIXING_FACTOR:g}/mu = {MIXING_FACTOR / mu:.4g}"
        )
    if dt <= 0:
        raise ValueError("dt must be positive")
    n_steps = int(round(horizon / dt))
    if n_steps < 1:
        raise ValueError(f"dt {dt:g} leaves no step inside horizon {horizon:g}")
    grid = TimeGrid(0.0, n_steps * dt, n_steps)
    frozen = np.broadcast_to(np.asarray(x, dtype=float), (n_paths, spec.slow_dim))
    draws = NoiseStreams(seed).draws(FROZEN_CHANNEL, n_paths, n_steps, spec.fast_noise_dim)

    Q = np.empty((n_paths, n_steps + 1, spec.fast_dim))
    Q[:, 0] = _initial(q0, n_paths)
    times = grid.times
    with logfire.span("simulate_frozen_fast", horizon=horizon, dt=dt, n_paths=n_paths, seed=seed):
        for k in range(n_steps):
            q = Q[:, k]
            if callable(extra_drift):
                extra = extra_drift(k, times[k], q)
            else:
                extra = extra_drift
            Q[:, k + 1] = step_fast_semi_implicit(
                spec.B, spec.F, spec.G, q, frozen, grid.dt, 1.0, draws[:, k], extra
            )
    return PathBundle(
        grid=grid,
        n_paths=n_paths,
        seed=seed,
        X=None,
        Q=Q,
        dW1=None,
        dW2=np.sqrt(grid.dt) * draws,
        frozen_x=np.asarray(x, dtype=float).copy(),
    )


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float


def slow_moment_bound(bundle: PathBundle, p: float = 2.0) -> MomentEstimate:
    """E sup_t |X_t|^p with its Monte Carlo standard error."""
    if bundle.X is None:
        raise ValueError("frozen bundles carry no slow paths")
    sup = np.max(np.linalg.norm(bundle.X, axis=2) ** p, axis=1)
    return MomentEstimate(float(np.mean(sup)), float(np.std(sup) / np.sqrt(bundle.n_paths)))


def fast_moment_profile(bundle: PathBundle, p: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """E|Q_t|^p per grid time with standard errors."""
    moments = np.linalg.norm(bundle.Q, axis=2) ** p
    return np.mean(moments, axis=0), np.std(moments, axis=0) / np.sqrt(bundle.n_paths)


def fast_moment_sup(bundle: PathBundle, p: float = 2.0) -> MomentEstimate:
    profile, errors = fast_moment_profile(bundle, p)
    index = int(np.argmax(profile))
    return MomentEstimate(float(profile[index]), float(errors[index]))


@dataclass(frozen=True)
class ContractionCheck:
    gap: np.ndarray
    bound: float

    @property
    def worst_ratio(self) -> float:
        if self.bound == 0.0:
            return 0.0 if np.all(self.gap == 0.0) else float("inf")
        return float(np.max(self.gap) / self.bound)


def contraction_bound(
    lipschitz_F: float, mu: float, eps: float, grid: TimeGrid, input_gap: np.ndarray
) -> float:
    """L_F/eps int_0^T e^{-mu (T - s)/eps} |Gamma_s - Gamma'_s| ds for piecewise-constant gaps."""
    times = grid.times
    T = times[-1]
    upper = np.exp(-mu * (T - times[1:]) / eps)
    lower = np.exp(-mu * (T - times[:-1]) / eps)
    return float(lipschitz_F / mu * np.sum(np.asarray(input_gap) * (upper - lower)))


def coupled_fast_contraction(
    spec: ModelSpec,
    eps: float,
    grid: TimeGrid,
    inputs: np.ndarray,
    inputs_prime: np.ndarray,
    n_paths: int,
    seed: int,
) -> ContractionCheck:
    """Run two fast equations on identical noise with slow inputs Gamma, Gamma'.

    ``inputs`` have shape [n_steps, n] and are held constant on each step.
    """
    mu = spec.require_mu()
    grid.require_resolution(eps)
    draws = NoiseStreams(seed).draws(FAST_CHANNEL, n_paths, grid.n_steps, spec.fast_noise_dim)
    q = _initial(spec.q0, n_paths)
    q_prime = q.copy()
    for k in range(grid.n_steps):
        x = np.broadcast_to(inputs[k], (n_paths, spec.slow_dim))
        x_prime = np.broadcast_to(inputs_prime[k], (n_paths, spec.slow_dim))
        q = step_fast_semi_implicit(spec.B, spec.F, spec.G, q, x, grid.dt, eps, draws[:, k])
        q_prime = step_fast_semi_implicit(
            spec.B, spec.F, spec.G, q_prime, x_prime, grid.dt, eps, draws[:, k]
        )
    input_gap = np.linalg.norm(np.asarray(inputs) - np.asarray(inputs_prime), axis=1)
    bound = contraction_bound(spec.constants.lipschitz_F, mu, eps, grid, input_gap)
    return ContractionCheck(gap=np.linalg.norm(q - q_prime, axis=1), bound=bound)
