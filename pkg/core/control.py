"""Cost of feedback policies and a brute-force upper bound for the value function.

Policies map (t, x, q) to indices into the control grid. The weak formulation
reweights the uncontrolled paths with the discrete Girsanov density

    log Theta = sum_k theta_k . dW_k - |theta_k|^2 dt / 2,
    theta = (R^{-1} b(X, Q, alpha), rho(alpha) / sqrt(eps)),

while the strong formulation simulates the controlled system on the same
draws. Every policy of a family is evaluated on one shared bundle.
"""

from __future__ import annotations

import itertools
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol

import logfire
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.errors import NumericalFailure
from core.forward import PathBundle, TimeGrid, simulate_two_scale_paths
from core.model.spec import ControlData, ModelSpec

Z_95 = 1.959963984540054
MAX_LOG_DENSITY = 50.0
MAX_POLICIES = 4096


class FeedbackPolicy(Protocol):
    def indices(self, t: float, x: np.ndarray, q: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantPolicy:
    index: int

    def indices(self, t: float, x: np.ndarray, q: np.ndarray) -> np.ndarray:
        return np.full(x.shape[0], self.index, dtype=int)


@dataclass(frozen=True)
class ThresholdPolicy:
    """Control ``below`` when q[coordinate] < threshold, else ``above``."""

    threshold: float
    below: int
    above: int
    coordinate: int = 0

    def indices(self, t: float, x: np.ndarray, q: np.ndarray) -> np.ndarray:
        return np.where(q[:, self.coordinate] < self.threshold, self.below, self.above)


@dataclass(frozen=True)
class BinnedPolicy:
    """Lookup table over time bins x x_1 bins x q_1 bins."""

    horizon: tuple[float, float]
    x_edges: tuple[float, ...]
    q_edges: tuple[float, ...]
    table: np.ndarray

    def cell(self, t: float, x: np.ndarray, q: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
        t0, t1 = self.horizon
        n_time = self.table.shape[0]
        time_bin = min(int((t - t0) / (t1 - t0) * n_time), n_time - 1)
        x_bin = np.searchsorted(self.x_edges, x[:, 0], side="right")
        q_bin = np.searchsorted(self.q_edges, q[:, 0], side="right")
        return time_bin, x_bin, q_bin

    def indices(self, t: float, x: np.ndarray, q: np.ndarray) -> np.ndarray:
        time_bin, x_bin, q_bin = self.cell(t, x, q)
        return self.table[time_bin, x_bin, q_bin]


class PolicyFamilySpec(BaseModel):
    """Binned feedback family declared in study files."""

    model_config = ConfigDict(extra="forbid")

    time_bins: int = Field(2, ge=1)
    x_edges: list[float] = Field(default_factory=lambda: [-0.25, 0.25])
    q_edges: list[float] = Field(default_factory=list)
    cap: int = Field(MAX_POLICIES, ge=1, le=MAX_POLICIES)


def constant_policy_family(n_controls: int) -> list[ConstantPolicy]:
    return [ConstantPolicy(index) for index in range(n_controls)]


def threshold_policy_family(
    n_controls: int, thresholds: Sequence[float] = (0.0,), coordinate: int = 0
) -> list[FeedbackPolicy]:
    """Constant policies followed by every two-action threshold rule."""
    family: list[FeedbackPolicy] = list(constant_policy_family(n_controls))
    for threshold in thresholds:
        for below, above in itertools.permutations(range(n_controls), 2):
            family.append(ThresholdPolicy(threshold, below, above, coordinate))
    return family


def binned_policy_family(
    n_controls: int, grid: TimeGrid, family: PolicyFamilySpec | None = None
) -> list[BinnedPolicy]:
    """All assignments of control indices to the cells of the bin partition."""
    family = family or PolicyFamilySpec()
    x_edges = tuple(sorted(family.x_edges))
    q_edges = tuple(sorted(family.q_edges))
    shape = (family.time_bins, len(x_edges) + 1, len(q_edges) + 1)
    cells = int(np.prod(shape))
    count = n_controls**cells
    if count > family.cap:
        raise ValueError(f"policy family has {count} members, above the cap of {family.cap}")
    return [
        BinnedPolicy(
            horizon=(grid.t0, grid.t1),
            x_edges=x_edges,
            q_edges=q_edges,
            table=np.asarray(assignment, dtype=int).reshape(shape),
        )
        for assignment in itertools.product(range(n_controls), repeat=cells)
    ]


def controls_per_path(
    control: ControlData, indices: np.ndarray, x: np.ndarray, q: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """b [P, n], l [P] and rho [P, d2] for path-dependent control indices."""
    n_paths = x.shape[0]
    rho_table = control.rho_table()
    drift = np.zeros((n_paths, x.shape[1]))
    cost = np.zeros(n_paths)
    for index in np.unique(indices):
        mask = indices == index
        alpha = control.control_grid[index]
        drift[mask] = control.b(x[mask], q[mask], alpha)
        cost[mask] = control.l(x[mask], q[mask], alpha)
    return drift, cost, rho_table[indices]


@dataclass(frozen=True)
class CostEvaluation:
    weak: float
    weak_ci: float
    strong: float | None
    strong_ci: float | None
    density_mean: float
    density_ci: float
    max_log_density: float

    @property
    def joint_ci(self) -> float:
        return float(np.hypot(self.weak_ci, self.strong_ci or 0.0))


def _require_control(spec: ModelSpec) -> ControlData:
    if spec.control is None:
        raise ValueError("cost evaluation requires control data")
    return spec.control


def _mean_ci(samples: np.ndarray) -> tuple[float, float]:
    return float(np.mean(samples)), Z_95 * float(np.std(samples)) / np.sqrt(samples.size)


def _weak_cost(
    spec: ModelSpec, policy: FeedbackPolicy, bundle: PathBundle
) -> tuple[np.ndarray, np.ndarray, float]:
    control = _require_control(spec)
    dt, eps = bundle.dt, bundle.eps
    times = bundle.grid.times
    log_density = np.zeros(bundle.n_paths)
    running = np.zeros(bundle.n_paths)
    worst = 0.0
    for k in range(bundle.grid.n_steps):
        x, q = bundle.X[:, k], bundle.Q[:, k]
        indices = policy.indices(times[k], x, q)
        drift, cost, rho = controls_per_path(control, indices, x, q)
        theta_slow = spec.R.solve(drift)
        theta_fast = rho / np.sqrt(eps)
        log_density += np.sum(theta_slow * bundle.dW1[:, k], axis=1)
        log_density += np.sum(theta_fast * bundle.dW2[:, k], axis=1)
        log_density -= 0.5 * (np.sum(theta_slow**2, axis=1) + np.sum(theta_fast**2, axis=1)) * dt
        running += cost * dt
        worst = max(worst, float(np.max(log_density)))
        if worst > MAX_LOG_DENSITY:
            raise NumericalFailure(
                f"density blow-up: log-density {worst:.3g} > {MAX_LOG_DENSITY:g}",
                stage="control",
                step=k,
            )
    density = np.exp(log_density)
    return density * (running + spec.h(bundle.X[:, -1])), density, worst


def _strong_cost(
    spec: ModelSpec,
    eps: float,
    policy: FeedbackPolicy,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
) -> np.ndarray:
    control = _require_control(spec)
    rho_table = control.rho_table()

    def slow(k: int, t: float, x: np.ndarray, q: np.ndarray) -> np.ndarray:
        drift, _, _ = controls_per_path(control, policy.indices(t, x, q), x, q)
        return drift

    def fast(k: int, t: float, x: np.ndarray, q: np.ndarray) -> np.ndarray:
        return spec.G.apply(rho_table[policy.indices(t, x, q)])

    bundle = simulate_two_scale_paths(
        spec, eps, grid, n_paths, seed, extra_fast_drift=fast, extra_slow_drift=slow
    )
    running = np.zeros(n_paths)
    for k, t in enumerate(grid.times[:-1]):
        x, q = bundle.X[:, k], bundle.Q[:, k]
        _, cost, _ = controls_per_path(control, policy.indices(t, x, q), x, q)
        running += cost * grid.dt
    return running + spec.h(bundle.X[:, -1])


def evaluate_cost(
    spec: ModelSpec,
    eps: float,
    policy: FeedbackPolicy,
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    bundle: PathBundle | None = None,
    strong: bool = True,
) -> CostEvaluation:
    """Weak-formulation cost with the strong-formulation estimate alongside."""
    _require_control(spec)
    grid.require_resolution(eps)
    if bundle is None:
        bundle = simulate_two_scale_paths(spec, eps, grid, n_paths, seed)
    with logfire.span("evaluate_cost", eps=eps, n_paths=bundle.n_paths, seed=bundle.seed):
        weighted, density, worst = _weak_cost(spec, policy, bundle)
        weak, weak_ci = _mean_ci(weighted)
        density_mean, density_ci = _mean_ci(density)
        strong_value = strong_ci = None
        if strong:
            strong_value, strong_ci = _mean_ci(
                _strong_cost(spec, eps, policy, grid, bundle.n_paths, bundle.seed)
            )
        logfire.info(
            "policy cost weak={weak} strong={strong} E[Theta]={density}",
            weak=weak,
            strong=strong_value,
            density=density_mean,
        )
    return CostEvaluation(
        weak=weak,
        weak_ci=weak_ci,
        strong=strong_value,
        strong_ci=strong_ci,
        density_mean=density_mean,
        density_ci=density_ci,
        max_log_density=worst,
    )


@dataclass(frozen=True)
class BruteForceResult:
    value: float
    ci: float
    best_index: int
    values: list[float]
    cis: list[float]


def brute_force_value(
    spec: ModelSpec,
    eps: float,
    policies: Sequence[FeedbackPolicy],
    grid: TimeGrid,
    n_paths: int,
    seed: int,
    bundle: PathBundle | None = None,
    workers: int = 1,
) -> BruteForceResult:
    """Minimum weak-formulation cost over a finite policy family (upper bound for V^eps)."""
    if not policies:
        raise ValueError("policy family must be non-empty")
    if len(policies) > MAX_POLICIES:
        raise ValueError(f"policy family larger than {MAX_POLICIES}")
    grid.require_resolution(eps)
    if bundle is None:
        bundle = simulate_two_scale_paths(spec, eps, grid, n_paths, seed, workers=workers)

    def evaluate(policy: FeedbackPolicy) -> tuple[float, float]:
        return _mean_ci(_weak_cost(spec, policy, bundle)[0])

    with logfire.span("brute_force_value", eps=eps, policies=len(policies)):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(evaluate, policies))
        else:
            results = [evaluate(policy) for policy in policies]
        values = [value for value, _ in results]
        cis = [ci for _, ci in results]
        best = int(np.argmin(values))
        logfire.info("brute-force value {value} from policy {best}", value=values[best], best=best)
    return BruteForceResult(
        value=values[best], ci=cis[best], best_index=best, values=values, cis=cis
    )
