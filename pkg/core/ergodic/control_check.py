"""Upper bound for lambda(x, z) from stationary feedback policies on the fast variable."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import logfire
import numpy as np

from core.control import FeedbackPolicy, controls_per_path
from core.forward import simulate_frozen_fast
from core.model.spec import ModelSpec

from .estimators import BURN_IN_FRACTION, Z_95


@dataclass(frozen=True)
class ErgodicControlResult:
    value: float
    ci: float
    best_index: int
    values: list[float]
    cis: list[float]


def ergodic_control_cross_check(
    spec: ModelSpec,
    x: np.ndarray,
    z: np.ndarray,
    policies: Sequence[FeedbackPolicy],
    horizon: float,
    dt: float,
    n_paths: int,
    seed: int,
) -> ErgodicControlResult:
    """min over policies of the long-run average of z.R^{-1} b + l along the controlled fast paths.

    The fast drift is shifted by G rho(beta(q)). Policies see t = s (rescaled
    time), the frozen x and the current q. All policies share one seed.
    """
    if spec.control is None:
        raise ValueError("ergodic control check requires control data")
    if not policies:
        raise ValueError("policy family must be non-empty")
    control = spec.control
    x = np.asarray(x, dtype=float).reshape(spec.slow_dim)
    z = np.asarray(z, dtype=float).reshape(spec.slow_noise_dim)
    frozen = np.broadcast_to(x, (n_paths, spec.slow_dim))
    rho_table = control.rho_table()

    def ergodic_cost(policy: FeedbackPolicy) -> tuple[float, float]:
        def shift(k: int, s: float, q: np.ndarray) -> np.ndarray:
            return spec.G.apply(rho_table[policy.indices(s, frozen, q)])

        bundle = simulate_frozen_fast(spec, x, spec.q0, horizon, dt, n_paths, seed, extra_drift=shift)
        start = int(np.ceil(BURN_IN_FRACTION * bundle.grid.n_steps))
        running = np.zeros(n_paths)
        for k in range(start, bundle.grid.n_steps):
            q = bundle.Q[:, k]
            drift, cost, _ = controls_per_path(
                control, policy.indices(bundle.grid.times[k], frozen, q), frozen, q
            )
            running += cost + spec.R.solve(drift) @ z
        averages = running / (bundle.grid.n_steps - start)
        return float(np.mean(averages)), Z_95 * float(np.std(averages)) / np.sqrt(n_paths)

    with logfire.span("ergodic_control_cross_check", policies=len(policies), horizon=horizon):
        results = [ergodic_cost(policy) for policy in policies]
        values = [value for value, _ in results]
        cis = [ci for _, ci in results]
        best = int(np.argmin(values))
        logfire.info("ergodic control bound {value} (policy {best})", value=values[best], best=best)
    return ErgodicControlResult(
        value=values[best], ci=cis[best], best_index=best, values=values, cis=cis
    )
