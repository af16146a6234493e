"""Control Hamiltonian and BSDE driver certification.

``psi(x, q, z, xi) = min_alpha l(x, q, alpha) + z.R^{-1} b(x, q, alpha) + xi.rho(alpha)``
is minimised exactly over the finite control grid; ties go to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import logfire
import numpy as np
import pandas as pd
from pydantic import BaseModel

from core.errors import HypothesisViolation
from core.model.spec import ControlData, ModelSpec
from core.model.spectral import NoiseMap

CERTIFICATION_SLACK = 0.01
MIN_DRIVER_PROBES = 1000
PROBE_SCALES = (0.01, 0.1, 1.0, 10.0)


class Driver(Protocol):
    xi_free: bool

    def __call__(
        self, x: np.ndarray, q: np.ndarray, z: np.ndarray, xi: np.ndarray
    ) -> np.ndarray: ...


@dataclass(frozen=True)
class HamiltonianEval:
    """Pointwise minimisation result, one entry per path."""

    value: np.ndarray
    minimizer: np.ndarray
    minimizer_index: np.ndarray
    gap: np.ndarray


@dataclass(frozen=True)
class HamiltonianDriver:
    control: ControlData
    R: NoiseMap
    xi_free: bool

    def scan(
        self, x: np.ndarray, q: np.ndarray, z: np.ndarray, xi: np.ndarray
    ) -> np.ndarray:
        """The scanned expression for every control point, shape [P, K]."""
        rho_table = self.control.rho_table()
        columns = []
        for index, alpha in enumerate(self.control.control_grid):
            drift = self.R.solve(self.control.b(x, q, alpha))
            column = self.control.l(x, q, alpha) + np.sum(z * drift, axis=1)
            column = column + xi @ rho_table[index]
            columns.append(np.broadcast_to(column, (x.shape[0],)))
        return np.stack(columns, axis=1)

    def evaluate(
        self, x: np.ndarray, q: np.ndarray, z: np.ndarray, xi: np.ndarray
    ) -> HamiltonianEval:
        scanned = self.scan(x, q, z, xi)
        index = np.argmin(scanned, axis=1)
        rows = np.arange(scanned.shape[0])
        value = scanned[rows, index]
        if scanned.shape[1] > 1:
            gap = np.partition(scanned, 1, axis=1)[:, 1] - value
        else:
            gap = np.full_like(value, np.inf)
        return HamiltonianEval(
            value=value,
            minimizer=self.control.control_grid[index],
            minimizer_index=index,
            gap=gap,
        )

    def __call__(
        self, x: np.ndarray, q: np.ndarray, z: np.ndarray, xi: np.ndarray
    ) -> np.ndarray:
        return np.min(self.scan(x, q, z, xi), axis=1)


@dataclass(frozen=True)
class DirectDriverAdapter:
    function: object
    xi_free: bool

    def __call__(
        self, x: np.ndarray, q: np.ndarray, z: np.ndarray, xi: np.ndarray
    ) -> np.ndarray:
        value = np.asarray(self.function(x, q, z, xi), dtype=float)
        return np.broadcast_to(value, (x.shape[0],))


def resolve_driver(spec: ModelSpec) -> Driver:
    if spec.control is not None:
        return HamiltonianDriver(spec.control, spec.R, xi_free=spec.xi_free)
    return DirectDriverAdapter(spec.driver, xi_free=spec.xi_free)


def _as_batch(value: np.ndarray, dim: int) -> np.ndarray:
    return np.atleast_2d(np.asarray(value, dtype=float)).reshape(-1, dim)


def hamiltonian_psi(spec: ModelSpec, x, q, z, xi) -> HamiltonianEval:
    """Evaluate psi and its minimiser; accepts single states or batches."""
    if spec.control is None:
        raise ValueError("hamiltonian_psi requires control data, not a direct driver")
    driver = HamiltonianDriver(spec.control, spec.R, xi_free=spec.xi_free)
    return driver.evaluate(
        _as_batch(x, spec.slow_dim),
        _as_batch(q, spec.fast_dim),
        _as_batch(z, spec.slow_noise_dim),
        _as_batch(xi, spec.fast_noise_dim),
    )


def hamiltonian_constants(
    control: ControlData,
    R: NoiseMap,
    drift_bound: float | None = None,
    fast_bound: float | None = None,
) -> dict[str, float]:
    """Analytic B.3 constants of the Hamiltonian built from bounded control data."""
    inverse_norm = float(np.linalg.norm(R.right_inverse, 2)) if R.right_inverse is not None else 1.0
    drift = control.bound if drift_bound is None else drift_bound
    rho_norms = np.linalg.norm(control.rho_table(), axis=1)
    fast = float(np.max(rho_norms)) if fast_bound is None else fast_bound
    slope = control.lipschitz * max(1.0, inverse_norm)
    return {
        "lipschitz_x": slope,
        "lipschitz_q": slope,
        "lipschitz_z": drift * inverse_norm,
        "lipschitz_xi": fast,
    }


class DriverConstantsEstimate(BaseModel):
    lipschitz_x: float
    lipschitz_q: float
    lipschitz_z: float
    lipschitz_xi: float
    probes: int


def _probe_batch(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    scales = np.resize(np.asarray(PROBE_SCALES), count)[:, None]
    return scales * rng.standard_normal((count, dim))


def _probe_ball(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    direction = rng.standard_normal((count, dim))
    direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
    return radius * rng.uniform(0.0, 1.0, (count, 1)) * direction


def certify_driver_constants(
    spec: ModelSpec, probes: int = 2000, seed: int = 0
) -> DriverConstantsEstimate:
    """Empirical maxima of the four B.3 difference quotients.

    The x and q quotients are divided by ``1 + |z|``. An estimate above its
    configured constant by more than 1% raises with the offending pair.
    """
    if probes < MIN_DRIVER_PROBES:
        raise ValueError(f"probe budget must be >= {MIN_DRIVER_PROBES}")
    driver = resolve_driver(spec)
    rng = np.random.default_rng(seed)
    radius = spec.constants.probe_z_radius
    x = _probe_batch(rng, probes, spec.slow_dim)
    q = _probe_batch(rng, probes, spec.fast_dim)
    z = _probe_ball(rng, probes, spec.slow_noise_dim, radius)
    xi = _probe_batch(rng, probes, spec.fast_noise_dim)
    base = driver(x, q, z, xi)
    weight = 1.0 + np.linalg.norm(z, axis=1)

    def quotient(shifted: np.ndarray, step: np.ndarray, scale: np.ndarray | float = 1.0):
        distance = np.linalg.norm(step, axis=1) * scale
        return np.abs(shifted - base) / np.maximum(distance, 1e-300)

    dx = _probe_batch(rng, probes, spec.slow_dim)
    dq = _probe_batch(rng, probes, spec.fast_dim)
    z_other = _probe_ball(rng, probes, spec.slow_noise_dim, radius)
    dxi = _probe_batch(rng, probes, spec.fast_noise_dim)
    quotients = {
        "lipschitz_x": (quotient(driver(x + dx, q, z, xi), dx, weight), "x", dx),
        "lipschitz_q": (quotient(driver(x, q + dq, z, xi), dq, weight), "q", dq),
        "lipschitz_z": (quotient(driver(x, q, z_other, xi), z_other - z), "z", z_other - z),
        "lipschitz_xi": (quotient(driver(x, q, z, xi + dxi), dxi), "xi", dxi),
    }

    estimates: dict[str, float] = {}
    with logfire.span("certify_driver_constants {name}", name=spec.name, probes=probes):
        for key, (ratios, argument, step) in quotients.items():
            estimate = float(np.max(ratios))
            estimates[key] = estimate
            configured = getattr(spec.constants, key)
            if estimate > configured * (1.0 + CERTIFICATION_SLACK) + 1e-12:
                index = int(np.argmax(ratios))
                witness = {
                    "argument": argument,
                    "x": x[index].tolist(),
                    "q": q[index].tolist(),
                    "z": z[index].tolist(),
                    "xi": xi[index].tolist(),
                    "step": step[index].tolist(),
                    "estimate": estimate,
                    "configured": configured,
                }
                raise HypothesisViolation(
                    "B.3",
                    f"B.3 violated: {key} estimate {estimate:.6g} exceeds {configured:g}",
                    witness=witness,
                )
        logfire.info("driver constants certified: {estimates}", estimates=estimates)
    return DriverConstantsEstimate(probes=probes, **estimates)


def log_hamiltonian_evaluations(
    spec: ModelSpec, x, q, z, xi, path: Path
) -> Path:
    """Write psi, its minimiser index and the gap per probe state to CSV."""
    result = hamiltonian_psi(spec, x, q, z, xi)
    frame = pd.DataFrame(
        {
            "value": result.value,
            "minimizer_index": result.minimizer_index,
            "gap": result.gap,
        }
    )
    for column in range(result.minimizer.shape[1]):
        frame[f"alpha_{column}"] = result.minimizer[:, column]
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.12g")
    return path
