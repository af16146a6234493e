"""Parametric map families that model files can reference by ``kind``.

Each family is a frozen, vectorised callable that also reports the analytic
constants the hypothesis checks compare probes against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def as_matrix(value, rows: int, cols: int) -> np.ndarray:
    matrix = np.asarray(value, dtype=float).reshape(rows, cols)
    matrix.setflags(write=False)
    return matrix


def _spectral_norm(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


@dataclass(frozen=True)
class TanhNonlinearity:
    """F(x, q) = scale * tanh(C_x x + C_q q + offset)."""

    scale: float
    coupling_x: np.ndarray
    coupling_q: np.ndarray
    offset: np.ndarray

    def __call__(self, x: np.ndarray, q: np.ndarray) -> np.ndarray:
        return self.scale * np.tanh(x @ self.coupling_x.T + q @ self.coupling_q.T + self.offset)

    @property
    def lipschitz(self) -> float:
        return abs(self.scale) * max(
            _spectral_norm(self.coupling_x), _spectral_norm(self.coupling_q)
        )

    @property
    def bound(self) -> float:
        return abs(self.scale) * np.sqrt(self.coupling_q.shape[0])


@dataclass(frozen=True)
class AffineTanhDrift:
    """b(x, q, alpha) = C_alpha alpha + scale * tanh(C_x x + C_q q)."""

    control_matrix: np.ndarray
    scale: float
    coupling_x: np.ndarray
    coupling_q: np.ndarray

    def __call__(self, x: np.ndarray, q: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        shift = self.control_matrix @ np.atleast_1d(alpha)
        return shift + self.scale * np.tanh(x @ self.coupling_x.T + q @ self.coupling_q.T)

    @property
    def lipschitz(self) -> float:
        return abs(self.scale) * max(
            _spectral_norm(self.coupling_x), _spectral_norm(self.coupling_q)
        )

    def bound(self, control_grid: np.ndarray) -> float:
        shifts = np.linalg.norm(control_grid @ self.control_matrix.T, axis=1)
        return float(np.max(shifts)) + abs(self.scale) * np.sqrt(self.control_matrix.shape[0])


@dataclass(frozen=True)
class QuadraticTanhCost:
    """l(x, q, alpha) = kappa/2 |alpha|^2 + scale * tanh(w_x.x + w_q.q)."""

    control_weight: float
    scale: float
    weights_x: np.ndarray
    weights_q: np.ndarray

    def __call__(self, x: np.ndarray, q: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        effort = 0.5 * self.control_weight * float(np.sum(np.square(alpha)))
        return effort + self.scale * np.tanh(x @ self.weights_x + q @ self.weights_q)

    @property
    def lipschitz(self) -> float:
        return abs(self.scale) * max(
            float(np.linalg.norm(self.weights_x)), float(np.linalg.norm(self.weights_q))
        )

    def bound(self, control_grid: np.ndarray) -> float:
        effort = 0.5 * abs(self.control_weight) * float(np.max(np.sum(control_grid**2, axis=1)))
        return effort + abs(self.scale)


@dataclass(frozen=True)
class LinearFastControl:
    """rho(alpha) = M alpha."""

    matrix: np.ndarray

    def __call__(self, alpha: np.ndarray) -> np.ndarray:
        return self.matrix @ np.atleast_1d(alpha)

    def bound(self, control_grid: np.ndarray) -> float:
        return float(np.max(np.linalg.norm(control_grid @ self.matrix.T, axis=1)))


@dataclass(frozen=True)
class LinearTerminal:
    """h(x) = w.x (Lipschitz, unbounded)."""

    weights: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.weights))

    @property
    def bound(self) -> float:
        return float("inf") if np.any(self.weights) else 0.0


@dataclass(frozen=True)
class TanhTerminal:
    """h(x) = scale * tanh(w.x)."""

    scale: float
    weights: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.scale * np.tanh(x @ self.weights)

    @property
    def lipschitz(self) -> float:
        return abs(self.scale) * float(np.linalg.norm(self.weights))

    @property
    def bound(self) -> float:
        return abs(self.scale)


@dataclass(frozen=True)
class AffineDriver:
    """psi = c + w_x.x + w_q.q + w_z.z + w_xi.xi."""

    constant: float
    weights_x: np.ndarray
    weights_q: np.ndarray
    weights_z: np.ndarray
    weights_xi: np.ndarray

    def __call__(self, x, q, z, xi) -> np.ndarray:
        return (
            self.constant
            + x @ self.weights_x
            + q @ self.weights_q
            + z @ self.weights_z
            + xi @ self.weights_xi
        )

    def constants(self) -> dict[str, float]:
        return {
            "lipschitz_x": float(np.linalg.norm(self.weights_x)),
            "lipschitz_q": float(np.linalg.norm(self.weights_q)),
            "lipschitz_z": float(np.linalg.norm(self.weights_z)),
            "lipschitz_xi": float(np.linalg.norm(self.weights_xi)),
        }


@dataclass(frozen=True)
class QuadraticZDriver:
    """psi = c - scale/2 |z|^2 (concave in z, constant in q and xi).

    Lipschitz in z only on bounded z-domains; ``z_radius`` records the domain
    used to report L_z = scale * z_radius.
    """

    constant: float
    scale: float
    z_radius: float

    def __call__(self, x, q, z, xi) -> np.ndarray:
        return self.constant - 0.5 * self.scale * np.sum(z * z, axis=1)

    def constants(self) -> dict[str, float]:
        return {
            "lipschitz_x": 0.0,
            "lipschitz_q": 0.0,
            "lipschitz_z": abs(self.scale) * self.z_radius,
            "lipschitz_xi": 0.0,
        }


@dataclass(frozen=True)
class TanhQDriver:
    """psi = c + scale * tanh(w_q.q) + w_z.z (xi-free, q-dependent)."""

    constant: float
    scale: float
    weights_q: np.ndarray
    weights_z: np.ndarray

    def __call__(self, x, q, z, xi) -> np.ndarray:
        return self.constant + self.scale * np.tanh(q @ self.weights_q) + z @ self.weights_z

    def constants(self) -> dict[str, float]:
        return {
            "lipschitz_x": 0.0,
            "lipschitz_q": abs(self.scale) * float(np.linalg.norm(self.weights_q)),
            "lipschitz_z": float(np.linalg.norm(self.weights_z)),
            "lipschitz_xi": 0.0,
        }
