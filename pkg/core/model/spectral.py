"""Diagonal operators and noise maps on a truncated basis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RIGHT_INVERSE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SpectralOperator:
    """Diagonal operator given by its eigenvalues (units 1/time)."""

    eigenvalues: np.ndarray

    def __post_init__(self) -> None:
        values = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float))
        if values.ndim != 1 or values.size < 1:
            raise ValueError("eigenvalues must be a non-empty vector")
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)

    @property
    def dimension(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.eigenvalues)))

    @property
    def dissipativity(self) -> float:
        """Largest m with <Bq, q> <= -m|q|^2, i.e. minus the top eigenvalue."""
        return float(-np.max(self.eigenvalues))

    def apply(self, state: np.ndarray) -> np.ndarray:
        return state * self.eigenvalues

    def semigroup(self, t: float) -> np.ndarray:
        """Diagonal of e^{tA}."""
        return np.exp(self.eigenvalues * t)

    def resolvent(self, h: float) -> np.ndarray:
        """Diagonal of (I - hA)^{-1}."""
        return 1.0 / (1.0 - h * self.eigenvalues)

    def convolution_variance(self, dt: float) -> np.ndarray:
        """Per-mode variance of int_0^dt e^{(dt-s)a} dW for a unit noise gain."""
        a = self.eigenvalues
        out = np.full_like(a, dt)
        nonzero = np.abs(a * dt) > 1e-12
        out[nonzero] = np.expm1(2.0 * a[nonzero] * dt) / (2.0 * a[nonzero])
        return out

    def phi1(self, dt: float) -> np.ndarray:
        """Diagonal of int_0^dt e^{sA} ds / dt (exponential-Euler weight)."""
        a = self.eigenvalues
        out = np.ones_like(a)
        nonzero = np.abs(a * dt) > 1e-12
        out[nonzero] = np.expm1(a[nonzero] * dt) / (a[nonzero] * dt)
        return out


@dataclass(frozen=True)
class NoiseMap:
    """Linear noise gain Xi -> state, optionally with a right inverse."""

    matrix: np.ndarray
    right_inverse: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        if self.right_inverse is not None:
            inverse = np.atleast_2d(np.asarray(self.right_inverse, dtype=float))
            inverse.setflags(write=False)
            object.__setattr__(self, "right_inverse", inverse)

    @classmethod
    def identity(cls, dimension: int) -> "NoiseMap":
        eye = np.eye(dimension)
        return cls(matrix=eye, right_inverse=eye)

    @classmethod
    def with_right_inverse(cls, matrix: np.ndarray) -> "NoiseMap":
        """Attach the Moore-Penrose right inverse (used for the slow noise R)."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        return cls(matrix=matrix, right_inverse=np.linalg.pinv(matrix))

    @property
    def state_dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def noise_dim(self) -> int:
        return int(self.matrix.shape[1])

    def right_inverse_error(self) -> float:
        if self.right_inverse is None:
            return float("inf")
        product = self.matrix @ self.right_inverse
        return float(np.max(np.abs(product - np.eye(self.state_dim))))

    def right_inverse_tolerance(self) -> float:
        """1e-12, relaxed by the condition number for non-trivial matrices."""
        if self.right_inverse is None:
            return RIGHT_INVERSE_TOLERANCE
        scale = np.linalg.norm(self.matrix, 2) * np.linalg.norm(self.right_inverse, 2)
        return RIGHT_INVERSE_TOLERANCE * max(1.0, float(scale))

    def has_right_inverse(self) -> bool:
        return self.right_inverse_error() <= self.right_inverse_tolerance()

    def apply(self, noise: np.ndarray) -> np.ndarray:
        return noise @ self.matrix.T

    def solve(self, state: np.ndarray) -> np.ndarray:
        """R^{-1} applied to a batch of state vectors."""
        if self.right_inverse is None:
            raise ValueError("noise map has no right inverse")
        return state @ self.right_inverse.T
