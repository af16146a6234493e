"""Least-squares projections on polynomial bases.

Features are standardised per column; columns that are constant across the
ensemble (for instance the deterministic initial state) are dropped, which
reduces the basis to the intercept at t = 0. The normal equations carry a
1e-10 ridge on every coefficient except the intercept, so fitted values keep
the sample mean of the target exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.preprocessing import PolynomialFeatures

from core.errors import NumericalFailure

RIDGE = 1e-10
MAX_CONDITION = 1e12
CONSTANT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RegressionFit:
    degree: int
    kept: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    coefficients: np.ndarray
    condition: float
    transformer: PolynomialFeatures | None

    @property
    def n_features(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def description(self) -> str:
        if self.transformer is None:
            return "constant"
        return f"polynomial(total degree <= {self.degree}, {int(self.kept.sum())} inputs)"

    def features(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        if self.transformer is None:
            return np.ones((states.shape[0], 1))
        standardized = (states[:, self.kept] - self.mean) / self.scale
        return self.transformer.transform(standardized)

    def predict(self, states: np.ndarray) -> np.ndarray:
        return self.features(states) @ self.coefficients

    def summary(self) -> dict[str, object]:
        return {
            "basis": self.description,
            "n_features": self.n_features,
            "condition": self.condition,
            "coefficients": np.asarray(self.coefficients).ravel().tolist(),
        }


def fit_regression(
    states: np.ndarray,
    targets: np.ndarray,
    degree: int = 2,
    step: int | None = None,
) -> RegressionFit:
    """Project ``targets`` ([P] or [P, k]) on polynomials of ``states`` [P, d]."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    targets = np.asarray(targets, dtype=float)
    n_paths = states.shape[0]
    mean = states.mean(axis=0)
    scale = states.std(axis=0)
    kept = scale > CONSTANT_TOLERANCE * (1.0 + np.abs(mean))

    if degree < 1 or not np.any(kept):
        coefficients = np.asarray(np.mean(targets, axis=0))[None, ...]
        return RegressionFit(
            degree=0,
            kept=kept,
            mean=mean[kept],
            scale=scale[kept],
            coefficients=coefficients,
            condition=1.0,
            transformer=None,
        )

    transformer = PolynomialFeatures(degree=degree, include_bias=True)
    standardized = (states[:, kept] - mean[kept]) / scale[kept]
    design = transformer.fit_transform(standardized)
    gram = design.T @ design / n_paths
    condition = float(np.linalg.cond(gram))
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise NumericalFailure(
            f"regression rank-deficient (condition {condition:.3g})", stage="regression", step=step
        )
    penalty = RIDGE * max(float(np.trace(gram)) / gram.shape[0], 1.0) * np.eye(gram.shape[0])
    penalty[0, 0] = 0.0
    coefficients = np.linalg.solve(gram + penalty, design.T @ targets / n_paths)
    return RegressionFit(
        degree=degree,
        kept=kept,
        mean=mean[kept],
        scale=scale[kept],
        coefficients=coefficients,
        condition=condition,
        transformer=transformer,
    )
