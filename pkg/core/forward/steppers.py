"""One-step maps for the slow and fast equations.

The slow step uses the exact Ornstein-Uhlenbeck transition per mode: the
convolution increment is the draw pushed through R and rescaled by the exact
per-mode standard deviation. This is exact for diagonal R and first order for
general R.

The fast step treats B implicitly through its resolvent, so with F = 0 it never
expands the distance between two solutions driven by the same noise.
"""

from __future__ import annotations

import numpy as np

from core.model.spec import Nonlinearity
from core.model.spectral import NoiseMap, SpectralOperator


def step_slow_exact(
    A: SpectralOperator,
    R: NoiseMap,
    x: np.ndarray,
    dt: float,
    gaussian_draw: np.ndarray,
) -> np.ndarray:
    if dt <= 0:
        raise ValueError("dt must be positive")
    scale = np.sqrt(A.convolution_variance(dt))
    return x * A.semigroup(dt) + scale * R.apply(gaussian_draw)


def step_fast_semi_implicit(
    B: SpectralOperator,
    F: Nonlinearity,
    G: NoiseMap,
    q: np.ndarray,
    x: np.ndarray,
    dt: float,
    eps: float,
    gaussian_draw: np.ndarray,
    extra_drift: np.ndarray | None = None,
) -> np.ndarray:
    if dt <= 0 or eps <= 0:
        raise ValueError("dt and eps must be positive")
    h = dt / eps
    drift = F(x, q)
    if extra_drift is not None:
        drift = drift + extra_drift
    rhs = q + h * drift + np.sqrt(h) * G.apply(gaussian_draw)
    return rhs * B.resolvent(h)


def step_fast_explicit(
    B: SpectralOperator,
    F: Nonlinearity,
    G: NoiseMap,
    q: np.ndarray,
    x: np.ndarray,
    dt: float,
    eps: float,
    gaussian_draw: np.ndarray,
) -> np.ndarray:
    """Explicit Euler-Maruyama step, kept as the refinement reference."""
    h = dt / eps
    return q + h * (B.apply(q) + F(x, q)) + np.sqrt(h) * G.apply(gaussian_draw)
