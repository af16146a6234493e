"""Closed-form and finite-difference reference values for the BSDE solvers."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
from scipy.linalg import solve_banded

from core.model.spectral import NoiseMap, SpectralOperator


def _phi(a: np.ndarray, t: float = 1.0) -> np.ndarray:
    """int_0^t e^{a s} ds, with the a = 0 limit."""
    a = np.asarray(a, dtype=float)
    out = np.full_like(a, t)
    nonzero = np.abs(a * t) > 1e-14
    out[nonzero] = np.expm1(a[nonzero] * t) / a[nonzero]
    return out


def ou_mean(A: SpectralOperator, x0: np.ndarray, t: float = 1.0) -> np.ndarray:
    return A.semigroup(t) * np.asarray(x0, dtype=float)


def ou_covariance(A: SpectralOperator, R: NoiseMap, t: float = 1.0) -> np.ndarray:
    a = A.eigenvalues
    pair_sums = a[:, None] + a[None, :]
    return (R.matrix @ R.matrix.T) * _phi(pair_sums, t)


def linear_reference_solution(
    A: SpectralOperator,
    R: NoiseMap,
    x0: np.ndarray,
    driver_weights_z: np.ndarray | float,
    h_weights: np.ndarray | None = None,
) -> float:
    """Y_0 for psi = c.z and h = w.x on [0, 1].

    Under the Girsanov shift the slow drift gains R c, so
    Y_0 = w.(e^{A} x0) + sum_k w_k phi(a_k) (R c)_k with phi(a) = (e^a - 1)/a.
    A scalar ``driver_weights_z`` means ``a * e_1``; ``h_weights`` defaults to e_1.
    """
    n = A.dimension
    weights = np.zeros(n)
    weights[0] = 1.0
    if h_weights is not None:
        weights = np.asarray(h_weights, dtype=float)
    if np.ndim(driver_weights_z) == 0:
        c = np.zeros(R.noise_dim)
        c[0] = float(driver_weights_z)
    else:
        c = np.asarray(driver_weights_z, dtype=float)
    shift = _phi(A.eigenvalues) * (R.matrix @ c)
    return float(weights @ ou_mean(A, x0) + weights @ shift)


def quadratic_reference_solution(
    A: SpectralOperator, R: NoiseMap, x0: np.ndarray, h_weights: np.ndarray
) -> float:
    """Y_0 for psi = -|z|^2/2 and h = w.x: -log E exp(-w.X_1) = w.m - w'Sigma w / 2."""
    w = np.asarray(h_weights, dtype=float)
    mean = ou_mean(A, x0)
    covariance = ou_covariance(A, R)
    return float(w @ mean - 0.5 * w @ covariance @ w)


def kolmogorov_reference_1d(
    a: float,
    r: float,
    lam: Callable[[np.ndarray, np.ndarray], np.ndarray],
    h: Callable[[np.ndarray], np.ndarray],
    x0: float,
    half_width: float = 6.0,
    n_space: int = 401,
    n_time: int = 400,
) -> float:
    """v(0, x0) for d_t v + r^2/2 v'' + a x v' + lam(x, r v') = 0, v(1, .) = h.

    Central differences in space with linear extrapolation at both ends; the
    linear part is implicit, lam is explicit.
    """
    x = np.linspace(x0 - half_width, x0 + half_width, n_space)
    dx = x[1] - x[0]
    tau = 1.0 / n_time
    diffusion = 0.5 * r * r / dx**2
    advection = a * x / (2.0 * dx)

    # banded storage with two diagonals on each side
    bands = np.zeros((5, n_space))
    lower = -tau * (diffusion - advection[1:-1])
    centre = 1.0 + 2.0 * tau * diffusion
    upper = -tau * (diffusion + advection[1:-1])
    interior = np.arange(1, n_space - 1)
    bands[2, interior] = centre
    bands[3, interior - 1] = lower
    bands[1, interior + 1] = upper
    # v_0 - 2 v_1 + v_2 = 0 and the mirror condition at the right end
    bands[2, 0], bands[1, 1], bands[0, 2] = 1.0, -2.0, 1.0
    bands[2, -1], bands[3, -2], bands[4, -3] = 1.0, -2.0, 1.0

    v = np.asarray(h(x), dtype=float).copy()
    for _ in range(n_time):
        gradient = np.gradient(v, dx)
        rhs = v + tau * np.asarray(lam(x, r * gradient), dtype=float)
        rhs[0] = rhs[-1] = 0.0
        v = solve_banded((2, 2), bands, rhs)
    return float(np.interp(x0, x, v))
