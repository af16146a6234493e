"""Spectral Galerkin truncation of the reaction-diffusion control example.

Fields on (0, 1) with Dirichlet conditions are expanded in the sine basis
``e_k = sqrt(2) sin(k pi s)``. Spatial integrals use one fixed Gauss-Legendre
rule, so refining ``n_modes`` leaves the leading coefficients untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import roots_legendre

from core.errors import HypothesisViolation

from .spec import ControlData, ModelConstants, ModelSpec
from .spectral import NoiseMap, SpectralOperator
from .validation import validate_model

QUADRATURE_NODES = 128
# sup of |d/dv tanh(v)^2|
TANH_SQUARED_SLOPE = 0.7699


class ReactionDiffusionParams(BaseModel):
    """Coefficients of the controlled slow/fast reaction-diffusion pair."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    m: float = Field(1.0, gt=0.0)
    f_scale: float = 0.4
    f_coupling_u: float = 0.0
    sigma_level: float = 1.0
    sigma_wave: float = 0.0
    c_sigma: float = Field(0.1, gt=0.0)
    rho_level: float = 1.0
    beta_b: float = 1.0
    b_scale: float = 0.3
    kappa: float = 1.0
    l_scale: float = 0.2
    h_scale: float = 1.0
    r_scale: float = 0.0
    control_levels: list[float] = Field(default_factory=lambda: [-1.0, -0.5, 0.0, 0.5, 1.0])
    initial_amplitude: float = 0.5

    def sigma(self, s: np.ndarray) -> np.ndarray:
        return self.sigma_level + self.sigma_wave * np.cos(np.pi * s)

    def rho_fn(self, s: np.ndarray) -> np.ndarray:
        return np.full_like(s, self.rho_level)

    @property
    def f_lipschitz(self) -> float:
        return abs(self.f_scale) * max(1.0, abs(self.f_coupling_u))


@dataclass(frozen=True)
class SineQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    basis: np.ndarray

    @classmethod
    def build(cls, n_modes: int, n_nodes: int = QUADRATURE_NODES) -> "SineQuadrature":
        raw_nodes, raw_weights = roots_legendre(n_nodes)
        nodes = 0.5 * (raw_nodes + 1.0)
        weights = 0.5 * raw_weights
        k = np.arange(1, n_modes + 1)
        basis = np.sqrt(2.0) * np.sin(np.pi * np.outer(nodes, k))
        return cls(nodes=nodes, weights=weights, basis=basis)

    def synthesize(self, coefficients: np.ndarray) -> np.ndarray:
        """Coefficients [P, n] -> field values at nodes [P, J]."""
        return coefficients @ self.basis.T

    def project(self, values: np.ndarray) -> np.ndarray:
        """Field values [P, J] -> coefficients [P, n]."""
        return values @ (self.weights[:, None] * self.basis)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return values @ self.weights

    def gain_matrix(self, multiplier: np.ndarray) -> np.ndarray:
        """Entries <multiplier e_k, e_j> of a multiplication operator."""
        weighted = (self.weights * multiplier)[:, None] * self.basis
        return self.basis.T @ weighted


@dataclass(frozen=True)
class _ReactionNonlinearity:
    params: ReactionDiffusionParams
    quadrature: SineQuadrature

    def __call__(self, x: np.ndarray, q: np.ndarray) -> np.ndarray:
        u = self.quadrature.synthesize(x)
        v = self.quadrature.synthesize(q)
        values = self.params.f_scale * np.tanh(v + self.params.f_coupling_u * u)
        return self.quadrature.project(values)


@dataclass(frozen=True)
class _ReactionDrift:
    params: ReactionDiffusionParams
    quadrature: SineQuadrature

    def __call__(self, x: np.ndarray, q: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        level = float(np.atleast_1d(alpha)[0])
        u = self.quadrature.synthesize(x)
        values = level * self.params.beta_b + self.params.b_scale * np.tanh(u)
        return self.quadrature.project(values)


@dataclass(frozen=True)
class _ReactionCost:
    params: ReactionDiffusionParams
    quadrature: SineQuadrature

    def __call__(self, x: np.ndarray, q: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        level = float(np.atleast_1d(alpha)[0])
        v = self.quadrature.synthesize(q)
        values = self.params.l_scale * np.tanh(v) ** 2
        return 0.5 * self.params.kappa * level**2 + self.quadrature.integrate(values)


@dataclass(frozen=True)
class _ReactionFastControl:
    coefficients: np.ndarray
    r_scale: float

    def __call__(self, alpha: np.ndarray) -> np.ndarray:
        return self.r_scale * float(np.atleast_1d(alpha)[0]) * self.coefficients


@dataclass(frozen=True)
class _ReactionTerminal:
    params: ReactionDiffusionParams
    quadrature: SineQuadrature

    def __call__(self, x: np.ndarray) -> np.ndarray:
        u = self.quadrature.synthesize(x)
        return self.quadrature.integrate(self.params.h_scale * np.tanh(u))


def dirichlet_eigenvalues(n_modes: int) -> np.ndarray:
    k = np.arange(1, n_modes + 1)
    return -(np.pi**2) * k.astype(float) ** 2


def galerkin_truncate(
    params: ReactionDiffusionParams,
    n_modes: int,
    probes: int = 2000,
    seed: int = 0,
) -> ModelSpec:
    """Truncate the reaction-diffusion example to ``n_modes`` sine modes and validate it."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if params.f_lipschitz >= params.m:
        raise ValueError("reaction term must be Lipschitz with constant < m")

    quadrature = SineQuadrature.build(n_modes)
    sigma_nodes = params.sigma(quadrature.nodes)
    worst = int(np.argmin(np.abs(sigma_nodes)))
    if abs(sigma_nodes[worst]) < params.c_sigma:
        raise HypothesisViolation(
            "A.4",
            f"noise coefficient degenerate: |sigma| = {abs(sigma_nodes[worst]):.3g} < c_sigma = {params.c_sigma:g}",
            witness={"node": float(quadrature.nodes[worst])},
        )

    laplacian = dirichlet_eigenvalues(n_modes)
    R = NoiseMap.with_right_inverse(quadrature.gain_matrix(sigma_nodes))
    G = NoiseMap(quadrature.gain_matrix(params.rho_fn(quadrature.nodes)))
    ones_coefficients = quadrature.project(np.ones((1, quadrature.nodes.size)))[0]

    levels = np.asarray(params.control_levels, dtype=float)
    max_level = float(np.max(np.abs(levels)))
    drift_bound = max_level * abs(params.beta_b) + abs(params.b_scale)
    fast_bound = abs(params.r_scale) * max_level * float(np.linalg.norm(ones_coefficients))
    bound = max(
        drift_bound,
        0.5 * abs(params.kappa) * max_level**2 + abs(params.l_scale),
        abs(params.h_scale),
        fast_bound,
    )
    lipschitz = max(
        abs(params.b_scale),
        TANH_SQUARED_SLOPE * abs(params.l_scale),
        abs(params.h_scale),
    )
    control = ControlData(
        control_grid=levels[:, None],
        b=_ReactionDrift(params, quadrature),
        rho=_ReactionFastControl(ones_coefficients, params.r_scale),
        l=_ReactionCost(params, quadrature),
        bound=bound,
        lipschitz=lipschitz,
    )

    from core.driver import hamiltonian_constants

    driver_constants = hamiltonian_constants(
        control, R, drift_bound=drift_bound, fast_bound=fast_bound
    )
    x0 = np.zeros(n_modes)
    x0[0] = params.initial_amplitude / np.sqrt(2.0)
    spec = ModelSpec(
        A=SpectralOperator(laplacian),
        B=SpectralOperator(laplacian - params.m),
        F=_ReactionNonlinearity(params, quadrature),
        R=R,
        G=G,
        h=_ReactionTerminal(params, quadrature),
        x0=x0,
        q0=np.zeros(n_modes),
        constants=ModelConstants(
            lipschitz_F=params.f_lipschitz,
            lipschitz_h=abs(params.h_scale),
            bound_M=bound,
            **driver_constants,
        ),
        control=control,
        name=f"reaction-diffusion-{n_modes}",
    )
    validated, _ = validate_model(spec, probes=probes, seed=seed)
    return validated
