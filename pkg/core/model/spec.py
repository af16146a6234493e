"""Finite-dimensional two-scale model and its control data.

All maps are vectorised over a leading batch axis ``P``:

* ``F(x[P,n], q[P,m]) -> [P,m]``
* ``b(x, q, alpha[d_u]) -> [P,n]``, ``l(x, q, alpha) -> [P]``, ``rho(alpha) -> [d2]``
* ``h(x) -> [P]``
* ``psi(x, q, z[P,d1], xi[P,d2]) -> [P]`` for direct drivers
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field, replace

import numpy as np

from .spectral import NoiseMap, SpectralOperator

Nonlinearity = Callable[[np.ndarray, np.ndarray], np.ndarray]
SlowDrift = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
RunningCost = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
FastControl = Callable[[np.ndarray], np.ndarray]
TerminalCost = Callable[[np.ndarray], np.ndarray]
DirectDriver = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def zero_nonlinearity(x: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.zeros_like(q)


@dataclass(frozen=True)
class ControlData:
    """Control grid and the maps entering the Hamiltonian.

    ``bound`` is the uniform bound M and ``lipschitz`` the constant L of the
    standing control hypothesis. The terminal cost lives on :class:`ModelSpec`.
    """

    control_grid: np.ndarray
    b: SlowDrift
    rho: FastControl
    l: RunningCost
    bound: float
    lipschitz: float

    def __post_init__(self) -> None:
        grid = np.asarray(self.control_grid, dtype=float)
        if grid.ndim == 1:
            grid = grid[:, None]
        if grid.ndim != 2 or grid.shape[0] < 1:
            raise ValueError("control_grid must be a non-empty list of control points")
        grid.setflags(write=False)
        object.__setattr__(self, "control_grid", grid)

    @property
    def size(self) -> int:
        return int(self.control_grid.shape[0])

    def rho_table(self) -> np.ndarray:
        """rho evaluated on every control point, shape [K, d2]."""
        return np.stack([np.atleast_1d(self.rho(alpha)) for alpha in self.control_grid])


@dataclass(frozen=True)
class ModelConstants:
    """Configured constants: standing hypotheses plus the certification bounds."""

    lipschitz_F: float = 0.0
    lipschitz_x: float = 0.0
    lipschitz_q: float = 0.0
    lipschitz_z: float = 0.0
    lipschitz_xi: float = 0.0
    lipschitz_h: float = 1.0
    bound_M: float = float("inf")
    lambda_lipschitz_x: float = 1.0
    lambda_lipschitz_z: float = 1.0
    vcheck_growth: float = 5.0
    probe_z_radius: float = 5.0


@dataclass(frozen=True)
class ModelSpec:
    A: SpectralOperator
    B: SpectralOperator
    F: Nonlinearity
    R: NoiseMap
    G: NoiseMap
    h: TerminalCost
    x0: np.ndarray
    q0: np.ndarray
    constants: ModelConstants = field(default_factory=ModelConstants)
    control: ControlData | None = None
    driver: DirectDriver | None = None
    mu: float | None = None
    name: str = "model"

    def __post_init__(self) -> None:
        if (self.control is None) == (self.driver is None):
            raise ValueError("exactly one of control data or a direct driver is required")
        for attr in ("x0", "q0"):
            value = np.atleast_1d(np.asarray(getattr(self, attr), dtype=float))
            value.setflags(write=False)
            object.__setattr__(self, attr, value)
        if self.x0.size != self.A.dimension:
            raise ValueError("x0 dimension does not match A")
        if self.q0.size != self.B.dimension:
            raise ValueError("q0 dimension does not match B")
        if self.R.state_dim != self.A.dimension:
            raise ValueError("R must map into the slow state space")
        if self.G.state_dim != self.B.dimension:
            raise ValueError("G must map into the fast state space")

    @property
    def slow_dim(self) -> int:
        return self.A.dimension

    @property
    def fast_dim(self) -> int:
        return self.B.dimension

    @property
    def slow_noise_dim(self) -> int:
        return self.R.noise_dim

    @property
    def fast_noise_dim(self) -> int:
        return self.G.noise_dim

    @property
    def validated(self) -> bool:
        return self.mu is not None

    @property
    def xi_free(self) -> bool:
        """True when the driver does not depend on xi (L_xi = 0)."""
        return self.constants.lipschitz_xi == 0.0

    def require_mu(self) -> float:
        if self.mu is None:
            raise ValueError("model has not been validated (mu unknown)")
        return self.mu

    def with_initial_state(
        self, x0: np.ndarray | None = None, q0: np.ndarray | None = None
    ) -> "ModelSpec":
        return replace(
            self,
            x0=self.x0 if x0 is None else x0,
            q0=self.q0 if q0 is None else q0,
        )
