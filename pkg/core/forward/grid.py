from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RESOLUTION_FACTOR = 10


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    n_steps: int

    def __post_init__(self) -> None:
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not self.t1 > self.t0:
            raise ValueError("time grid needs t1 > t0")

    @classmethod
    def unit(cls, n_steps: int) -> "TimeGrid":
        return cls(0.0, 1.0, n_steps)

    @classmethod
    def resolving(cls, eps: float, t0: float = 0.0, t1: float = 1.0) -> "TimeGrid":
        """Coarsest grid on [t0, t1] with dt <= eps / 10."""
        n_steps = int(np.ceil((t1 - t0) * RESOLUTION_FACTOR / eps - 1e-9))
        return cls(t0, t1, max(n_steps, 1))

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def horizon(self) -> float:
        return self.t1 - self.t0

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def resolves(self, eps: float) -> bool:
        return self.dt <= eps / RESOLUTION_FACTOR * (1.0 + 1e-9)

    def require_resolution(self, eps: float) -> None:
        if eps <= 0:
            raise ValueError("eps must be positive")
        if not self.resolves(eps):
            raise ValueError(
                f"fast scale unresolved: dt = {self.dt:.4g} > eps/{RESOLUTION_FACTOR} = "
                f"{eps / RESOLUTION_FACTOR:.4g}"
            )

    def to_dict(self) -> dict[str, float | int]:
        return {"t0": self.t0, "t1": self.t1, "n_steps": self.n_steps}
