from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.control import PolicyFamilySpec
from core.ergodic.table import LambdaBudgets
from core.model.galerkin import ReactionDiffusionParams

DEFAULT_EPS = (0.4, 0.2, 0.1, 0.05)
MAX_EXAMPLE_MODES = 8
HASH_LENGTH = 12


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LambdaSection(_Section):
    x_grid: list[float] = Field(default_factory=lambda: [-3.0, -1.5, 0.0, 1.5, 3.0])
    z_grid: list[float] = Field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0])
    active_x: int | None = Field(None, ge=0)
    active_z: int | None = Field(None, ge=0)
    method: Literal["time_average", "ergodic_bsde"] | None = None
    budgets: LambdaBudgets = Field(default_factory=LambdaBudgets)

    @field_validator("x_grid", "z_grid")
    @classmethod
    def _increasing(cls, grid: list[float]) -> list[float]:
        if not grid:
            raise ValueError("grid must be non-empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly increasing")
        return grid


class StudySeeds(_Section):
    simulation: int = 0
    probe: int | None = None


class ControlStudySection(_Section):
    """Optional brute-force value check at the smallest eps."""

    family: PolicyFamilySpec = Field(default_factory=PolicyFamilySpec)
    n_paths: int = Field(2000, ge=2)


class ReactionDiffusionSection(_Section):
    n_modes: int = Field(2, ge=1)
    params: ReactionDiffusionParams = Field(default_factory=ReactionDiffusionParams)

    @field_validator("n_modes")
    @classmethod
    def _desk_scale(cls, n_modes: int) -> int:
        if n_modes > MAX_EXAMPLE_MODES:
            raise ValueError(f"n_modes must be <= {MAX_EXAMPLE_MODES}")
        return n_modes


class StudyConfig(_Section):
    """Declarative convergence study.

    ``model`` is resolved relative to the study file. Exactly one of ``model``
    and ``reaction_diffusion`` describes the system.
    """

    name: str = "study"
    model: Path | None = None
    reaction_diffusion: ReactionDiffusionSection | None = None
    eps: list[float] = Field(default_factory=lambda: list(DEFAULT_EPS))
    n_paths: int = Field(10_000, ge=2)
    degree: int = Field(2, ge=1)
    seeds: StudySeeds = Field(default_factory=StudySeeds)
    lambda_table: LambdaSection = Field(default_factory=LambdaSection)
    control: ControlStudySection | None = None
    output_dir: Path | None = None
    workers: int | None = Field(None, ge=1)

    @field_validator("eps")
    @classmethod
    def _eps_schedule(cls, eps: list[float]) -> list[float]:
        if not eps:
            raise ValueError("eps list must be non-empty")
        if any(not 0.0 < value <= 1.0 for value in eps):
            raise ValueError("eps values must lie in (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps list must be strictly decreasing")
        return eps

    @model_validator(mode="after")
    def _one_system(self) -> "StudyConfig":
        if (self.model is None) == (self.reaction_diffusion is None):
            raise ValueError("study needs exactly one of 'model' or 'reaction_diffusion'")
        return self

    @property
    def eps_min(self) -> float:
        return self.eps[-1]

    def resolve_paths(self, base: Path) -> "StudyConfig":
        """Return a copy whose relative paths are anchored at ``base``."""
        updates = {}
        if self.model is not None and not self.model.is_absolute():
            updates["model"] = (base / self.model).resolve()
        if self.output_dir is not None and not self.output_dir.is_absolute():
            updates["output_dir"] = (base / self.output_dir).resolve()
        return self.model_copy(update=updates)

    def fingerprint(self) -> str:
        """SHA-256 over the numerical content: the config minus output plumbing, plus the model file."""
        payload = self.model_dump(mode="json", exclude={"output_dir", "workers", "model"})
        if self.model is not None:
            payload["model_file"] = json.loads(Path(self.model).read_text(encoding="utf-8"))
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def short_hash(self) -> str:
        return self.fingerprint()[:HASH_LENGTH]


def load_study_config(path: Path) -> StudyConfig:
    path = Path(path)
    raw = json.loads(path.read_text(encoding="utf-8"))
    return StudyConfig.model_validate(raw).resolve_paths(path.resolve().parent)
