"""Declarative JSON model files.

See ``docs/model_files.md`` for the schema. Maps are chosen from the named
families in :mod:`core.model.families`; analytic constants are derived from the
families unless the ``constants`` section overrides them.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Any, Literal

import logfire
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .families import (
    AffineDriver,
    AffineTanhDrift,
    LinearFastControl,
    LinearTerminal,
    QuadraticTanhCost,
    QuadraticZDriver,
    TanhNonlinearity,
    TanhQDriver,
    TanhTerminal,
    as_matrix,
)
from .spec import ControlData, ModelConstants, ModelSpec, zero_nonlinearity
from .spectral import NoiseMap, SpectralOperator
from .validation import ValidationReport, validate_model

Matrix = list[list[float]]
NoiseSpec = Literal["identity"] | Matrix


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ZeroNonlinearitySection(_Section):
    kind: Literal["zero"] = "zero"


class TanhNonlinearitySection(_Section):
    kind: Literal["tanh"]
    scale: float
    coupling_x: Matrix | None = None
    coupling_q: Matrix | None = None
    offset: list[float] | None = None


class LinearTerminalSection(_Section):
    kind: Literal["linear"]
    weights: list[float]


class TanhTerminalSection(_Section):
    kind: Literal["tanh"]
    scale: float = 1.0
    weights: list[float]


class DriftSection(_Section):
    control_matrix: Matrix
    scale: float = 0.0
    coupling_x: Matrix | None = None
    coupling_q: Matrix | None = None


class CostSection(_Section):
    control_weight: float = 1.0
    scale: float = 0.0
    weights_x: list[float] | None = None
    weights_q: list[float] | None = None


class ControlSection(_Section):
    b: DriftSection
    l: CostSection
    rho: Matrix | None = None


class AffineDriverSection(_Section):
    kind: Literal["affine"]
    constant: float = 0.0
    weights_x: list[float] | None = None
    weights_q: list[float] | None = None
    weights_z: list[float] | None = None
    weights_xi: list[float] | None = None


class QuadraticZDriverSection(_Section):
    kind: Literal["quadratic_z"]
    constant: float = 0.0
    scale: float = 1.0
    z_radius: float = 5.0


class TanhQDriverSection(_Section):
    kind: Literal["tanh_q"]
    constant: float = 0.0
    scale: float = 1.0
    weights_q: list[float]
    weights_z: list[float] | None = None


class ConstantsSection(_Section):
    lipschitz_F: float | None = None
    lipschitz_x: float | None = None
    lipschitz_q: float | None = None
    lipschitz_z: float | None = None
    lipschitz_xi: float | None = None
    lipschitz_h: float | None = None
    bound_M: float | None = None
    control_lipschitz: float | None = None
    lambda_lipschitz_x: float | None = None
    lambda_lipschitz_z: float | None = None
    vcheck_growth: float | None = None
    probe_z_radius: float | None = None


class SeedsSection(_Section):
    probe: int | None = None
    simulation: int = 0


class InitialStateSection(_Section):
    x0: list[float] | None = None
    q0: list[float] | None = None


NonlinearitySection = Annotated[
    ZeroNonlinearitySection | TanhNonlinearitySection, Field(discriminator="kind")
]
TerminalSection = Annotated[
    LinearTerminalSection | TanhTerminalSection, Field(discriminator="kind")
]
DriverSection = Annotated[
    AffineDriverSection | QuadraticZDriverSection | TanhQDriverSection,
    Field(discriminator="kind"),
]


class ModelFile(_Section):
    name: str = "model"
    eigenvalues_A: list[float]
    eigenvalues_B: list[float]
    noise_R: NoiseSpec = "identity"
    noise_G: NoiseSpec = "identity"
    nonlinearity: NonlinearitySection = Field(default_factory=ZeroNonlinearitySection)
    terminal: TerminalSection
    control_grid: list[list[float]] | list[float] | None = None
    control: ControlSection | None = None
    driver: DriverSection | None = None
    constants: ConstantsSection = Field(default_factory=ConstantsSection)
    seeds: SeedsSection = Field(default_factory=SeedsSection)
    initial_state: InitialStateSection = Field(default_factory=InitialStateSection)

    @model_validator(mode="after")
    def _check_layout(self) -> "ModelFile":
        if not self.eigenvalues_A or not self.eigenvalues_B:
            raise ValueError("eigenvalue vectors must be non-empty")
        if (self.control is None) == (self.driver is None):
            raise ValueError("model file needs exactly one of 'control' or 'driver'")
        if self.control is not None and not self.control_grid:
            raise ValueError("'control' requires a non-empty 'control_grid'")
        return self

    @property
    def slow_dim(self) -> int:
        return len(self.eigenvalues_A)

    @property
    def fast_dim(self) -> int:
        return len(self.eigenvalues_B)


def _vector(values: list[float] | None, size: int) -> np.ndarray:
    if values is None:
        return np.zeros(size)
    vector = np.asarray(values, dtype=float)
    if vector.shape != (size,):
        raise ValueError(f"expected a vector of length {size}, got {len(values)}")
    return vector


def _matrix(values: Matrix | None, rows: int, cols: int, default_eye: bool = False) -> np.ndarray:
    if values is None:
        return np.eye(rows, cols) if default_eye else np.zeros((rows, cols))
    array = np.asarray(values, dtype=float)
    if array.shape != (rows, cols):
        raise ValueError(f"expected a {rows}x{cols} matrix, got shape {array.shape}")
    return as_matrix(array, rows, cols)


def _noise_map(value: NoiseSpec, dimension: int) -> NoiseMap:
    if value == "identity":
        return NoiseMap.identity(dimension)
    matrix = np.asarray(value, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != dimension:
        raise ValueError(f"noise matrix must have {dimension} rows")
    return NoiseMap.with_right_inverse(matrix)


def _build_nonlinearity(section, n: int, m: int):
    if isinstance(section, ZeroNonlinearitySection):
        return zero_nonlinearity, 0.0
    family = TanhNonlinearity(
        scale=section.scale,
        coupling_x=_matrix(section.coupling_x, m, n),
        coupling_q=_matrix(section.coupling_q, m, m, default_eye=True),
        offset=_vector(section.offset, m),
    )
    return family, family.lipschitz


def _build_terminal(section, n: int):
    if isinstance(section, LinearTerminalSection):
        return LinearTerminal(_vector(section.weights, n))
    return TanhTerminal(section.scale, _vector(section.weights, n))


def _build_driver(section, n: int, m: int, d1: int, d2: int):
    if isinstance(section, AffineDriverSection):
        return AffineDriver(
            constant=section.constant,
            weights_x=_vector(section.weights_x, n),
            weights_q=_vector(section.weights_q, m),
            weights_z=_vector(section.weights_z, d1),
            weights_xi=_vector(section.weights_xi, d2),
        )
    if isinstance(section, QuadraticZDriverSection):
        return QuadraticZDriver(section.constant, section.scale, section.z_radius)
    return TanhQDriver(
        constant=section.constant,
        scale=section.scale,
        weights_q=_vector(section.weights_q, m),
        weights_z=_vector(section.weights_z, d1),
    )


def _build_control(model_file: ModelFile, terminal, R: NoiseMap, d2: int):
    from core.driver import hamiltonian_constants

    n, m = model_file.slow_dim, model_file.fast_dim
    grid = np.asarray(model_file.control_grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    d_u = grid.shape[1]
    section = model_file.control
    drift = AffineTanhDrift(
        control_matrix=_matrix(section.b.control_matrix, n, d_u),
        scale=section.b.scale,
        coupling_x=_matrix(section.b.coupling_x, n, n, default_eye=True),
        coupling_q=_matrix(section.b.coupling_q, n, m),
    )
    cost = QuadraticTanhCost(
        control_weight=section.l.control_weight,
        scale=section.l.scale,
        weights_x=_vector(section.l.weights_x, n),
        weights_q=_vector(section.l.weights_q, m),
    )
    fast = LinearFastControl(_matrix(section.rho, d2, d_u))
    overrides = model_file.constants
    bound = max(
        drift.bound(grid), cost.bound(grid), fast.bound(grid), terminal.bound
    )
    lipschitz = max(drift.lipschitz, cost.lipschitz, terminal.lipschitz)
    control = ControlData(
        control_grid=grid,
        b=drift,
        rho=fast,
        l=cost,
        bound=bound if overrides.bound_M is None else overrides.bound_M,
        lipschitz=lipschitz if overrides.control_lipschitz is None else overrides.control_lipschitz,
    )
    derived = hamiltonian_constants(
        control, R, drift_bound=drift.bound(grid), fast_bound=fast.bound(grid)
    )
    return control, derived


def assemble_model(model_file: ModelFile) -> ModelSpec:
    """Build an unvalidated ModelSpec from a parsed model file."""
    n, m = model_file.slow_dim, model_file.fast_dim
    R = _noise_map(model_file.noise_R, n)
    G = _noise_map(model_file.noise_G, m)
    F, lipschitz_F = _build_nonlinearity(model_file.nonlinearity, n, m)
    terminal = _build_terminal(model_file.terminal, n)

    derived: dict[str, float] = {"lipschitz_F": lipschitz_F, "lipschitz_h": terminal.lipschitz}
    control = driver = None
    if model_file.control is not None:
        control, driver_constants = _build_control(model_file, terminal, R, G.noise_dim)
        derived.update(driver_constants)
        derived["bound_M"] = control.bound
    else:
        driver = _build_driver(model_file.driver, n, m, R.noise_dim, G.noise_dim)
        derived.update(driver.constants())
        if isinstance(driver, QuadraticZDriver):
            derived["probe_z_radius"] = driver.z_radius

    overrides = model_file.constants.model_dump(
        exclude_none=True, exclude={"control_lipschitz"}
    )
    constants = ModelConstants(**{**derived, **overrides})
    return ModelSpec(
        A=SpectralOperator(model_file.eigenvalues_A),
        B=SpectralOperator(model_file.eigenvalues_B),
        F=F,
        R=R,
        G=G,
        h=terminal,
        x0=_vector(model_file.initial_state.x0, n),
        q0=_vector(model_file.initial_state.q0, m),
        constants=constants,
        control=control,
        driver=driver,
        name=model_file.name,
    )


def build_model_with_report(
    raw: ModelFile | dict[str, Any],
    probes: int = 2000,
    seed: int | None = None,
) -> tuple[ModelSpec, ValidationReport]:
    """Parse, assemble and validate a model description; keep the validation report.

    The probe seed comes from ``seed`` when given, else from the file's
    ``seeds.probe`` entry, else 0.
    """
    model_file = raw if isinstance(raw, ModelFile) else ModelFile.model_validate(raw)
    probe_seed = seed if seed is not None else (model_file.seeds.probe or 0)
    return validate_model(assemble_model(model_file), probes=probes, seed=probe_seed)


def build_model(
    raw: ModelFile | dict[str, Any],
    probes: int = 2000,
    seed: int | None = None,
) -> ModelSpec:
    """Like `build_model_with_report`, logging the report instead of returning it."""
    spec, report = build_model_with_report(raw, probes=probes, seed=seed)
    logfire.info(
        "model {name}: {checks} hypothesis checks passed (probes={probes}, seed={seed})",
        name=report.model_name,
        checks=len(report.checks),
        probes=report.probes,
        seed=report.seed,
    )
    return spec


def read_model_file(path: Path) -> ModelFile:
    return ModelFile.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))


def load_model_file(path: Path, probes: int = 2000, seed: int | None = None) -> ModelSpec:
    return build_model(read_model_file(path), probes=probes, seed=seed)
