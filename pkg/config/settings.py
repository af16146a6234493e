from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

LambdaMethod = Literal["time_average", "ergodic_bsde"]


@dataclass(frozen=True)
class ObservabilitySettings:
    backend: str | None
    service_name: str


@dataclass(frozen=True)
class ProbeSettings:
    count: int
    seed: int


@dataclass(frozen=True)
class BudgetSettings:
    default_paths: int
    lambda_method: LambdaMethod


@dataclass(frozen=True)
class Settings:
    observability: ObservabilitySettings
    probes: ProbeSettings
    budgets: BudgetSettings
    twoscale_home: Path
    output_dir: Path
    workers: int


def load_settings(env: dict[str, str] | None = None) -> Settings:
    """Build project settings from process environment."""
    values = env if env is not None else os.environ
    base_path = Path(__file__).resolve().parent.parent

    twoscale_home = _resolve_path(values.get("TWOSCALE_HOME", "~/.twoscale"), base_path)

    return Settings(
        observability=ObservabilitySettings(
            backend=values.get("OBS_BACKEND"),
            service_name=values.get("OBS_SERVICE_NAME", "twoscale-lab"),
        ),
        probes=ProbeSettings(
            count=_load_int_at_least(values, "TWOSCALE_PROBE_COUNT", 2000, minimum=100),
            seed=int(values.get("TWOSCALE_PROBE_SEED", "20240101")),
        ),
        budgets=BudgetSettings(
            default_paths=_load_positive_int(values, "TWOSCALE_DEFAULT_PATHS", 10_000),
            lambda_method=_load_lambda_method(values),
        ),
        twoscale_home=twoscale_home,
        output_dir=_resolve_path(values["TWOSCALE_OUTPUT_DIR"], base_path)
        if values.get("TWOSCALE_OUTPUT_DIR")
        else twoscale_home / "runs",
        workers=_load_positive_int(values, "TWOSCALE_WORKERS", 1),
    )


def _resolve_path(raw_path: str, base_path: Path) -> Path:
    candidate = Path(raw_path).expanduser()
    if candidate.is_absolute():
        return candidate
    return (base_path / candidate).resolve()


def _load_lambda_method(values: dict[str, str]) -> LambdaMethod:
    value = values.get("TWOSCALE_LAMBDA_METHOD", "time_average")
    if value not in {"time_average", "ergodic_bsde"}:
        raise ValueError(
            "TWOSCALE_LAMBDA_METHOD must be 'time_average' or 'ergodic_bsde'"
        )
    return value  # type: ignore[return-value]


def _load_positive_int(values: dict[str, str], key: str, default: int) -> int:
    return _load_int_at_least(values, key, default, minimum=1)


def _load_int_at_least(
    values: dict[str, str], key: str, default: int, minimum: int
) -> int:
    value = int(values.get(key, str(default)))
    if value < minimum:
        raise ValueError(f"{key} must be an integer >= {minimum}")
    return value
