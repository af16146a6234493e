from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager
from typing import Any

import logfire

from config.settings import Settings


def observability_enabled(settings: Settings) -> bool:
    """Return whether a telemetry backend was explicitly selected."""
    return bool((settings.observability.backend or "").strip())


def configure_observability(settings: Settings) -> None:
    """Configure logfire from ``OBS_BACKEND``.

    Without a backend, logfire is still configured so spans and structured logs
    are recorded in-process, but nothing is exported and the console stays quiet.
    """
    raw_backend = settings.observability.backend
    service_name = settings.observability.service_name
    if raw_backend is None or not raw_backend.strip():
        logfire.configure(
            service_name=service_name,
            send_to_logfire=False,
            console=False,
        )
        return

    backend = raw_backend.strip().lower()

    if backend == "console":
        logfire.configure(service_name=service_name, send_to_logfire=False)
    elif backend == "logfire":
        logfire.configure(service_name=service_name)
    else:
        raise ValueError(f"Unsupported OBS_BACKEND: {raw_backend}")


@contextmanager
def stage_span(stage: str, **attributes: Any) -> Iterator[Any]:
    """Open a logfire span for one study stage and tag failures with its name."""
    with logfire.span("stage {stage}", stage=stage, **attributes) as span:
        try:
            yield span
        except Exception as exc:
            logfire.warn("stage {stage} failed: {error}", stage=stage, error=str(exc))
            raise
