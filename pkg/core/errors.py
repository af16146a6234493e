"""Exception hierarchy shared by every solver stage.

Validation problems (a hypothesis that fails, a malformed model) map to CLI exit
code 2; numerical problems (rank-deficient regressions, exploding densities,
non-converging discount traces) map to exit code 3.
"""

from __future__ import annotations

from typing import Any


class TwoScaleError(RuntimeError):
    """Base class for domain errors raised by the lab."""

    exit_code = 1


class HypothesisViolation(TwoScaleError):
    """A standing hypothesis of the model failed its probe."""

    exit_code = 2

    def __init__(
        self,
        hypothesis: str,
        message: str,
        witness: dict[str, Any] | None = None,
    ) -> None:
        self.hypothesis = hypothesis
        self.witness = witness
        super().__init__(f"{hypothesis}: {message}")


class NumericalFailure(TwoScaleError):
    """A solver could not produce a trustworthy number."""

    exit_code = 3

    def __init__(
        self,
        message: str,
        stage: str | None = None,
        step: int | None = None,
    ) -> None:
        self.stage = stage
        self.step = step
        self.detail = message
        prefix = f"[{stage}] " if stage else ""
        suffix = f" (step {step})" if step is not None else ""
        super().__init__(f"{prefix}{message}{suffix}")

    def with_stage(self, stage: str) -> "NumericalFailure":
        """Return a copy labelled with the study stage that raised it."""
        return NumericalFailure(self.detail, stage=stage, step=self.step)
