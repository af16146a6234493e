"""Randomised probes for the standing hypotheses.

Every check is a probe over random states; counts and seeds come from the
caller so a validation run is reproducible. A failed check raises
:class:`~core.errors.HypothesisViolation` labelled with the hypothesis name.
"""

from __future__ import annotations

from dataclasses import replace

import logfire
import numpy as np
from pydantic import BaseModel, Field

from core.errors import HypothesisViolation

from .spec import ModelSpec

LIPSCHITZ_SLACK = 1e-6
PROBE_SCALES = (0.01, 0.1, 1.0, 10.0)
MIN_PROBES = 100


class HypothesisCheck(BaseModel):
    hypothesis: str
    passed: bool
    statistic: float | None = None
    threshold: float | None = None
    detail: str = ""


class ValidationReport(BaseModel):
    model_name: str
    probes: int
    seed: int
    mu: float | None = None
    checks: list[HypothesisCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed(self) -> list[HypothesisCheck]:
        return [check for check in self.checks if not check.passed]


def _scaled_normals(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Gaussian probes whose scale cycles through PROBE_SCALES."""
    scales = np.resize(np.asarray(PROBE_SCALES), count)[:, None]
    return scales * rng.standard_normal((count, dim))


def _finite_or_inf(value: float) -> float | None:
    return float(value) if np.isfinite(value) else None


class _Validator:
    def __init__(self, spec: ModelSpec, probes: int, seed: int) -> None:
        self.spec = spec
        self.probes = probes
        self.rng = np.random.default_rng(seed)
        self.report = ValidationReport(model_name=spec.name, probes=probes, seed=seed)

    def record(
        self,
        hypothesis: str,
        passed: bool,
        statistic: float | None = None,
        threshold: float | None = None,
        detail: str = "",
    ) -> None:
        self.report.checks.append(
            HypothesisCheck(
                hypothesis=hypothesis,
                passed=passed,
                statistic=None if statistic is None else _finite_or_inf(statistic),
                threshold=None if threshold is None else _finite_or_inf(threshold),
                detail=detail,
            )
        )
        if not passed:
            logfire.warn("hypothesis {hypothesis} failed: {detail}", hypothesis=hypothesis, detail=detail)

    def fail(self, hypothesis: str, message: str, witness: dict | None = None) -> None:
        self.record(hypothesis, False, detail=message)
        raise HypothesisViolation(hypothesis, message, witness=witness)

    def slow(self, count: int | None = None) -> np.ndarray:
        return _scaled_normals(self.rng, count or self.probes, self.spec.slow_dim)

    def fast(self, count: int | None = None) -> np.ndarray:
        return _scaled_normals(self.rng, count or self.probes, self.spec.fast_dim)

    def check_operators(self) -> None:
        spec = self.spec
        if not (spec.A.finite and spec.B.finite):
            self.fail("A.1", "operator eigenvalues must be finite")
        self.record("A.1", True, detail="finite diagonal generators")

        margin_B = spec.B.dissipativity
        if margin_B <= 0:
            self.fail("A.5", f"B is not strongly dissipative (top eigenvalue {-margin_B:g})")
        self.record("A.5", True, statistic=margin_B, detail="strong dissipativity of B")

        if not spec.R.has_right_inverse():
            self.fail(
                "A.4",
                f"R not right-invertible (|R R^-1 - I| = {spec.R.right_inverse_error():.3e})",
            )
        self.record(
            "A.4",
            True,
            statistic=spec.R.right_inverse_error(),
            threshold=spec.R.right_inverse_tolerance(),
            detail="R admits a bounded right inverse",
        )

    def check_nonlinearity(self) -> None:
        spec = self.spec
        lipschitz_F = spec.constants.lipschitz_F
        x, q = self.slow(), self.fast()
        values = spec.F(x, q)
        sup_F = float(np.max(np.linalg.norm(values, axis=1)))
        if not np.isfinite(sup_F):
            self.fail("A.2", "F is not bounded on probes")

        dx = self.slow() * self.rng.uniform(0.0, 1.0, (self.probes, 1))
        dq = self.fast()
        gaps = np.linalg.norm(spec.F(x + dx, q + dq) - values, axis=1)
        distances = np.linalg.norm(dx, axis=1) + np.linalg.norm(dq, axis=1)
        ratio = float(np.max(gaps / np.maximum(distances, 1e-300)))
        if ratio > lipschitz_F * (1.0 + LIPSCHITZ_SLACK) + 1e-12:
            self.fail(
                "A.2",
                f"F Lipschitz estimate {ratio:.6g} exceeds L_F = {lipschitz_F:g}",
            )
        self.record("A.2", True, statistic=ratio, threshold=lipschitz_F, detail=f"sup|F| = {sup_F:.4g}")

    def dissipativity_ratios(
        self, x: np.ndarray, q: np.ndarray, q_prime: np.ndarray
    ) -> np.ndarray:
        spec = self.spec
        d = q - q_prime
        drift = spec.B.apply(q) + spec.F(x, q) - spec.B.apply(q_prime) - spec.F(x, q_prime)
        return np.sum(drift * d, axis=1) / np.maximum(np.sum(d * d, axis=1), 1e-300)

    def search_dissipativity_witness(self) -> dict | None:
        """Brute-force search for a pair with <B d + dF, d> >= 0."""
        best_ratio = -np.inf
        best: dict | None = None
        for scale in PROBE_SCALES:
            x = self.slow()
            q = scale * self.rng.standard_normal((self.probes, self.spec.fast_dim))
            q_prime = q + scale * self.rng.standard_normal((self.probes, self.spec.fast_dim))
            ratios = self.dissipativity_ratios(x, q, q_prime)
            index = int(np.argmax(ratios))
            if ratios[index] > best_ratio:
                best_ratio = float(ratios[index])
                best = {
                    "x": x[index].tolist(),
                    "q": q[index].tolist(),
                    "q_prime": q_prime[index].tolist(),
                    "inner_product_ratio": best_ratio,
                }
        if best is not None and best_ratio >= 0.0:
            return best
        return None

    def check_dissipativity(self) -> float:
        spec = self.spec
        mu = spec.B.dissipativity - spec.constants.lipschitz_F
        if mu <= 0:
            witness = self.search_dissipativity_witness()
            self.fail(
                "A.3",
                f"dissipativity margin <= 0 (m_B = {spec.B.dissipativity:g}, "
                f"L_F = {spec.constants.lipschitz_F:g})",
                witness=witness,
            )
        x, q = self.slow(), self.fast()
        q_prime = q + self.fast()
        worst = float(np.max(self.dissipativity_ratios(x, q, q_prime)))
        if worst > -mu * (1.0 - LIPSCHITZ_SLACK):
            self.fail(
                "A.3",
                f"probe ratio {worst:.6g} exceeds -mu = {-mu:.6g}",
            )
        self.record("A.3", True, statistic=worst, threshold=-mu, detail=f"mu = {mu:.6g}")
        return mu

    def check_terminal(self) -> None:
        spec = self.spec
        lipschitz_h = spec.constants.lipschitz_h
        x = self.slow()
        dx = self.slow()
        gaps = np.abs(spec.h(x + dx) - spec.h(x))
        ratio = float(np.max(gaps / np.maximum(np.linalg.norm(dx, axis=1), 1e-300)))
        if ratio > lipschitz_h * (1.0 + LIPSCHITZ_SLACK) + 1e-12:
            self.fail("B.4", f"h Lipschitz estimate {ratio:.6g} exceeds L = {lipschitz_h:g}")
        self.record("B.4", True, statistic=ratio, threshold=lipschitz_h)

    def check_driver_at_zero(self) -> None:
        from core.driver import resolve_driver

        spec = self.spec
        driver = resolve_driver(spec)
        x, q = self.slow(), self.fast()
        z = np.zeros((self.probes, spec.slow_noise_dim))
        xi = np.zeros((self.probes, spec.fast_noise_dim))
        sup_psi = float(np.max(np.abs(driver(x, q, z, xi))))
        if not np.isfinite(sup_psi):
            self.fail("B.3", "sup |psi(x, q, 0, 0)| is not finite on probes")
        self.record("B.3", True, statistic=sup_psi, detail="sup |psi(x,q,0,0)| on probes")

    def check_control(self) -> None:
        control = self.spec.control
        if control is None:
            return
        spec = self.spec
        M, L = control.bound, control.lipschitz
        x, q = self.slow(), self.fast()
        dx, dq = self.slow(), self.fast()
        distances = np.maximum(np.linalg.norm(dx, axis=1) + np.linalg.norm(dq, axis=1), 1e-300)
        sup_value = float(np.max(np.abs(spec.h(x))))
        worst_ratio = 0.0
        for alpha in control.control_grid:
            b_here = control.b(x, q, alpha)
            l_here = control.l(x, q, alpha)
            sup_value = max(
                sup_value,
                float(np.max(np.linalg.norm(b_here, axis=1))),
                float(np.max(np.abs(l_here))),
                float(np.linalg.norm(np.atleast_1d(control.rho(alpha)))),
            )
            b_ratio = np.linalg.norm(control.b(x + dx, q + dq, alpha) - b_here, axis=1) / distances
            l_ratio = np.abs(control.l(x + dx, q + dq, alpha) - l_here) / distances
            worst_ratio = max(worst_ratio, float(np.max(b_ratio)), float(np.max(l_ratio)))
        h_ratio = np.abs(spec.h(x + dx) - spec.h(x)) / np.maximum(np.linalg.norm(dx, axis=1), 1e-300)
        worst_ratio = max(worst_ratio, float(np.max(h_ratio)))
        if sup_value > M * (1.0 + 1e-9):
            self.fail("C.1", f"bound exceeded: sup = {sup_value:.6g} > M = {M:g}")
        if worst_ratio > L * (1.0 + LIPSCHITZ_SLACK) + 1e-12:
            self.fail("C.1", f"Lipschitz estimate {worst_ratio:.6g} exceeds L = {L:g}")
        self.record("C.1", True, statistic=worst_ratio, threshold=L, detail=f"sup = {sup_value:.4g} <= M = {M:g}")


def validate_model(
    spec: ModelSpec, probes: int = 2000, seed: int = 0
) -> tuple[ModelSpec, ValidationReport]:
    """Probe every standing hypothesis and return the model with mu recorded."""
    if probes < MIN_PROBES:
        raise ValueError(f"probe budget must be >= {MIN_PROBES}")
    with logfire.span("validate_model {name}", name=spec.name, probes=probes, seed=seed):
        validator = _Validator(spec, probes, seed)
        validator.check_operators()
        validator.check_nonlinearity()
        mu = validator.check_dissipativity()
        validator.check_terminal()
        validator.check_driver_at_zero()
        validator.check_control()
        validator.report.mu = mu
        logfire.info("model {name} accepted with mu = {mu}", name=spec.name, mu=mu)
        return replace(spec, mu=mu), validator.report
