from __future__ import annotations

import json
from pathlib import Path

import pandas as pd

from .report import ConvergenceReport


class RunStore:
    """Persist study artifacts under ``<output_dir>/<config-hash>/``.

    Every file name carries the config hash; wall-clock timings are kept apart
    from the deterministic artifacts.
    """

    def __init__(self, output_dir: Path, config_hash: str):
        self.output_dir = Path(output_dir)
        self.config_hash = config_hash
        self._run_dir = self.output_dir / config_hash
        self.report_path = self._run_dir / f"report-{config_hash}.json"
        self.rows_path = self._run_dir / f"rows-{config_hash}.csv"
        self.lambda_path = self._run_dir / f"lambda-{config_hash}.csv"
        self.timings_path = self._run_dir / "timings.json"

    @property
    def run_dir(self) -> Path:
        self._run_dir.mkdir(parents=True, exist_ok=True)
        return self._run_dir

    def plot_path(self, kind: str) -> Path:
        return self.run_dir / f"{kind}-{self.config_hash}.png"

    def save_report(self, report: ConvergenceReport) -> Path:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        return report.save(self.report_path)

    def load_report(self) -> ConvergenceReport | None:
        if not self.report_path.exists():
            return None
        return ConvergenceReport.load(self.report_path)

    def save_rows(self, report: ConvergenceReport) -> Path:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(
            [row.model_dump() for row in report.rows],
            columns=["eps", "y0", "ci", "error", "joint_ci", "status", "message"],
        )
        frame.to_csv(self.rows_path, index=False, float_format="%.12g")
        return self.rows_path

    def save_timings(self, timings: dict[str, float]) -> Path:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.timings_path.write_text(
            json.dumps(timings, indent=2, sort_keys=True), encoding="utf-8"
        )
        return self.timings_path
