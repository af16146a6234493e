import json
import tempfile
import unittest
from pathlib import Path
from types import SimpleNamespace
from unittest.mock import patch

from rich.console import Console

from commands.subcommands import parse_grid
from config.settings import load_settings
from core.errors import HypothesisViolation, NumericalFailure
from main import _parse_args
from ui.cli import runner

DESK_MODEL = Path(__file__).resolve().parent.parent / "configs" / "desk_model.json"


class TestExitCodes(unittest.TestCase):
    def test_errors_map_to_exit_codes(self):
        self.assertEqual(runner.exit_code_for(NumericalFailure("nan", stage="bsde eps")), 3)
        self.assertEqual(runner.exit_code_for(HypothesisViolation("A.3", "no gap")), 2)
        self.assertEqual(runner.exit_code_for(ValueError("bad grid")), 2)
        self.assertEqual(runner.exit_code_for(OSError("disk full")), 1)


class TestParseGrid(unittest.TestCase):
    def test_range_form(self):
        self.assertEqual(parse_grid("-1:1:5"), [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_list_form(self):
        self.assertEqual(parse_grid("0.5, 1,2"), [0.5, 1.0, 2.0])

    def test_malformed_range(self):
        with self.assertRaisesRegex(ValueError, "start:stop:count"):
            parse_grid("0:1")


class TestRunCommand(unittest.TestCase):
    def setUp(self):
        self.temp_dir = tempfile.TemporaryDirectory()
        self.root = Path(self.temp_dir.name)
        self.settings = load_settings(
            {"TWOSCALE_HOME": str(self.root), "TWOSCALE_PROBE_COUNT": "200"}
        )
        self.console = Console(record=True, width=120)

    def tearDown(self):
        self.temp_dir.cleanup()

    def test_validate_writes_the_report(self):
        output = self.root / "validation.json"
        args = _parse_args(["validate", str(DESK_MODEL), "--output", str(output)])

        code = runner.run_command(args, self.settings, self.console)

        self.assertEqual(code, runner.EXIT_OK)
        report = json.loads(output.read_text(encoding="utf-8"))
        self.assertEqual(report["probes"], 200)
        self.assertAlmostEqual(report["mu"], 1.5)
        self.assertIn("A.3", self.console.export_text())

    def test_hypothesis_violation_exits_with_two(self):
        raw = json.loads(DESK_MODEL.read_text(encoding="utf-8"))
        raw["nonlinearity"]["scale"] = 2.5
        model = self.root / "steep.json"
        model.write_text(json.dumps(raw), encoding="utf-8")

        code = runner.run_command(_parse_args(["validate", str(model)]), self.settings, self.console)

        self.assertEqual(code, runner.EXIT_VALIDATION)
        self.assertIn("exit 2", self.console.export_text())

    def test_numerical_failure_exits_with_three(self):
        def failing(args, settings, formatter):
            raise NumericalFailure("non-finite Y", stage="bsde eps", step=4)

        args = SimpleNamespace(command="solve-eps")
        with patch.dict(runner.HANDLERS, {"solve-eps": failing}):
            code = runner.run_command(args, self.settings, self.console)

        self.assertEqual(code, runner.EXIT_NUMERICAL)
        self.assertIn("[bsde eps] non-finite Y (step 4)", self.console.export_text())

    def test_missing_model_file_exits_with_one(self):
        args = _parse_args(["validate", str(self.root / "missing.json")])

        code = runner.run_command(args, self.settings, self.console)

        self.assertEqual(code, 1)


if __name__ == "__main__":
    unittest.main()
