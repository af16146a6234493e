import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

from main import _load_twoscale_env, _parse_args, main


class TestMain(unittest.TestCase):
    def test_parse_args_validate(self):
        args = _parse_args(["validate", "model.json", "--probes", "500", "--seed", "3"])

        self.assertEqual(args.command, "validate")
        self.assertEqual(args.model, Path("model.json"))
        self.assertEqual(args.probes, 500)
        self.assertEqual(args.seed, 3)

    def test_parse_args_solve_eps_requires_eps(self):
        with patch("sys.stderr"), self.assertRaises(SystemExit):
            _parse_args(["solve-eps", "model.json"])

    def test_parse_args_converge_overrides(self):
        args = _parse_args(
            ["converge", "study.json", "--eps", "0.2", "0.1", "--n-paths", "400", "--workers", "2"]
        )

        self.assertEqual(args.eps, [0.2, 0.1])
        self.assertEqual(args.n_paths, 400)
        self.assertEqual(args.workers, 2)

    def test_parse_args_lambda_method_choices(self):
        args = _parse_args(["lambda", "model.json", "--method", "ergodic_bsde", "--x-grid", "-1:1:3"])

        self.assertEqual(args.method, "ergodic_bsde")
        self.assertEqual(args.x_grid, "-1:1:3")

    def test_parse_args_accepts_twoscale_home(self):
        args = _parse_args(["--twoscale-home", "/tmp/twoscale-home", "plots", "report.json"])

        self.assertEqual(args.twoscale_home, "/tmp/twoscale-home")
        self.assertEqual(args.report, Path("report.json"))

    def test_load_twoscale_env_reads_env_from_selected_home(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            twoscale_home = Path(temp_dir)
            (twoscale_home / ".env").write_text(
                "TWOSCALE_PROBE_COUNT=300\nTWOSCALE_HOME=/ignored-home\n",
                encoding="utf-8",
            )

            with patch.dict(os.environ, {}, clear=True):
                loaded_home = _load_twoscale_env(str(twoscale_home))

                self.assertEqual(loaded_home, twoscale_home.resolve())
                self.assertEqual(os.environ["TWOSCALE_PROBE_COUNT"], "300")
                self.assertEqual(os.environ["TWOSCALE_HOME"], str(twoscale_home.resolve()))

    def test_main_reports_bad_settings(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            with patch.dict(os.environ, {"TWOSCALE_PROBE_COUNT": "10"}, clear=True), patch("sys.stderr"):
                code = main(["--twoscale-home", temp_dir, "validate", "model.json"])

        self.assertEqual(code, 2)


if __name__ == "__main__":
    unittest.main()
