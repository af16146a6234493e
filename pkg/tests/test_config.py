import unittest
from pathlib import Path

from config.settings import load_settings


class TestConfig(unittest.TestCase):
    def test_load_settings_defaults(self):
        settings = load_settings({})

        self.assertIsNone(settings.observability.backend)
        self.assertEqual(settings.observability.service_name, "twoscale-lab")
        self.assertEqual(settings.probes.count, 2000)
        self.assertEqual(settings.probes.seed, 20240101)
        self.assertEqual(settings.budgets.default_paths, 10_000)
        self.assertEqual(settings.budgets.lambda_method, "time_average")
        self.assertEqual(settings.workers, 1)
        self.assertEqual(settings.twoscale_home, Path.home() / ".twoscale")
        self.assertEqual(settings.output_dir, Path.home() / ".twoscale" / "runs")

    def test_load_settings_accepts_overrides(self):
        settings = load_settings(
            {
                "OBS_BACKEND": "console",
                "OBS_SERVICE_NAME": "desk",
                "TWOSCALE_PROBE_COUNT": "500",
                "TWOSCALE_PROBE_SEED": "7",
                "TWOSCALE_DEFAULT_PATHS": "2048",
                "TWOSCALE_LAMBDA_METHOD": "ergodic_bsde",
                "TWOSCALE_WORKERS": "4",
            }
        )

        self.assertEqual(settings.observability.backend, "console")
        self.assertEqual(settings.observability.service_name, "desk")
        self.assertEqual(settings.probes.count, 500)
        self.assertEqual(settings.probes.seed, 7)
        self.assertEqual(settings.budgets.default_paths, 2048)
        self.assertEqual(settings.budgets.lambda_method, "ergodic_bsde")
        self.assertEqual(settings.workers, 4)

    def test_load_settings_accepts_home_and_output_overrides(self):
        settings = load_settings(
            {
                "TWOSCALE_HOME": "/tmp/twoscale-home",
                "TWOSCALE_OUTPUT_DIR": "/tmp/twoscale-runs",
            }
        )

        self.assertEqual(settings.twoscale_home, Path("/tmp/twoscale-home"))
        self.assertEqual(settings.output_dir, Path("/tmp/twoscale-runs"))

    def test_output_dir_follows_home(self):
        settings = load_settings({"TWOSCALE_HOME": "/tmp/twoscale-home"})

        self.assertEqual(settings.output_dir, Path("/tmp/twoscale-home/runs"))

    def test_relative_paths_resolve_against_project_root(self):
        settings = load_settings({"TWOSCALE_OUTPUT_DIR": "./runs"})
        project_root = Path(__file__).resolve().parent.parent

        self.assertEqual(settings.output_dir, (project_root / "runs").resolve())

    def test_load_settings_rejects_unknown_lambda_method(self):
        with self.assertRaisesRegex(ValueError, "TWOSCALE_LAMBDA_METHOD"):
            load_settings({"TWOSCALE_LAMBDA_METHOD": "guess"})

    def test_load_settings_rejects_small_probe_count(self):
        with self.assertRaisesRegex(ValueError, "TWOSCALE_PROBE_COUNT"):
            load_settings({"TWOSCALE_PROBE_COUNT": "50"})

    def test_load_settings_rejects_non_positive_workers(self):
        with self.assertRaisesRegex(ValueError, "TWOSCALE_WORKERS"):
            load_settings({"TWOSCALE_WORKERS": "0"})

    def test_load_settings_rejects_non_integer_paths(self):
        with self.assertRaises(ValueError):
            load_settings({"TWOSCALE_DEFAULT_PATHS": "many"})


if __name__ == "__main__":
    unittest.main()
