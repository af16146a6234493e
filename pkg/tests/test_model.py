import json
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
from pydantic import ValidationError

from core.errors import HypothesisViolation
from core.model import (
    ModelFile,
    assemble_model,
    build_model,
    build_model_with_report,
    load_model_file,
    read_model_file,
    validate_model,
)

DESK_MODEL = Path(__file__).resolve().parent.parent / "configs" / "desk_model.json"


def desk_raw() -> dict:
    return json.loads(DESK_MODEL.read_text(encoding="utf-8"))


class TestModelFiles(unittest.TestCase):
    def test_desk_model_file_validates(self):
        spec = load_model_file(DESK_MODEL, probes=500)

        self.assertTrue(spec.validated)
        self.assertEqual(spec.name, "desk")
        self.assertEqual(spec.slow_dim, 2)
        self.assertEqual(spec.fast_dim, 2)
        self.assertEqual(spec.control.size, 2)
        # m_B = 2 and L_F = 0.5
        self.assertAlmostEqual(spec.mu, 1.5)

    def test_validation_report_lists_every_hypothesis(self):
        spec = assemble_model(read_model_file(DESK_MODEL))

        validated, report = validate_model(spec, probes=500, seed=3)

        self.assertTrue(report.passed)
        self.assertEqual(report.failed(), [])
        self.assertEqual(report.mu, validated.mu)
        self.assertEqual(
            [check.hypothesis for check in report.checks],
            ["A.1", "A.5", "A.4", "A.2", "A.3", "B.4", "B.3", "C.1"],
        )

    def test_validation_is_reproducible_for_a_seed(self):
        spec = assemble_model(read_model_file(DESK_MODEL))

        _, first = validate_model(spec, probes=300, seed=11)
        _, second = validate_model(spec, probes=300, seed=11)

        self.assertEqual(first.model_dump(), second.model_dump())

    def test_derived_constants_follow_the_families(self):
        spec = assemble_model(read_model_file(DESK_MODEL))

        self.assertAlmostEqual(spec.constants.lipschitz_F, 0.5)
        self.assertAlmostEqual(spec.constants.lipschitz_h, 1.0)
        self.assertAlmostEqual(spec.constants.lambda_lipschitz_x, 2.0)
        self.assertGreater(spec.constants.lipschitz_xi, 0.0)
        self.assertFalse(spec.xi_free)

    def test_probe_budget_has_a_floor(self):
        spec = assemble_model(read_model_file(DESK_MODEL))

        with self.assertRaisesRegex(ValueError, "probe budget"):
            validate_model(spec, probes=10)

    def test_builder_hands_back_the_validation_report(self):
        spec, report = build_model_with_report(desk_raw(), probes=300)

        self.assertTrue(report.passed)
        self.assertEqual(report.model_name, "desk")
        self.assertEqual(report.seed, 20240101)
        self.assertAlmostEqual(report.mu, spec.mu)

    def test_plain_builder_logs_the_validation_report(self):
        with patch("core.model.loader.logfire") as mock_logfire:
            build_model(desk_raw(), probes=300)

        mock_logfire.info.assert_called_once()
        self.assertEqual(mock_logfire.info.call_args.kwargs["name"], "desk")


class TestModelRejections(unittest.TestCase):
    def test_lipschitz_above_dissipativity_is_rejected(self):
        raw = desk_raw()
        raw["nonlinearity"]["scale"] = 2.5

        with self.assertRaises(HypothesisViolation) as caught:
            build_model(raw, probes=300)

        self.assertEqual(caught.exception.hypothesis, "A.3")
        self.assertIn("dissipativity margin", str(caught.exception))
        witness = caught.exception.witness
        self.assertIsNotNone(witness)
        self.assertGreaterEqual(witness["inner_product_ratio"], 0.0)
        self.assertEqual(len(witness["q"]), 2)

    def test_non_dissipative_fast_operator_is_rejected(self):
        raw = desk_raw()
        raw["eigenvalues_B"] = [0.5, -2.0]

        with self.assertRaises(HypothesisViolation) as caught:
            build_model(raw, probes=300)

        self.assertEqual(caught.exception.hypothesis, "A.5")

    def test_understated_lipschitz_constant_is_rejected(self):
        raw = desk_raw()
        raw["constants"]["lipschitz_F"] = 0.1

        with self.assertRaises(HypothesisViolation) as caught:
            build_model(raw, probes=300)

        self.assertEqual(caught.exception.hypothesis, "A.2")

    def test_slow_noise_without_right_inverse_is_rejected(self):
        raw = desk_raw()
        raw["noise_R"] = [[1.0], [0.0]]
        raw["control"]["b"]["control_matrix"] = [[1.0], [0.0]]

        with self.assertRaises(HypothesisViolation) as caught:
            build_model(raw, probes=300)

        self.assertEqual(caught.exception.hypothesis, "A.4")

    def test_model_needs_exactly_one_driver_source(self):
        raw = desk_raw()
        raw["driver"] = {"kind": "affine", "constant": 1.0}

        with self.assertRaises(ValidationError):
            ModelFile.model_validate(raw)

    def test_control_requires_a_grid(self):
        raw = desk_raw()
        del raw["control_grid"]

        with self.assertRaisesRegex(ValueError, "control_grid"):
            ModelFile.model_validate(raw)

    def test_unknown_fields_are_rejected(self):
        raw = desk_raw()
        raw["eigenvalues_C"] = [-1.0]

        with self.assertRaises(ValidationError):
            ModelFile.model_validate(raw)

    def test_vector_length_mismatch_is_rejected(self):
        raw = desk_raw()
        raw["terminal"]["weights"] = [1.0, 0.0, 0.0]

        with self.assertRaisesRegex(ValueError, "length 2"):
            assemble_model(ModelFile.model_validate(raw))


class TestDirectDrivers(unittest.TestCase):
    def test_quadratic_driver_reports_constants_on_its_ball(self):
        spec = build_model(
            {
                "eigenvalues_A": [-1.0],
                "eigenvalues_B": [-2.0],
                "terminal": {"kind": "linear", "weights": [1.0]},
                "driver": {"kind": "quadratic_z", "constant": 0.5, "scale": 2.0, "z_radius": 3.0},
            },
            probes=200,
        )

        self.assertAlmostEqual(spec.constants.lipschitz_z, 6.0)
        self.assertAlmostEqual(spec.constants.probe_z_radius, 3.0)
        self.assertTrue(spec.xi_free)
        self.assertAlmostEqual(spec.mu, 2.0)
        values = spec.driver(np.zeros((2, 1)), np.zeros((2, 1)), np.array([[0.0], [1.0]]), np.zeros((2, 1)))
        np.testing.assert_allclose(values, [0.5, -0.5])

    def test_model_file_reads_from_disk(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "model.json"
            path.write_text(
                json.dumps(
                    {
                        "name": "affine",
                        "eigenvalues_A": [-1.0],
                        "eigenvalues_B": [-3.0],
                        "terminal": {"kind": "linear", "weights": [2.0]},
                        "driver": {"kind": "affine", "constant": 0.25, "weights_z": [0.5]},
                        "initial_state": {"x0": [1.0]},
                    }
                ),
                encoding="utf-8",
            )

            spec = load_model_file(path, probes=200, seed=5)

        self.assertEqual(spec.name, "affine")
        self.assertEqual(spec.x0.tolist(), [1.0])
        self.assertAlmostEqual(spec.constants.lipschitz_z, 0.5)
        self.assertAlmostEqual(spec.constants.lipschitz_h, 2.0)


if __name__ == "__main__":
    unittest.main()
