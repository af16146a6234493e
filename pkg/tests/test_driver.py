import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from core.driver import (
    certify_driver_constants,
    hamiltonian_psi,
    log_hamiltonian_evaluations,
    resolve_driver,
)
from core.errors import HypothesisViolation
from core.model import ModelFile, assemble_model, load_model_file, read_model_file

DESK_MODEL = Path(__file__).resolve().parent.parent / "configs" / "desk_model.json"


class TestHamiltonianDriver(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = load_model_file(DESK_MODEL, probes=300)

    def test_minimum_over_the_control_grid(self):
        result = hamiltonian_psi(self.spec, [0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 0.0])

        # alpha = -0.5: 0.125 - 0.5; alpha = 0.5: 0.125 + 0.5
        self.assertAlmostEqual(result.value[0], -0.375)
        self.assertEqual(result.minimizer_index.tolist(), [0])
        self.assertEqual(result.minimizer.tolist(), [[-0.5]])
        self.assertAlmostEqual(result.gap[0], 1.0)

    def test_ties_go_to_the_lowest_index(self):
        result = hamiltonian_psi(self.spec, [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])

        self.assertEqual(result.minimizer_index.tolist(), [0])
        self.assertAlmostEqual(result.gap[0], 0.0)

    def test_fast_noise_enters_through_rho(self):
        zero = hamiltonian_psi(self.spec, [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0])
        shifted = hamiltonian_psi(self.spec, [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0])

        # rho(-0.5) = (-0.25, 0)
        self.assertAlmostEqual(shifted.value[0], zero.value[0] - 0.25)

    def test_driver_is_vectorised_over_paths(self):
        driver = resolve_driver(self.spec)
        rng = np.random.default_rng(0)
        x, q = rng.standard_normal((7, 2)), rng.standard_normal((7, 2))
        z, xi = rng.standard_normal((7, 2)), rng.standard_normal((7, 2))

        batch = driver(x, q, z, xi)
        single = [driver(x[i : i + 1], q[i : i + 1], z[i : i + 1], xi[i : i + 1])[0] for i in range(7)]

        self.assertEqual(batch.shape, (7,))
        np.testing.assert_allclose(batch, single)

    def test_certified_constants_hold_on_probes(self):
        estimate = certify_driver_constants(self.spec, probes=1000, seed=4)

        self.assertLessEqual(estimate.lipschitz_z, self.spec.constants.lipschitz_z * 1.01)
        self.assertLessEqual(estimate.lipschitz_xi, self.spec.constants.lipschitz_xi * 1.01)
        self.assertEqual(estimate.probes, 1000)

    def test_understated_constant_is_reported_with_a_witness(self):
        raw = read_model_file(DESK_MODEL).model_dump()
        raw["constants"]["lipschitz_z"] = 0.01
        spec = assemble_model(ModelFile.model_validate(raw))

        with self.assertRaises(HypothesisViolation) as caught:
            certify_driver_constants(spec, probes=1000)

        self.assertEqual(caught.exception.hypothesis, "B.3")
        self.assertEqual(caught.exception.witness["argument"], "z")

    def test_hamiltonian_log_has_one_row_per_probe(self):
        rng = np.random.default_rng(1)
        with tempfile.TemporaryDirectory() as temp_dir:
            path = log_hamiltonian_evaluations(
                self.spec,
                rng.standard_normal((5, 2)),
                rng.standard_normal((5, 2)),
                rng.standard_normal((5, 2)),
                np.zeros((5, 2)),
                Path(temp_dir) / "psi.csv",
            )
            frame = pd.read_csv(path)

        self.assertEqual(list(frame.columns), ["value", "minimizer_index", "gap", "alpha_0"])
        self.assertEqual(len(frame), 5)
        self.assertTrue(set(frame["alpha_0"]) <= {-0.5, 0.5})


if __name__ == "__main__":
    unittest.main()
