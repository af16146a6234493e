import unittest

import numpy as np

from core.errors import HypothesisViolation
from core.model import ReactionDiffusionParams, galerkin_truncate


class TestGalerkinTruncation(unittest.TestCase):
    def test_truncation_builds_a_validated_model(self):
        spec = galerkin_truncate(ReactionDiffusionParams(), 2, probes=300)

        np.testing.assert_allclose(spec.A.eigenvalues, [-np.pi**2, -4 * np.pi**2])
        np.testing.assert_allclose(spec.B.eigenvalues, [-np.pi**2 - 1.0, -4 * np.pi**2 - 1.0])
        self.assertEqual(spec.name, "reaction-diffusion-2")
        self.assertEqual(spec.control.size, 5)
        self.assertAlmostEqual(spec.mu, np.pi**2 + 1.0 - 0.4)

    def test_refinement_keeps_leading_coefficients(self):
        coarse = galerkin_truncate(ReactionDiffusionParams(sigma_wave=0.3), 2, probes=200)
        fine = galerkin_truncate(ReactionDiffusionParams(sigma_wave=0.3), 3, probes=200)

        np.testing.assert_allclose(coarse.R.matrix, fine.R.matrix[:2, :2], atol=1e-12)
        np.testing.assert_allclose(coarse.x0, fine.x0[:2], atol=1e-12)
        x = np.array([[0.3, -0.1]])
        padded = np.array([[0.3, -0.1, 0.0]])
        np.testing.assert_allclose(coarse.h(x), fine.h(padded), atol=1e-12)

    def test_terminal_cost_integrates_the_field(self):
        spec = galerkin_truncate(ReactionDiffusionParams(), 1, probes=200)

        # u = sqrt(2) c sin(pi s) with tiny c gives int tanh(u) ~ c * 2 sqrt(2) / pi
        c = 1e-4
        value = spec.h(np.array([[c]]))[0]

        self.assertAlmostEqual(value, c * 2.0 * np.sqrt(2.0) / np.pi, places=9)

    def test_reaction_term_must_stay_below_the_spectral_gap(self):
        with self.assertRaisesRegex(ValueError, "Lipschitz"):
            galerkin_truncate(ReactionDiffusionParams(f_scale=1.2), 2)

    def test_degenerate_noise_is_rejected(self):
        with self.assertRaises(HypothesisViolation) as caught:
            galerkin_truncate(ReactionDiffusionParams(sigma_level=0.05), 2)

        self.assertEqual(caught.exception.hypothesis, "A.4")
        self.assertIn("node", caught.exception.witness)

    def test_mode_count_must_be_positive(self):
        with self.assertRaisesRegex(ValueError, "n_modes"):
            galerkin_truncate(ReactionDiffusionParams(), 0)


if __name__ == "__main__":
    unittest.main()
