import unittest

import numpy as np

from core.errors import NumericalFailure
from core.regression import fit_regression


class TestRegression(unittest.TestCase):
    def test_constant_states_reduce_to_the_mean(self):
        states = np.ones((50, 2))
        targets = np.arange(50, dtype=float)

        fit = fit_regression(states, targets, degree=2)

        self.assertEqual(fit.description, "constant")
        np.testing.assert_allclose(fit.predict(states), np.full(50, 24.5))

    def test_quadratic_target_is_recovered(self):
        x = np.random.default_rng(0).standard_normal((400, 1))
        targets = 1.0 + 2.0 * x[:, 0] + 3.0 * x[:, 0] ** 2

        fit = fit_regression(x, targets, degree=2)

        np.testing.assert_allclose(fit.predict(x), targets, atol=1e-6)
        self.assertEqual(fit.n_features, 3)

    def test_fitted_values_keep_the_sample_mean(self):
        rng = np.random.default_rng(1)
        states = rng.standard_normal((300, 2))
        targets = np.sin(states[:, 0]) + rng.standard_normal(300)

        fit = fit_regression(states, targets, degree=2)

        self.assertAlmostEqual(float(np.mean(fit.predict(states))), float(np.mean(targets)), places=10)

    def test_vector_targets_are_fitted_column_wise(self):
        x = np.random.default_rng(2).standard_normal((200, 1))
        targets = np.stack([x[:, 0], -x[:, 0]], axis=1)

        fit = fit_regression(x, targets, degree=1)

        self.assertEqual(fit.predict(x).shape, (200, 2))
        np.testing.assert_allclose(fit.predict(x), targets, atol=1e-8)

    def test_dropped_constant_column(self):
        rng = np.random.default_rng(3)
        states = np.stack([rng.standard_normal(100), np.full(100, 0.5)], axis=1)

        fit = fit_regression(states, states[:, 0], degree=2)

        self.assertEqual(fit.kept.tolist(), [True, False])
        self.assertEqual(fit.n_features, 3)

    def test_rank_deficient_design_is_a_numerical_failure(self):
        x = np.random.default_rng(4).standard_normal((100, 1))
        states = np.concatenate([x, 2.0 * x], axis=1)

        with self.assertRaises(NumericalFailure) as caught:
            fit_regression(states, x[:, 0], degree=1, step=7)

        self.assertEqual(caught.exception.stage, "regression")
        self.assertEqual(caught.exception.step, 7)
        self.assertIn("rank-deficient", str(caught.exception))

    def test_summary_is_serialisable(self):
        x = np.random.default_rng(5).standard_normal((50, 1))

        summary = fit_regression(x, x[:, 0], degree=1).summary()

        self.assertEqual(summary["n_features"], 2)
        self.assertIn("polynomial", summary["basis"])


if __name__ == "__main__":
    unittest.main()
