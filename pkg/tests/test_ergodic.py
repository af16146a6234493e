import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from core.ergodic import (
    EffectiveHamiltonianTable,
    LambdaBudgets,
    LambdaEstimate,
    build_lambda_table,
    certify_table,
    default_ergodic_horizon,
    ergodic_control_cross_check,
    estimate_lambda_time_average,
    richardson,
    solve_ergodic_bsde,
)
from core.control import constant_policy_family
from core.model import build_model, load_model_file

DESK_MODEL = Path(__file__).resolve().parent.parent / "configs" / "desk_model.json"


def scalar_model(driver: dict, fast_eigenvalue: float = -2.0):
    return build_model(
        {
            "eigenvalues_A": [-1.0],
            "eigenvalues_B": [fast_eigenvalue],
            "terminal": {"kind": "linear", "weights": [1.0]},
            "driver": driver,
        },
        probes=200,
    )


class TestEstimators(unittest.TestCase):
    def test_constant_driver_gives_its_value(self):
        spec = scalar_model({"kind": "affine", "constant": 0.7})

        average = estimate_lambda_time_average(spec, [0.0], [0.0], 10.0, 0.1, 50, seed=0)
        ergodic = solve_ergodic_bsde(spec, [0.0], [0.0], dt=0.1, n_paths=50, seed=0)

        self.assertAlmostEqual(average.value, 0.7, places=12)
        self.assertAlmostEqual(average.ci, 0.0, places=12)
        self.assertAlmostEqual(ergodic.lambda_, 0.7, places=8)
        for _, value in ergodic.discount_trace:
            self.assertAlmostEqual(value, 0.7, places=8)

    def test_time_average_and_vanishing_discount_agree(self):
        spec = scalar_model(
            {"kind": "tanh_q", "constant": 0.3, "scale": 0.5, "weights_q": [1.0], "weights_z": [0.2]}
        )

        average = estimate_lambda_time_average(spec, [0.0], [1.0], 10.0, 0.05, 500, seed=1)
        ergodic = solve_ergodic_bsde(spec, [0.0], [1.0], dt=0.05, n_paths=500, seed=1)

        # tanh is odd and the stationary law symmetric, so lambda = 0.3 + 0.2
        self.assertAlmostEqual(average.value, 0.5, delta=0.02)
        self.assertAlmostEqual(ergodic.lambda_, 0.5, delta=0.05)
        self.assertAlmostEqual(average.value, ergodic.lambda_, delta=0.05)
        self.assertEqual([delta for delta, _ in ergodic.discount_trace], [0.2, 0.1, 0.05, 0.025])

    def test_time_average_needs_a_xi_free_driver(self):
        spec = scalar_model({"kind": "affine", "weights_xi": [1.0]})

        with self.assertRaisesRegex(ValueError, "requires"):
            estimate_lambda_time_average(spec, [0.0], [0.0], 10.0, 0.1, 10, seed=0)

    def test_time_average_needs_a_mixing_horizon(self):
        spec = scalar_model({"kind": "affine"})

        with self.assertRaisesRegex(ValueError, "horizon"):
            estimate_lambda_time_average(spec, [0.0], [0.0], 1.0, 0.1, 10, seed=0)

    def test_discount_schedule_is_checked(self):
        spec = scalar_model({"kind": "affine"})

        with self.assertRaisesRegex(ValueError, "strictly decreasing"):
            solve_ergodic_bsde(spec, [0.0], [0.0], deltas=[0.1, 0.2], n_paths=10)
        with self.assertRaisesRegex(ValueError, "at least two"):
            solve_ergodic_bsde(spec, [0.0], [0.0], deltas=[0.1], n_paths=10)

    def test_richardson_removes_the_linear_term(self):
        deltas = [0.2, 0.1, 0.05]
        values = [1.0 + 3.0 * delta for delta in deltas]

        self.assertAlmostEqual(richardson(deltas, values), 1.0)


class TestLambdaTable(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = scalar_model({"kind": "quadratic_z", "constant": 0.5, "scale": 1.0, "z_radius": 2.0})
        cls.table = build_lambda_table(
            cls.spec,
            [-1.0, 0.0, 1.0],
            [-1.0, -0.5, 0.0, 0.5, 1.0],
            budgets=LambdaBudgets(dt=0.1, n_paths=20, seed=3),
        )

    def test_values_follow_node_order(self):
        points = self.table.node_points()

        self.assertEqual(self.table.values.shape, (3, 5))
        self.assertEqual(points.shape, (15, 2))
        np.testing.assert_allclose(points[:5, 0], -1.0)
        np.testing.assert_allclose(self.table.values.ravel(), 0.5 - 0.5 * points[:, 1] ** 2)
        self.assertTrue(np.all(self.table.valid))

    def test_quadratic_table_is_certified(self):
        self.assertTrue(self.table.certificates.concave)
        self.assertTrue(self.table.certificates.lipschitz)

    def test_interpolation_and_clamping(self):
        values, clamped = self.table.evaluate(np.array([[0.0], [0.0]]), np.array([[0.25], [3.0]]))

        self.assertAlmostEqual(values[0], 0.5 - 0.0625)
        self.assertAlmostEqual(values[1], 0.0)
        self.assertEqual(clamped.tolist(), [False, True])

    def test_csv_round_trip_keeps_the_table(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = self.table.to_csv(Path(temp_dir) / "lambda.csv")
            loaded = EffectiveHamiltonianTable.from_csv(path)

        np.testing.assert_allclose(loaded.x_grid, self.table.x_grid)
        np.testing.assert_allclose(loaded.z_grid, self.table.z_grid)
        np.testing.assert_allclose(loaded.values, self.table.values)
        self.assertEqual((loaded.active_x, loaded.active_z), (1, 1))
        self.assertTrue(loaded.certificates.concave)

    def test_inactive_coordinates_are_pinned(self):
        table = build_lambda_table(
            self.spec,
            [0.0],
            [-1.0, 0.0, 1.0],
            budgets=LambdaBudgets(dt=0.1, n_paths=10),
            active_x=0,
        )

        self.assertEqual(table.shape, (3,))
        np.testing.assert_allclose(table(np.array([[5.0]]), np.array([[1.0]])), [0.0])

    def test_xi_dependent_driver_falls_back_to_the_ergodic_bsde(self):
        spec = scalar_model({"kind": "affine", "constant": 0.4, "weights_xi": [0.5]})

        table = build_lambda_table(
            spec, [0.0], [0.0], method="time_average", budgets=LambdaBudgets(dt=0.1, n_paths=20)
        )

        self.assertEqual(table.method, "ergodic_bsde")
        self.assertTrue(table.valid.all())
        self.assertAlmostEqual(float(table.values.ravel()[0]), 0.4, delta=0.05)

    def test_estimator_errors_mark_nodes_invalid(self):
        def failing(spec, x, z, *args, **kwargs):
            if z[0] > 0.0:
                raise ValueError("horizon must be >= 20/mu")
            return LambdaEstimate(value=0.5, ci=0.0)

        with patch("core.ergodic.table.estimate_lambda_time_average", side_effect=failing):
            table = build_lambda_table(self.spec, [0.0], [-1.0, 0.0, 1.0], budgets=LambdaBudgets(n_paths=10))

        self.assertEqual(table.valid.ravel().tolist(), [True, True, False])
        self.assertTrue(np.isnan(table.values.ravel()[2]))
        self.assertIn("horizon", table.errors[2])

    def test_grids_must_increase(self):
        with self.assertRaisesRegex(ValueError, "strictly increasing"):
            build_lambda_table(self.spec, [0.0, 0.0], [0.0])

    def test_convex_values_fail_the_concavity_certificate(self):
        table = EffectiveHamiltonianTable(
            x_grid=[0.0],
            z_grid=[-1.0, 0.0, 1.0],
            active_x=0,
            active_z=1,
            values=[1.0, 0.0, 1.0],
            ci=[0.0, 0.0, 0.0],
            valid=[True, True, True],
        )

        certificates = certify_table(table)

        self.assertFalse(certificates.concave)
        self.assertEqual(certificates.concavity_failures, [(0, 1, 2)])

    def test_steep_values_fail_the_lipschitz_certificate(self):
        table = EffectiveHamiltonianTable(
            x_grid=[0.0],
            z_grid=[-1.0, 0.0, 1.0],
            active_x=0,
            active_z=1,
            values=[0.0, 5.0, 0.0],
            ci=[0.0, 0.0, 0.0],
            valid=[True, True, True],
        )

        certificates = certify_table(table, lipschitz_z=1.0)

        self.assertTrue(certificates.concave)
        self.assertFalse(certificates.lipschitz)
        self.assertIn((0, 1), certificates.lipschitz_failures)


class TestErgodicControl(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = load_model_file(DESK_MODEL, probes=300)

    def test_constant_policies_bound_lambda_from_above(self):
        spec = self.spec
        x, z = np.zeros(2), np.array([1.0, 0.0])

        ergodic = solve_ergodic_bsde(spec, x, z, dt=0.1, n_paths=300, seed=2, tolerance=1.0)
        check = ergodic_control_cross_check(
            spec, x, z, constant_policy_family(spec.control.size), 20.0 / spec.mu, 0.1, 300, seed=2
        )

        self.assertEqual(len(check.values), 2)
        self.assertEqual(check.value, min(check.values))
        self.assertGreaterEqual(check.value, ergodic.lambda_ - 3.0 * np.hypot(ergodic.ci, check.ci))

    def test_default_horizon_matches_a_long_horizon(self):
        spec = self.spec
        x, z = np.zeros(2), np.zeros(2)

        default = solve_ergodic_bsde(spec, x, z, dt=0.1, n_paths=300, seed=4, tolerance=1.0)
        long_run = solve_ergodic_bsde(
            spec, x, z, horizon=3.0 * default_ergodic_horizon(spec), dt=0.1, n_paths=300, seed=4, tolerance=1.0
        )

        self.assertAlmostEqual(default_ergodic_horizon(spec), 40.0)
        self.assertLessEqual(default.diagnostics["tail_passes"], 3.0)
        self.assertAlmostEqual(
            default.lambda_, long_run.lambda_, delta=3.0 * np.hypot(default.ci, long_run.ci) + 5e-3
        )

    def test_tail_closure_settles_on_the_controlled_average(self):
        spec = self.spec

        solution = solve_ergodic_bsde(spec, np.zeros(2), np.zeros(2), dt=0.1, n_paths=300, seed=4, tolerance=1.0)

        # the closure level is itself an estimate of lambda
        self.assertAlmostEqual(solution.diagnostics["tail_level"], solution.lambda_, delta=0.02)

    def test_cross_check_needs_control_data(self):
        spec = scalar_model({"kind": "affine"})

        with self.assertRaisesRegex(ValueError, "control data"):
            ergodic_control_cross_check(spec, [0.0], [0.0], [], 10.0, 0.1, 10, seed=0)


if __name__ == "__main__":
    unittest.main()
