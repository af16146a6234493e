import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from core.bsde import solve_epsilon_bsde, solve_limit_bsde, step_process_coarsening
from core.errors import NumericalFailure
from core.forward import TimeGrid, simulate_slow_paths, simulate_two_scale_paths
from core.model import build_model


def scalar_model(driver: dict, x0: float = 1.0):
    return build_model(
        {
            "name": "scalar",
            "eigenvalues_A": [-1.0],
            "eigenvalues_B": [-2.0],
            "terminal": {"kind": "linear", "weights": [1.0]},
            "driver": driver,
            "initial_state": {"x0": [x0]},
        },
        probes=200,
    )


class _ClampedEverywhere:
    def evaluate(self, x, z):
        return np.zeros(x.shape[0]), np.ones(x.shape[0], dtype=bool)


class TestLimitBsde(unittest.TestCase):
    def test_constant_driver_matches_closed_form(self):
        spec = scalar_model({"kind": "affine", "constant": 0.5})

        solution = solve_limit_bsde(spec, lambda x, z: np.full(x.shape[0], 0.5), TimeGrid.unit(20), 2000, seed=1)

        self.assertAlmostEqual(solution.y0, np.exp(-1.0) + 0.5, delta=3.0 * solution.ci)
        self.assertEqual(solution.n_steps, 20)
        self.assertEqual(solution.diagnostics["clamped_fraction"], 0.0)

    def test_quadratic_driver_matches_closed_form(self):
        spec = scalar_model({"kind": "quadratic_z", "constant": 0.5, "scale": 1.0})
        expected = np.exp(-1.0) + 0.5 - 0.25 * (1.0 - np.exp(-2.0))

        solution = solve_limit_bsde(
            spec, lambda x, z: 0.5 - 0.5 * np.sum(z * z, axis=1), TimeGrid.unit(20), 2000, seed=2
        )

        self.assertAlmostEqual(solution.y0, expected, delta=3.0 * solution.ci + 0.01)

    def test_clamped_table_is_out_of_range(self):
        spec = scalar_model({"kind": "affine"})

        with self.assertRaises(NumericalFailure) as caught:
            solve_limit_bsde(spec, _ClampedEverywhere(), TimeGrid.unit(5), 100, seed=0)

        self.assertIn("lambda out of range", str(caught.exception))
        self.assertEqual(caught.exception.stage, "bsde limit")

    def test_bundle_must_match_the_grid(self):
        spec = scalar_model({"kind": "affine"})
        bundle = simulate_slow_paths(spec, TimeGrid.unit(5), 50, seed=0)

        with self.assertRaisesRegex(ValueError, "does not match"):
            solve_limit_bsde(spec, lambda x, z: np.zeros(x.shape[0]), TimeGrid.unit(6), 50, bundle=bundle)


class TestEpsilonBsde(unittest.TestCase):
    def test_decoupled_driver_agrees_with_the_limit(self):
        spec = scalar_model({"kind": "quadratic_z", "constant": 0.5, "scale": 1.0})
        grid = TimeGrid.resolving(0.2)

        eps_solution = solve_epsilon_bsde(spec, 0.2, grid, 1000, seed=3)
        limit = solve_limit_bsde(
            spec, lambda x, z: 0.5 - 0.5 * np.sum(z * z, axis=1), grid, 1000, seed=3
        )

        self.assertLessEqual(abs(eps_solution.y0 - limit.y0), eps_solution.ci + limit.ci)
        self.assertEqual(eps_solution.eps, 0.2)
        self.assertIn("median_xi_over_sqrt_eps", eps_solution.diagnostics)

    def test_unresolved_grid_is_rejected(self):
        spec = scalar_model({"kind": "affine"})

        with self.assertRaisesRegex(ValueError, "fast scale unresolved"):
            solve_epsilon_bsde(spec, 0.1, TimeGrid.unit(5), 50)

    def test_bundle_must_match_eps(self):
        spec = scalar_model({"kind": "affine"})
        grid = TimeGrid.resolving(0.2)
        bundle = simulate_two_scale_paths(spec, 0.5, grid, 50, seed=0)

        with self.assertRaisesRegex(ValueError, "does not match"):
            solve_epsilon_bsde(spec, 0.2, grid, 50, bundle=bundle)

    def test_solution_exports(self):
        spec = scalar_model({"kind": "affine", "constant": 0.5})
        grid = TimeGrid.resolving(0.5)
        solution = solve_epsilon_bsde(spec, 0.5, grid, 200, seed=4)

        with tempfile.TemporaryDirectory() as temp_dir:
            json_path = solution.to_json(Path(temp_dir) / "eps.json")
            csv_path = solution.export_fits_csv(Path(temp_dir) / "eps.fits.csv")
            frame = pd.read_csv(csv_path)
            self.assertTrue(json_path.exists())

        self.assertEqual(len(frame), grid.n_steps)
        self.assertIn("xi_coefficients", frame.columns)
        self.assertEqual(frame["y_basis"].iloc[0], "constant")


class TestCoarsening(unittest.TestCase):
    def test_finer_blocks_do_not_increase_the_error(self):
        spec = scalar_model({"kind": "quadratic_z", "constant": 0.0, "scale": 1.0})
        grid = TimeGrid.unit(20)
        bundle = simulate_slow_paths(spec, grid, 1000, seed=5)
        solution = solve_limit_bsde(
            spec, lambda x, z: -0.5 * np.sum(z * z, axis=1), grid, 1000, bundle=bundle
        )

        coarse = step_process_coarsening(solution, bundle, 2)
        fine = step_process_coarsening(solution, bundle, 20)

        self.assertEqual(fine.integrated_error, 0.0)
        self.assertGreaterEqual(coarse.integrated_error, fine.integrated_error)

    def test_block_count_is_bounded_by_steps(self):
        spec = scalar_model({"kind": "affine"})
        grid = TimeGrid.unit(4)
        bundle = simulate_slow_paths(spec, grid, 50, seed=0)
        solution = solve_limit_bsde(spec, lambda x, z: np.zeros(x.shape[0]), grid, 50, bundle=bundle)

        with self.assertRaises(ValueError):
            step_process_coarsening(solution, bundle, 5)


if __name__ == "__main__":
    unittest.main()
