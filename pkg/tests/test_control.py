import json
import unittest
from pathlib import Path

import numpy as np

from core.bsde import solve_epsilon_bsde
from core.control import (
    BinnedPolicy,
    ConstantPolicy,
    PolicyFamilySpec,
    ThresholdPolicy,
    binned_policy_family,
    brute_force_value,
    constant_policy_family,
    evaluate_cost,
    threshold_policy_family,
)
from core.forward import TimeGrid, simulate_two_scale_paths
from core.model import build_model, load_model_file

DESK_MODEL = Path(__file__).resolve().parent.parent / "configs" / "desk_model.json"


class TestPolicies(unittest.TestCase):
    def test_constant_and_threshold_policies(self):
        x = np.zeros((3, 1))
        q = np.array([[-1.0], [0.0], [1.0]])

        self.assertEqual(ConstantPolicy(1).indices(0.0, x, q).tolist(), [1, 1, 1])
        self.assertEqual(ThresholdPolicy(0.0, 0, 1).indices(0.0, x, q).tolist(), [0, 1, 1])

    def test_threshold_family_contains_the_constants(self):
        family = threshold_policy_family(3, thresholds=(0.0, 1.0))

        # 3 constants + 2 thresholds x 6 ordered pairs
        self.assertEqual(len(family), 15)
        self.assertIsInstance(family[0], ConstantPolicy)

    def test_binned_policy_cells(self):
        table = np.arange(6).reshape(2, 3, 1)
        policy = BinnedPolicy(horizon=(0.0, 1.0), x_edges=(-0.25, 0.25), q_edges=(), table=table)
        x = np.array([[-1.0], [0.0], [1.0]])
        q = np.zeros((3, 1))

        self.assertEqual(policy.indices(0.1, x, q).tolist(), [0, 1, 2])
        self.assertEqual(policy.indices(0.9, x, q).tolist(), [3, 4, 5])
        self.assertEqual(policy.indices(1.0, x, q).tolist(), [3, 4, 5])

    def test_default_family_has_64_members(self):
        family = binned_policy_family(2, TimeGrid.unit(10))

        self.assertEqual(len(family), 64)
        self.assertEqual(family[0].table.shape, (2, 3, 1))

    def test_family_above_the_cap_is_refused(self):
        with self.assertRaisesRegex(ValueError, "cap"):
            binned_policy_family(2, TimeGrid.unit(10), PolicyFamilySpec(cap=10))


class TestCostEvaluation(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.spec = load_model_file(DESK_MODEL, probes=300)
        cls.eps = 0.2
        cls.grid = TimeGrid.resolving(cls.eps)
        cls.bundle = simulate_two_scale_paths(cls.spec, cls.eps, cls.grid, 4000, seed=12)

    def test_girsanov_density_has_unit_mean(self):
        result = evaluate_cost(
            self.spec, self.eps, ConstantPolicy(1), self.grid, 4000, seed=12, bundle=self.bundle, strong=False
        )

        self.assertAlmostEqual(result.density_mean, 1.0, delta=4.0 * result.density_ci)
        self.assertIsNone(result.strong)
        self.assertLess(result.max_log_density, 50.0)

    def test_weak_and_strong_costs_agree(self):
        result = evaluate_cost(
            self.spec, self.eps, ThresholdPolicy(0.0, 0, 1), self.grid, 4000, seed=12, bundle=self.bundle
        )

        self.assertIsNotNone(result.strong)
        self.assertAlmostEqual(result.weak, result.strong, delta=4.0 * result.joint_ci)

    def test_refined_family_never_does_worse(self):
        coarse = binned_policy_family(
            2, self.grid, PolicyFamilySpec(time_bins=1, x_edges=[], q_edges=[])
        )
        fine = binned_policy_family(2, self.grid)

        coarse_value = brute_force_value(self.spec, self.eps, coarse, self.grid, 4000, 12, bundle=self.bundle)
        fine_value = brute_force_value(self.spec, self.eps, fine, self.grid, 4000, 12, bundle=self.bundle)

        self.assertEqual(len(coarse_value.values), 2)
        self.assertLessEqual(fine_value.value, coarse_value.value + 1e-12)

    def test_default_family_respects_the_identification_bound(self):
        family = binned_policy_family(self.spec.control.size, self.grid)

        value = brute_force_value(self.spec, self.eps, family, self.grid, 4000, 12, bundle=self.bundle)
        solution = solve_epsilon_bsde(self.spec, self.eps, self.grid, 4000, seed=12, bundle=self.bundle)

        self.assertEqual(len(value.values), 64)
        self.assertGreaterEqual(value.value, solution.y0 - (value.ci + solution.ci))

    def test_brute_force_matches_across_workers(self):
        family = constant_policy_family(2)

        serial = brute_force_value(self.spec, self.eps, family, self.grid, 4000, 12, bundle=self.bundle)
        threaded = brute_force_value(
            self.spec, self.eps, family, self.grid, 4000, 12, bundle=self.bundle, workers=2
        )

        self.assertEqual(serial.values, threaded.values)
        self.assertEqual(serial.best_index, threaded.best_index)

    def test_empty_family_is_refused(self):
        with self.assertRaisesRegex(ValueError, "non-empty"):
            brute_force_value(self.spec, self.eps, [], self.grid, 10, 0, bundle=self.bundle)


class TestSingletonControlGrid(unittest.TestCase):
    def test_single_control_value_matches_the_bsde(self):
        raw = json.loads(DESK_MODEL.read_text(encoding="utf-8"))
        raw["control_grid"] = [0.0]
        spec = build_model(raw, probes=300)
        eps = 0.2
        grid = TimeGrid.resolving(eps)
        bundle = simulate_two_scale_paths(spec, eps, grid, 2000, seed=3)

        value = brute_force_value(spec, eps, constant_policy_family(1), grid, 2000, 3, bundle=bundle)
        solution = solve_epsilon_bsde(spec, eps, grid, 2000, seed=3, bundle=bundle)

        self.assertEqual(value.best_index, 0)
        self.assertAlmostEqual(value.value, solution.y0, delta=3.0 * (value.ci + solution.ci))


if __name__ == "__main__":
    unittest.main()
