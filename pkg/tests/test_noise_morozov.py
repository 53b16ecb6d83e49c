#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Unit tests for noise synthesis and Morozov's discrepancy principle.
"""

import unittest
from unittest.mock import MagicMock

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from sinksource.errors import ExperimentError
from sinksource.experiments.morozov import log_grid, morozov_select_alpha
from sinksource.experiments.noise import make_noisy_observation, make_rng, scaled_noise
from sinksource.inverse.solvers import SolveResult, SolveStatus
from sinksource.inverse.sources import SourceConfig


def fake_result(residual_norm: float, x: np.ndarray = None) -> SolveResult:
    return SolveResult(x=np.zeros(3) if x is None else x, objective=0.0, residual_norm=residual_norm,
                       iterations=1, converged=True, status=SolveStatus.CONVERGED)


class TestNoise(unittest.TestCase):
    """Test cases for make_noisy_observation."""

    def setUp(self):
        """Set up test fixtures."""
        rng = np.random.default_rng(0)
        self.A = rng.standard_normal((40, 60))
        self.source = SourceConfig.from_pairs(60, [(5, 1.0), (33, -2.0)])

    def test_level_is_recovered_from_spec(self):
        for level in (0.005, 0.01, 0.025):
            b_delta, spec = make_noisy_observation(self.A, self.source, level, seed=12)
            self.assertAlmostEqual(spec.realized_level(), level, delta=1e-12)
            b = self.A @ self.source.dense()
            self.assertAlmostEqual(spec.spread, float(b.max() - b.min()), places=12)
            self.assertAlmostEqual(float(np.linalg.norm(b_delta - b)), spec.delta, places=12)

    def test_same_seed_same_noise(self):
        first, _ = make_noisy_observation(self.A, self.source, 0.01, seed=3)
        second, _ = make_noisy_observation(self.A, self.source, 0.01, seed=3)
        other, _ = make_noisy_observation(self.A, self.source, 0.01, seed=4)
        assert_array_equal(first, second)
        self.assertFalse(np.array_equal(first, other))

    def test_generator_is_pcg64(self):
        self.assertIsInstance(make_rng(1).bit_generator, np.random.PCG64)
        assert_array_equal(make_rng(9).standard_normal(5), make_rng(9).standard_normal(5))

    def test_zero_level_returns_clean_data(self):
        clean = np.linspace(-1.0, 1.0, 40)
        b_delta, spec = make_noisy_observation(self.A, self.source, 0.0, seed=1, clean_data=clean)
        assert_array_equal(b_delta, clean)
        self.assertEqual(spec.delta, 0.0)
        self.assertEqual(spec.tau, 0.0)

    def test_invalid_levels(self):
        with self.assertRaises(ExperimentError):
            make_noisy_observation(self.A, self.source, -0.1, seed=1)
        with self.assertRaises(ExperimentError):
            make_noisy_observation(self.A, self.source, 0.01, seed=1, clean_data=np.ones(40))

    def test_scaled_noise_has_exact_norm(self):
        rng = make_rng(5)
        self.assertAlmostEqual(float(np.linalg.norm(scaled_noise(30, 1e-3, rng))), 1e-3, places=15)
        direction = np.arange(4.0)
        assert_allclose(scaled_noise(4, 2.0, rng, direction), 2.0 * direction / np.linalg.norm(direction))
        assert_array_equal(scaled_noise(3, 1.0, rng, np.zeros(3)), np.zeros(3))


class TestLogGrid(unittest.TestCase):
    """Test cases for log_grid."""

    def test_grid_descends_and_includes_ends(self):
        grid = log_grid(1e-5, 1e-1)
        self.assertEqual(len(grid), 101)
        self.assertAlmostEqual(grid[0], 1e-1, places=15)
        self.assertAlmostEqual(grid[-1], 1e-5, places=15)
        self.assertTrue(np.all(np.diff(grid) < 0))
        assert_allclose(np.diff(np.log10(grid)), -1.0 / 25.0, rtol=1e-10)

    def test_bad_range(self):
        with self.assertRaises(ExperimentError):
            log_grid(1e-1, 1e-5)
        with self.assertRaises(ExperimentError):
            log_grid(0.0, 1.0)


class TestMorozov(unittest.TestCase):
    """Test cases for morozov_select_alpha."""

    def setUp(self):
        """Set up test fixtures."""
        self.grid = log_grid(1e-5, 1e-1)
        self.b = np.zeros(3)

    def test_selects_largest_admissible_alpha(self):
        # residual grows linearly with alpha
        selection = morozov_select_alpha(lambda alpha, x0: fake_result(10.0 * alpha), self.b, 1e-3, self.grid)
        self.assertFalse(selection.fallback)
        self.assertAlmostEqual(selection.threshold, 1.1e-3, places=15)
        admissible = [a for a in self.grid if 10.0 * a <= selection.threshold]
        self.assertEqual(selection.alpha, max(admissible))
        self.assertEqual(len(selection.scanned), len(self.grid) - len(admissible) + 1)

    def test_huge_noise_selects_largest_alpha(self):
        solve = MagicMock(return_value=fake_result(1.0))
        selection = morozov_select_alpha(solve, self.b, 1e3, self.grid)
        self.assertEqual(selection.alpha, self.grid[0])
        solve.assert_called_once()

    def test_fallback_to_smallest_alpha(self):
        selection = morozov_select_alpha(lambda alpha, x0: fake_result(1.0), self.b, 1e-6, self.grid)
        self.assertTrue(selection.fallback)
        self.assertEqual(selection.alpha, self.grid[-1])
        self.assertEqual(len(selection.scanned), len(self.grid))

    def test_scan_order_is_descending_with_warm_starts(self):
        calls = []

        def solve(alpha, x0):
            calls.append((alpha, None if x0 is None else x0.copy()))
            return fake_result(10.0 * alpha, x=np.full(3, alpha))

        morozov_select_alpha(solve, self.b, 1e-3, list(reversed(self.grid)))
        self.assertEqual(calls[0][0], self.grid[0])
        self.assertIsNone(calls[0][1])
        assert_array_equal(calls[1][1], np.full(3, self.grid[0]))

    def test_solver_failure_carries_alpha(self):
        def solve(alpha, x0):
            raise RuntimeError("breakdown")

        with self.assertRaises(ExperimentError) as ctx:
            morozov_select_alpha(solve, self.b, 1e-3, self.grid)
        self.assertEqual(ctx.exception.alpha, self.grid[0])
        self.assertIn("breakdown", str(ctx.exception))

    def test_invalid_arguments(self):
        with self.assertRaises(ExperimentError):
            morozov_select_alpha(lambda a, x0: fake_result(0.0), self.b, 1e-3, [])
        with self.assertRaises(ExperimentError):
            morozov_select_alpha(lambda a, x0: fake_result(0.0), self.b, 0.0, self.grid)


if __name__ == '__main__':
    unittest.main()
