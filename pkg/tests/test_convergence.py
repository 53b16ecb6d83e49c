#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Unit tests for the convergence-rate study.
"""

import unittest

import numpy as np

from sinksource.errors import ExperimentError
from sinksource.experiments.convergence import DEFAULT_DELTAS, convergence_study, fit_loglog
from sinksource.experiments.scenarios import ScenarioRunner
from sinksource.inverse.sources import SourceConfig
from sinksource.inverse.spectral import decompose

A_SMALL = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])


class TestFitLoglog(unittest.TestCase):
    """Test cases for fit_loglog."""

    def test_exact_power_law(self):
        deltas = np.array([1e-1, 1e-2, 1e-3, 1e-4])
        slope, intercept, r_squared, residuals = fit_loglog(deltas, 3.0 * deltas ** 0.5)
        self.assertAlmostEqual(slope, 0.5, places=12)
        self.assertAlmostEqual(intercept, np.log(3.0), places=12)
        self.assertAlmostEqual(r_squared, 1.0, places=12)
        self.assertTrue(np.allclose(residuals, 0.0, atol=1e-12))

    def test_constant_errors(self):
        _, _, r_squared, _ = fit_loglog([1e-1, 1e-2, 1e-3], [2.0, 2.0, 2.0])
        self.assertEqual(r_squared, 1.0)


class TestConvergenceStudy(unittest.TestCase):
    """Test cases for convergence_study on a well-conditioned instance."""

    def setUp(self):
        """Set up test fixtures."""
        self.spectral = decompose(A_SMALL)
        # A single source on the third vector satisfies the certificate with margin 0.5
        self.source = SourceConfig.from_pairs(3, [(2, 1.0)])

    def test_linear_rate_for_full_operator(self):
        study = convergence_study(self.spectral, self.source, constant=4.0, formulation='formA',
                                  seed=2, fixed_direction=True)
        self.assertEqual(len(study.records), len(DEFAULT_DELTAS))
        self.assertGreaterEqual(study.slope, 0.8)
        self.assertLessEqual(study.slope, 1.2)
        self.assertGreaterEqual(study.r_squared, 0.95)
        self.assertIsNone(study.stability)
        for record in study.records:
            self.assertAlmostEqual(record.alpha, 4.0 * record.delta, places=15)

    def test_linear_rate_for_truncated_operator(self):
        study = convergence_study(self.spectral, self.source, constant=4.0, formulation='formAd',
                                  seed=2, fixed_direction=True)
        self.assertGreaterEqual(study.slope, 0.6)
        self.assertLessEqual(study.slope, 1.4)
        self.assertGreaterEqual(study.r_squared, 0.95)
        self.assertAlmostEqual(study.stability, 1.0, places=12)

    def test_records_are_sorted_descending(self):
        study = convergence_study(self.spectral, self.source, constant=4.0,
                                  deltas=[1e-3, 1e-1, 1e-2, 1e-4], seed=1)
        self.assertEqual([r.delta for r in study.records], [1e-1, 1e-2, 1e-3, 1e-4])
        payload = study.to_dict()
        self.assertEqual(payload['formulation'], 'formA')
        self.assertEqual(len(payload['records']), 4)

    def test_too_few_deltas(self):
        with self.assertRaises(ExperimentError):
            convergence_study(self.spectral, self.source, 1.0, deltas=[1e-1, 1e-2, 1e-3])

    def test_narrow_span(self):
        with self.assertRaises(ExperimentError):
            convergence_study(self.spectral, self.source, 1.0, deltas=[1e-1, 8e-2, 5e-2, 2e-2])

    def test_invalid_constant_and_formulation(self):
        with self.assertRaises(ExperimentError):
            convergence_study(self.spectral, self.source, 0.0)
        with self.assertRaises(ExperimentError):
            convergence_study(self.spectral, self.source, 1.0, formulation='projected')


class TestShippedConvergenceExample(unittest.TestCase):
    """Rates of the P1 convergence example at its shipped resolution."""

    @classmethod
    def setUpClass(cls):
        """Run the example once; both formulations share it."""
        cls.bundle = ScenarioRunner().run_example(3)
        cls.studies = {study.formulation: study for study in cls.bundle.convergence}

    def test_configuration_is_certified(self):
        self.assertTrue(self.bundle.certificates['cross'].certified)

    def test_full_operator_rate(self):
        study = self.studies['formA']
        self.assertGreaterEqual(study.slope, 0.8)
        self.assertLessEqual(study.slope, 1.2)
        self.assertGreaterEqual(study.r_squared, 0.95)

    def test_truncated_operator_rate(self):
        study = self.studies['formAd']
        self.assertGreaterEqual(study.slope, 0.6)
        self.assertLessEqual(study.slope, 1.4)
        self.assertIsNotNone(study.stability)


if __name__ == '__main__':
    unittest.main()
