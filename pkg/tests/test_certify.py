#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Unit tests for the recovery certificates.
"""

import json
import unittest

import numpy as np
import scipy.linalg
from numpy.testing import assert_allclose, assert_array_equal

from sinksource.errors import WeightError
from sinksource.fem import conductivity
from sinksource.fem.forward import forward_from_mesh
from sinksource.fem.mesh import DomainSpec, build_domain
from sinksource.inverse.certify import (
    alpha_bound,
    certify_configuration,
    check_c1_c2,
    check_disjoint_supports,
    check_injective_on_support,
    check_max_property,
    check_orthocomplement,
    check_parallel_columns,
    check_sign_consistency,
    disjoint_certificate,
    orthocomplement_members,
    verify_dual_certificate,
)
from sinksource.inverse.solvers import build_request, extract_support, solve_weighted_lasso
from sinksource.inverse.sources import SourceConfig
from sinksource.inverse.spectral import decompose, weight_matrix
from sinksource.utils.io_utils import to_builtin

A_SMALL = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])


class TestSmallExample(unittest.TestCase):
    """Certificates on the explicit 2x3 example."""

    def setUp(self):
        """Set up test fixtures."""
        self.P = decompose(A_SMALL).projection()
        self.W = weight_matrix(self.P)
        self.third = SourceConfig.from_pairs(3, [(2, 1.0)])

    def test_max_property(self):
        report = check_max_property(self.P, self.W)
        self.assertTrue(report.all_passed)
        assert_allclose(report.values, np.full(3, np.sqrt(2.0 / 3.0)), atol=1e-14)
        column = self.P[:, 2] / self.W.w
        assert_allclose(column, np.array([1.0, 1.0, 2.0]) / np.sqrt(6.0), atol=1e-14)
        self.assertEqual(int(np.argmax(np.abs(column))), 2)

    def test_sign_system_single_source(self):
        report = check_c1_c2(self.P, self.W, self.third)
        self.assertTrue(report.c1_feasible)
        self.assertTrue(report.passed)
        assert_allclose(report.a, [3.0 / np.sqrt(6.0)], atol=1e-14)
        self.assertAlmostEqual(report.c2_margin, 0.5, places=12)
        self.assertAlmostEqual(report.alpha_max, np.sqrt(6.0) / 3.0, places=12)
        self.assertTrue(report.dual.valid)
        self.assertAlmostEqual(report.dual.nbp2_margin, 0.5, places=12)

    def test_outcome_depends_on_signs_only(self):
        scaled = SourceConfig.from_pairs(3, [(2, 7.5)])
        assert_allclose(check_c1_c2(self.P, self.W, scaled).a, check_c1_c2(self.P, self.W, self.third).a)

    def test_empty_support_rejected(self):
        with self.assertRaises(ValueError):
            check_c1_c2(self.P, self.W, SourceConfig(3, (), ()))

    def test_overlapping_projections_are_not_disjoint(self):
        report = check_disjoint_supports(self.P, [0, 2])
        self.assertFalse(report.disjoint)
        self.assertGreater(report.overlap[0, 1], 0.0)
        self.assertEqual(report.overlap[0, 0], 0.0)

    def test_injectivity_on_support(self):
        report = check_injective_on_support(A_SMALL, [0, 2])
        self.assertTrue(report.injective)
        self.assertAlmostEqual(report.sigma_min, np.sqrt((3.0 - np.sqrt(5.0)) / 2.0), places=12)
        self.assertAlmostEqual(report.sigma_min, 0.618, places=3)

    def test_too_many_columns_are_not_injective(self):
        report = check_injective_on_support(A_SMALL, [0, 1, 2])
        self.assertFalse(report.injective)
        self.assertEqual(report.sigma_min, 0.0)

    def test_orthocomplement(self):
        member, norm = check_orthocomplement(self.P, 2)
        self.assertFalse(member)
        self.assertAlmostEqual(norm, np.sqrt(6.0) / 3.0, places=12)
        members, _ = orthocomplement_members(self.P, ortho_tol=0.2)
        assert_array_equal(members, [0, 1, 2])

    def test_dual_certificate_verification(self):
        c = np.array([0.0, 0.0, 3.0 / np.sqrt(6.0)])
        report = verify_dual_certificate(self.P, self.third, c)
        self.assertTrue(report.valid)
        self.assertLess(report.nbp1_residual, 1e-12)
        self.assertFalse(verify_dual_certificate(self.P, self.third, 3.0 * c).valid)

    def test_full_battery(self):
        report = certify_configuration(A_SMALL, self.P, self.W, self.third)
        self.assertTrue(report.certified)
        self.assertEqual(report.parallel_pairs, [])
        self.assertIn("certified", report.render_table())
        json.dumps(to_builtin(report.to_dict()))


class TestDiagonalProjection(unittest.TestCase):
    """Certificates when the projected basis vectors do not interact."""

    def setUp(self):
        """Set up test fixtures."""
        self.P = np.diag([1.0, 1.0, 1.0, 1.0])
        self.W = weight_matrix(self.P)
        self.source = SourceConfig.from_pairs(4, [(0, 2.0), (3, -1.0)])

    def test_disjoint_certificate(self):
        self.assertTrue(check_disjoint_supports(self.P, self.source.support).disjoint)
        c = disjoint_certificate(self.P, self.source)
        assert_allclose(c, [1.0, 0.0, 0.0, -1.0])
        report = verify_dual_certificate(self.P, self.source, c)
        self.assertTrue(report.valid)
        self.assertEqual(report.nbp2_margin, 0.0)

    def test_null_column_rejected(self):
        with self.assertRaises(WeightError):
            disjoint_certificate(np.diag([1.0, 0.0, 1.0, 1.0]), self.source)


class TestHelpers(unittest.TestCase):
    """Test cases for the smaller checks."""

    def test_parallel_columns(self):
        A = np.array([[1.0, -2.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
        report = check_parallel_columns(A)
        self.assertEqual(report.pairs, [(0, 1)])
        self.assertEqual(report.degenerate, [3])
        self.assertEqual(report.flagged(), [0, 1, 3])
        self.assertFalse(report.passed)

    def test_alpha_bound_ignores_growing_entries(self):
        source = SourceConfig.from_pairs(3, [(0, 1.0), (2, -2.0)])
        self.assertAlmostEqual(alpha_bound(source, np.array([0.5, -1.0])), 2.0)
        self.assertEqual(alpha_bound(source, np.array([-0.5, 1.0])), float('inf'))

    def test_sign_consistency(self):
        source = SourceConfig.from_pairs(4, [(1, 1.0), (2, -1.0)])
        self.assertTrue(check_sign_consistency(np.array([0.0, 0.9, -0.8, 1e-4]), source, 1e-3))
        self.assertFalse(check_sign_consistency(np.array([0.0, 0.9, 0.8, 0.0]), source, 1e-3))
        self.assertFalse(check_sign_consistency(np.array([0.5, 0.9, -0.8, 0.0]), source, 1e-3))


class TestMaxPropertyPaths(unittest.TestCase):
    """Identity and excluded-index paths of check_max_property."""

    def test_identity_projection(self):
        P = np.eye(4)
        report = check_max_property(P, weight_matrix(P))
        self.assertTrue(report.all_passed)
        assert_allclose(report.margins, np.ones(4))
        assert_allclose(report.values, np.ones(4))
        self.assertEqual(report.failures(), [])

    def test_parallel_columns_excluded(self):
        P = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
        W = weight_matrix(P)
        plain = check_max_property(P, W)
        self.assertFalse(plain.all_passed)
        self.assertEqual(plain.failures(), [0, 1])
        assert_allclose(plain.margins[:2], [0.0, 0.0], atol=1e-14)

        flagged = check_parallel_columns(P).flagged()
        self.assertEqual(flagged, [0, 1])
        excluded = check_max_property(P, W, exclude=flagged)
        self.assertTrue(excluded.all_passed)
        self.assertEqual(excluded.excluded, [0, 1])
        self.assertEqual(excluded.failures(), [])


class TestMaxPropertyOnSquare(unittest.TestCase):
    """Max property of the full-rank projection of the P1 model on the unit square."""

    @classmethod
    def setUpClass(cls):
        """Set up the forward model once; it is shared by every test."""
        mesh = build_domain(DomainSpec(domain="unit_square", divisions=16))
        _, model = forward_from_mesh(mesh, conductivity.constant(1.0))
        cls.n = mesh.n_vertices
        cls.P = decompose(model.A).projection()
        cls.W = weight_matrix(cls.P)

    def test_every_unflagged_index_passes(self):
        flagged = check_parallel_columns(self.P).flagged()
        report = check_max_property(self.P, self.W, exclude=flagged)
        self.assertEqual(len(report.passed), self.n)
        self.assertTrue(report.all_passed, f"failing indices {report.failures()}")
        self.assertTrue(np.all(report.values <= 1.0 + 1e-12))


class TestSignSystemEdgeCases(unittest.TestCase):
    """Singular sign systems and supports dominated by the diagonal."""

    def test_duplicate_columns_are_inconclusive(self):
        P = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]])
        report = check_c1_c2(P, weight_matrix(P), SourceConfig.from_pairs(3, [(0, 1.0), (1, -1.0)]))
        self.assertFalse(report.c1_feasible)
        self.assertFalse(report.passed)
        self.assertIsNone(report.a)
        self.assertIsNone(report.c2_margin)

    def test_nearly_parallel_columns_are_inconclusive(self):
        A = np.array([[1.0, 1.0, 0.0], [0.0, 1e-15, 1.0]])
        P = decompose(A).projection()
        report = check_c1_c2(P, weight_matrix(P), SourceConfig.from_pairs(3, [(0, 1.0), (1, 1.0)]))
        self.assertFalse(report.c1_feasible)
        self.assertIsNone(report.a)

    def test_orthocomplement_support_plus_one_index(self):
        rng = np.random.default_rng(17)
        A = scipy.linalg.block_diag(np.eye(3), rng.standard_normal((3, 6)))
        P = decompose(A).projection()
        W = weight_matrix(P)
        source = SourceConfig.from_pairs(9, [(0, 1.0), (1, -2.0), (2, 1.5), (5, -1.0)])
        for j in (0, 1, 2):
            self.assertTrue(check_orthocomplement(P, j)[0])

        report = check_c1_c2(P, W, source)
        self.assertTrue(report.passed)
        assert_allclose(report.a, [1.0, -1.0, 1.0, -1.0 / W.w[5]], rtol=1e-10)
        Q = P / W.w[:, None]
        others = [3, 4, 6, 7, 8]
        self.assertAlmostEqual(report.c2_margin, float(np.abs(Q[others, 5]).max() / W.w[5]), places=10)
        self.assertLess(report.c2_margin, 1.0)
        self.assertTrue(report.dual.valid)


class TestRandomConfigurations(unittest.TestCase):
    """Certified random configurations are recovered exactly by the projected lasso."""

    def test_certified_configurations_recover_support(self):
        rng = np.random.default_rng(2024)
        recovered = 0
        trials = 0
        while recovered < 100 and trials < 2000:
            trials += 1
            A = rng.standard_normal((12, 30))
            spectral = decompose(A)
            P = spectral.projection()
            W = weight_matrix(P)
            s = int(rng.integers(1, 4))
            support = np.sort(rng.choice(30, size=s, replace=False))
            values = rng.choice([-1.0, 1.0], size=s) * rng.uniform(1.0, 2.0, s)
            source = SourceConfig.from_pairs(30, zip(support.tolist(), values.tolist()))
            report = certify_configuration(A, P, W, source)
            if not report.certified or not np.isfinite(report.alpha_max):
                continue

            with self.subTest(trial=trials, support=list(source.support)):
                alpha = report.alpha_max / 2.0
                result = solve_weighted_lasso(build_request(spectral, 'projected', source.dense(), alpha))
                self.assertTrue(result.converged)
                assert_array_equal(extract_support(result.x, tau_supp=1e-4), source.J)
                self.assertTrue(check_sign_consistency(result.x, source, 1e-4))
            recovered += 1
        self.assertEqual(recovered, 100)


if __name__ == '__main__':
    unittest.main()
