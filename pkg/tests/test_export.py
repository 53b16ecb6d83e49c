#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Unit tests for artifact export, heatmaps and file helpers.
"""

import csv
import json
import os
import tempfile
import unittest
from unittest.mock import patch

import numpy as np
import yaml
from numpy.testing import assert_allclose, assert_array_equal

from sinksource.config.config_models import HarnessConfig
from sinksource.errors import ExperimentError
from sinksource.experiments.export import RESULTS_HEADER, export_artifacts, support_table
from sinksource.experiments.heatmap import color_limit, render_heatmap
from sinksource.experiments.scenarios import ExampleBundle, ScenarioRunner
from sinksource.fem.mesh import DomainSpec, build_domain
from sinksource.utils.io_utils import read_vector, to_builtin, write_csv

SCENARIOS = {
    'support_fraction': 0.1,
    'examples': {
        9: {'name': 'tiny', 'scenarios': [{
            'name': 'sq',
            'mesh': {'domain': 'unit_square', 'divisions': 4},
            'conductivity': 'constant',
            'data': 'exact',
            'sources': [{'point': [0.25, 0.5], 'value': 1.0}, {'point': [0.75, 0.5], 'value': -1.0}],
            'runs': [{'label': 'weighted', 'formulation': 'formAd', 'alpha': 1e-3},
                     {'label': 'plain run', 'formulation': 'formAd', 'alpha': 1e-3, 'weighted': False}],
        }]},
    },
}


def read_rows(path):
    with open(path, newline='') as f:
        return list(csv.reader(f))


class TestExportArtifacts(unittest.TestCase):
    """Test cases for export_artifacts."""

    @classmethod
    def setUpClass(cls):
        cls.temp_dir = tempfile.TemporaryDirectory()
        path = os.path.join(cls.temp_dir.name, "examples.yaml")
        with open(path, 'w') as f:
            yaml.safe_dump(SCENARIOS, f)
        cls.bundle = ScenarioRunner(harness=HarnessConfig(), examples_path=path).run_example(9)

    @classmethod
    def tearDownClass(cls):
        cls.temp_dir.cleanup()

    def setUp(self):
        """Set up test fixtures."""
        self.out_dir = tempfile.mkdtemp(dir=self.temp_dir.name)

    def test_files_written(self):
        written = export_artifacts(self.bundle, self.out_dir)
        self.assertEqual(len(written['heatmaps']), 2)
        self.assertTrue(os.path.exists(os.path.join(self.out_dir, 'heatmap_plain_run.svg')))
        self.assertEqual(written['convergence'], [])
        for paths in written.values():
            for path in paths:
                self.assertTrue(os.path.exists(path), path)

    def test_results_rows_cover_true_support(self):
        export_artifacts(self.bundle, self.out_dir)
        rows = read_rows(os.path.join(self.out_dir, 'results.csv'))
        self.assertEqual(tuple(rows[0]), RESULTS_HEADER)
        weighted = [r for r in rows[1:] if r[0] == 'weighted']
        indices = {int(r[1]) for r in weighted}
        self.assertTrue(set(self.bundle.run('weighted').true_support) <= indices)
        for row in weighted:
            self.assertEqual(float(row[5]), self.bundle.run('weighted').result.x[int(row[1])])

    def test_certificates_json(self):
        export_artifacts(self.bundle, self.out_dir)
        with open(os.path.join(self.out_dir, 'certificates.json')) as f:
            payload = json.load(f)
        self.assertEqual(payload['example'], 9)
        self.assertEqual(list(payload['certificates']), ['sq'])
        self.assertEqual([r['label'] for r in payload['runs']], ['weighted', 'plain run'])

    def test_singular_values_csv(self):
        export_artifacts(self.bundle, self.out_dir)
        rows = read_rows(os.path.join(self.out_dir, 'singular_values.csv'))
        self.assertEqual(rows[0], ['scenario', 'index', 'value'])
        values = [float(r[2]) for r in rows[1:]]
        assert_allclose(values, self.bundle.scenarios['sq'].spectral.singular_values, rtol=0, atol=0)

    def test_empty_bundle_gives_header_only(self):
        written = export_artifacts(ExampleBundle(example_id=4, name='empty'), self.out_dir)
        self.assertEqual(read_rows(written['results'][0]), [list(RESULTS_HEADER)])
        self.assertEqual(written['heatmaps'], [])

    def test_io_failure_names_path(self):
        with patch('sinksource.experiments.export.write_csv', side_effect=OSError("disk full")):
            with self.assertRaises(ExperimentError) as ctx:
                export_artifacts(self.bundle, self.out_dir)
        self.assertIn('results.csv', str(ctx.exception))

    def test_support_table(self):
        table = support_table(self.bundle, 'weighted')
        self.assertEqual([row[0] for row in table], list(self.bundle.run('weighted').true_support))
        self.assertEqual([row[1] for row in table], [1.0, -1.0])


class TestHeatmap(unittest.TestCase):
    """Test cases for render_heatmap."""

    def setUp(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.TemporaryDirectory()
        self.mesh = build_domain(DomainSpec(domain="unit_square", divisions=3))

    def tearDown(self):
        """Tear down test fixtures."""
        self.temp_dir.cleanup()

    def test_color_limit(self):
        self.assertEqual(color_limit(np.zeros(5)), 1.0)
        self.assertEqual(color_limit(np.array([0.5, -2.0, 1.0])), 2.0)

    def test_output_is_deterministic(self):
        values = np.linspace(-1.0, 1.0, self.mesh.n_vertices)
        first = render_heatmap(self.mesh, values, os.path.join(self.temp_dir.name, "a.svg"), title="field")
        second = render_heatmap(self.mesh, values, os.path.join(self.temp_dir.name, "b.svg"), title="field")
        with open(first, 'rb') as f_a, open(second, 'rb') as f_b:
            self.assertEqual(f_a.read(), f_b.read())

    def test_zero_field_renders(self):
        path = render_heatmap(self.mesh, np.zeros(self.mesh.n_vertices), os.path.join(self.temp_dir.name, "z.svg"))
        self.assertTrue(os.path.getsize(path) > 0)

    def test_shape_mismatch(self):
        with self.assertRaises(ValueError):
            render_heatmap(self.mesh, np.zeros(3), os.path.join(self.temp_dir.name, "x.svg"))


class TestIOUtils(unittest.TestCase):
    """Test cases for the file helpers."""

    def setUp(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        """Tear down test fixtures."""
        self.temp_dir.cleanup()

    def test_to_builtin(self):
        payload = to_builtin({'a': np.arange(3), 'b': np.float64(np.inf), 1: np.bool_(True), 'c': (np.int64(2),)})
        self.assertEqual(payload, {'a': [0, 1, 2], 'b': None, '1': True, 'c': [2]})
        json.dumps(payload)

    def test_csv_floats_round_trip(self):
        path = os.path.join(self.temp_dir.name, "v.csv")
        values = [0.1, 1.0 / 3.0, -2.5e-17]
        write_csv(path, ('index', 'value'), enumerate(values))
        assert_array_equal(read_vector(path), values)

    def test_read_vector_formats(self):
        npy = os.path.join(self.temp_dir.name, "v.npy")
        np.save(npy, np.array([1.0, 2.0]))
        assert_array_equal(read_vector(npy), [1.0, 2.0])

        js = os.path.join(self.temp_dir.name, "v.json")
        with open(js, 'w') as f:
            json.dump([3.0, 4.0], f)
        assert_array_equal(read_vector(js), [3.0, 4.0])

        txt = os.path.join(self.temp_dir.name, "v.txt")
        with open(txt, 'w') as f:
            f.write("# boundary data\n5.0\n\n6.0\n")
        assert_array_equal(read_vector(txt), [5.0, 6.0])


if __name__ == '__main__':
    unittest.main()
