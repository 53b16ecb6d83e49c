#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Unit tests for the configuration models and manager.
"""

import os
import tempfile
import unittest
from unittest.mock import patch

import yaml

from sinksource.config.config_manager import CONFIG_PATH_ENV, ConfigManager
from sinksource.config.config_models import HarnessConfig, LoggingConfig, SolverConfig, SpectralConfig
from sinksource.errors import ConfigError


class TestConfigModels(unittest.TestCase):
    """Test cases for the configuration dataclasses."""

    def test_defaults(self):
        solver = SolverConfig.from_dict({})
        self.assertEqual(solver.max_iter, 200000)
        self.assertEqual(solver.tol_feas, 1e-9)
        self.assertFalse(solver.trace)
        harness = HarnessConfig.from_dict(None)
        self.assertEqual(harness.morozov_eta, 1.1)
        self.assertEqual(harness.points_per_decade, 25)

    def test_values_are_coerced(self):
        spectral = SpectralConfig.from_dict({'rank_tol': '1e-8', 'k': '20'})
        self.assertEqual(spectral.rank_tol, 1e-8)
        self.assertEqual(spectral.k, 20)

    def test_wrong_type_raises(self):
        with self.assertRaises(ConfigError):
            SolverConfig.from_dict({'max_iter': 'many'})
        with self.assertRaises(ConfigError):
            SolverConfig.from_dict({'trace': 'yes'})


class TestConfigManager(unittest.TestCase):
    """Test cases for ConfigManager."""

    def setUp(self):
        """Set up test fixtures."""
        self.temp_dir = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.temp_dir.name, "toolkit_config.yaml")
        with open(self.path, 'w') as f:
            yaml.dump({'logging': {'level': 'DEBUG'},
                       'solver': {'max_iter': 500},
                       'harness': {'seed': 7, 'examples': {'2': {'divisions': 4}}}}, f)

    def tearDown(self):
        """Tear down test fixtures."""
        self.temp_dir.cleanup()

    def test_sections_loaded(self):
        manager = ConfigManager(self.path)
        self.assertEqual(manager.get_logging_config().level, 'DEBUG')
        self.assertEqual(manager.get_solver_config().max_iter, 500)
        self.assertEqual(manager.get_solver_config().dual_tol, 1e-8)
        self.assertEqual(manager.get_harness_config().seed, 7)
        self.assertEqual(manager.get_harness_config().examples, {'2': {'divisions': 4}})
        self.assertEqual(manager.get_raw_config('solver'), {'max_iter': 500})
        self.assertIs(ConfigManager.get_instance(), manager)

    def test_missing_file_gives_defaults(self):
        manager = ConfigManager(os.path.join(self.temp_dir.name, "absent.yaml"))
        self.assertEqual(manager.get_logging_config(), LoggingConfig())
        self.assertEqual(manager.get_certify_config().ortho_tol, 0.05)

    def test_environment_variable(self):
        with patch.dict(os.environ, {CONFIG_PATH_ENV: self.path}):
            manager = ConfigManager()
        self.assertEqual(manager.service_config_path, self.path)
        self.assertEqual(manager.get_harness_config().seed, 7)

    def test_bad_value_in_file_raises(self):
        with open(self.path, 'w') as f:
            yaml.dump({'spectral': {'floor_tol': 'tiny'}}, f)
        with self.assertRaises(ConfigError):
            ConfigManager(self.path)

    def test_reload(self):
        manager = ConfigManager(self.path)
        with open(self.path, 'w') as f:
            yaml.dump({'solver': {'max_iter': 9}}, f)
        manager.reload()
        self.assertEqual(manager.get_solver_config().max_iter, 9)


if __name__ == '__main__':
    unittest.main()
