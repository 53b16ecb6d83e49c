"""
Configuration management for the sinksource toolkit.
"""
import os
import yaml
import logging
from typing import Dict, Any, Optional
from sinksource.config.config_models import (
    LoggingConfig,
    MeshConfig,
    ForwardConfig,
    SpectralConfig,
    SolverConfig,
    CertifyConfig,
    HarnessConfig
)

logger = logging.getLogger(__name__)

# Singleton instance
_config_manager_instance = None

DEFAULT_CONFIG_PATH = 'toolkit_config.yaml'
CONFIG_PATH_ENV = 'SINKSOURCE_CONFIG_PATH'


class ConfigManager:
    """
    Loads the toolkit's YAML service configuration and exposes one
    specialized configuration object per section.
    """

    def __init__(self, service_config_path: Optional[str] = None):
        """
        Initialize the configuration manager.

        Args:
            service_config_path: Path to the service configuration file. Falls back
                to $SINKSOURCE_CONFIG_PATH and then to toolkit_config.yaml.
        """
        self.service_config_path = (service_config_path
                                    or os.environ.get(CONFIG_PATH_ENV)
                                    or DEFAULT_CONFIG_PATH)
        self.reload()

        logger.info(f"Configuration manager initialized with service config from {self.service_config_path}")

        # Register as singleton instance
        global _config_manager_instance
        _config_manager_instance = self

    def reload(self) -> None:
        """
        Reload configuration from file.

        Raises:
            ConfigError: If a section holds a value of the wrong type
        """
        self.service_config = self._load_yaml(self.service_config_path)
        self._init_specialized_configs()

    def _load_yaml(self, file_path: str) -> Dict[str, Any]:
        """
        Load a YAML file.

        Args:
            file_path: Path to the YAML file

        Returns:
            Parsed YAML content as dictionary (empty when missing or unreadable)
        """
        if not os.path.exists(file_path):
            logger.warning(f"Configuration file {file_path} not found, using defaults")
            return {}
        try:
            with open(file_path, 'r') as file:
                return yaml.safe_load(file) or {}
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Error loading configuration from {file_path}: {e}")
            return {}

    @classmethod
    def get_instance(cls) -> Optional['ConfigManager']:
        """
        Get the singleton instance of the ConfigManager.

        Returns:
            ConfigManager instance or None if not initialized
        """
        return _config_manager_instance

    @classmethod
    def initialize(cls, service_config_path: Optional[str] = None) -> 'ConfigManager':
        """
        Initialize the singleton instance of ConfigManager.

        Args:
            service_config_path: Path to service configuration file

        Returns:
            The singleton ConfigManager instance
        """
        global _config_manager_instance
        if _config_manager_instance is None:
            _config_manager_instance = cls(service_config_path)
        return _config_manager_instance

    def _init_specialized_configs(self):
        # Initialize specialized configuration objects
        self.logging_config = LoggingConfig.from_dict(self.service_config.get('logging', {}))
        self.mesh_config = MeshConfig.from_dict(self.service_config.get('mesh', {}))
        self.forward_config = ForwardConfig.from_dict(self.service_config.get('forward', {}))
        self.spectral_config = SpectralConfig.from_dict(self.service_config.get('spectral', {}))
        self.solver_config = SolverConfig.from_dict(self.service_config.get('solver', {}))
        self.certify_config = CertifyConfig.from_dict(self.service_config.get('certify', {}))
        self.harness_config = HarnessConfig.from_dict(self.service_config.get('harness', {}))

    def get_logging_config(self) -> LoggingConfig:
        """Get logging configuration."""
        return self.logging_config

    def get_mesh_config(self) -> MeshConfig:
        """Get mesh configuration."""
        return self.mesh_config

    def get_forward_config(self) -> ForwardConfig:
        """Get assembly and forward-matrix configuration."""
        return self.forward_config

    def get_spectral_config(self) -> SpectralConfig:
        """Get SVD and weight configuration."""
        return self.spectral_config

    def get_solver_config(self) -> SolverConfig:
        """Get solver tolerances."""
        return self.solver_config

    def get_certify_config(self) -> CertifyConfig:
        """Get certificate thresholds."""
        return self.certify_config

    def get_harness_config(self) -> HarnessConfig:
        """Get experiment harness configuration."""
        return self.harness_config

    def get_raw_config(self, section: str) -> Dict[str, Any]:
        """
        Get raw configuration for a specific section.

        Args:
            section: Configuration section name

        Returns:
            Raw configuration dictionary for the section
        """
        return self.service_config.get(section, {})
