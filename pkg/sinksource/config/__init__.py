"""
Configuration package for the sinksource toolkit.
"""
from sinksource.config.config_models import (
    LoggingConfig,
    MeshConfig,
    ForwardConfig,
    SpectralConfig,
    SolverConfig,
    CertifyConfig,
    HarnessConfig,
)
from sinksource.config.config_manager import ConfigManager

__all__ = [
    'LoggingConfig',
    'MeshConfig',
    'ForwardConfig',
    'SpectralConfig',
    'SolverConfig',
    'CertifyConfig',
    'HarnessConfig',
    'ConfigManager',
]
