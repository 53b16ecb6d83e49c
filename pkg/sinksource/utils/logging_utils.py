"""
Logging utilities for the sinksource package.
"""
import logging
import sys
from logging.handlers import RotatingFileHandler
from typing import Dict, Any, Union
from sinksource.config.config_models import LoggingConfig


def configure_logging(config: Union[Dict[str, Any], LoggingConfig]) -> None:
    """
    Configure logging based on provided configuration.

    Args:
        config: Logging configuration (either a dictionary or LoggingConfig object)
    """
    # Handle both dictionary and LoggingConfig objects
    if isinstance(config, dict):
        config = LoggingConfig.from_dict(config)

    level = config.level.upper()
    log_level = getattr(logging, level, logging.INFO)

    handlers = [logging.StreamHandler(sys.stdout)]

    # Add a size-rotated file handler if a log file is specified
    if config.file:
        handlers.append(RotatingFileHandler(config.file,
                                            maxBytes=config.max_size,
                                            backupCount=config.backup_count))

    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True
    )

    logger = logging.getLogger(__name__)
    logger.debug(f"Logging configured with level: {level}")
