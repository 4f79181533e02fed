"""
Logging setup shared by the library and the CLI
"""

import logging
import sys

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
ROOT_LOGGER = "dls_sil"


def get_logger(name: str) -> logging.Logger:
    """Return a logger below the package root logger"""
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def setup_logging(level: int = logging.INFO) -> logging.Logger:
    """Attach a single stderr handler to the package logger"""
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    channel = logging.StreamHandler(sys.stderr)
    channel.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(channel)
    logger.propagate = False
    return logger
