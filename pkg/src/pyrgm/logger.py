"""
Logging helpers.

All modules get their logger through [`get_logger`][pyrgm.logger.get_logger].
Standard output is reserved for JSON, so the package logger writes to standard error.
The level is read from the `PYRGM_LOG_LEVEL` environment variable and can be raised from the command line.
"""

import logging
import os
import sys
from typing import Optional

LOG_LEVEL_ENV = "PYRGM_LOG_LEVEL"
"""Name of the environment variable holding the default log level."""

LOG_FORMAT = "%(asctime)s %(levelname)-8s %(name)s: %(message)s"
"""Format of every log record."""

_ROOT_NAME = "pyrgm"


def get_logger(name: str) -> logging.Logger:
    """
    Return a logger attached to the package logger.

    Arguments:
        name: Usually the `__name__` of the calling module.

    Returns:
        A logger whose records propagate to the `pyrgm` handler.
    """
    _ensure_handler()
    return logging.getLogger(name)


def set_verbosity(verbosity: int = 0, level: Optional[str] = None) -> None:
    """
    Set the package log level.

    Arguments:
        verbosity: Number of `-v` flags: 1 means INFO, 2 or more means DEBUG.
        level: An explicit level name, taking precedence over the environment variable.
    """
    _ensure_handler()
    root = logging.getLogger(_ROOT_NAME)
    if verbosity >= 2:
        root.setLevel(logging.DEBUG)
    elif verbosity == 1:
        root.setLevel(logging.INFO)
    else:
        root.setLevel(_level_from_name(level or os.environ.get(LOG_LEVEL_ENV, "WARNING")))


def _level_from_name(name: str) -> int:
    level = logging.getLevelName(name.upper())
    if isinstance(level, int):
        return level
    return logging.WARNING


def _ensure_handler() -> None:
    root = logging.getLogger(_ROOT_NAME)
    if root.handlers:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(_level_from_name(os.environ.get(LOG_LEVEL_ENV, "WARNING")))
