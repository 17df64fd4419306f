"""
Centralized logging configuration for the Low Vision GUI Checker.

Every module gets its logger from setup_logger(). Console output goes to
stderr because stdout is reserved for reports, dumps and SVG overlays.
"""

import logging
import sys
from pathlib import Path
from typing import Optional, Union

DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# Root name shared by all checker loggers so the CLI can retune them at once
ROOT_LOGGER_NAME = "lowvis"


def _qualified(name: str) -> str:
    if name == ROOT_LOGGER_NAME or name.startswith(ROOT_LOGGER_NAME + "."):
        return name
    return f"{ROOT_LOGGER_NAME}.{name}"


def setup_logger(
    name: str,
    level: Union[int, str] = logging.INFO,
    log_file: Optional[Union[str, Path]] = None,
    log_format: Optional[str] = None,
) -> logging.Logger:
    """
    Set up and configure a module logger.

    Module loggers hang below the "lowvis" root logger and carry no
    handlers of their own unless a log file is requested; records propagate
    to the root handlers installed by configure_application_logging().

    Args:
        name: Logger name (usually __name__)
        level: Logging level (default: INFO)
        log_file: Optional path to a dedicated log file
        log_format: Optional custom log format

    Returns:
        Configured logger
    """
    if log_format is None:
        log_format = DEFAULT_FORMAT

    logger = logging.getLogger(_qualified(name))
    logger.setLevel(level)

    # Remove existing handlers to prevent duplicate logs
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    if log_file:
        if isinstance(log_file, str):
            log_file = Path(log_file)
        log_file.parent.mkdir(exist_ok=True, parents=True)

        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(log_format))
        logger.addHandler(file_handler)

    _ensure_root_handler()
    return logger


def _ensure_root_handler() -> None:
    root = logging.getLogger(ROOT_LOGGER_NAME)
    if not any(getattr(h, "_lowvis_console", False) for h in root.handlers):
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setFormatter(logging.Formatter(DEFAULT_FORMAT))
        console_handler._lowvis_console = True  # type: ignore[attr-defined]
        root.addHandler(console_handler)
    root.propagate = False


def configure_application_logging(
    log_level: Union[int, str] = logging.INFO,
    log_file: Optional[Union[str, Path]] = None,
) -> None:
    """
    Configure logging for the whole checker.

    Args:
        log_level: Level applied to the root checker logger and every
            module logger created so far
        log_file: Optional file receiving a copy of all checker records
    """
    _ensure_root_handler()
    root = logging.getLogger(ROOT_LOGGER_NAME)
    root.setLevel(log_level)

    for name, logger in logging.root.manager.loggerDict.items():
        if name.startswith(ROOT_LOGGER_NAME + ".") and isinstance(
            logger, logging.Logger
        ):
            logger.setLevel(log_level)

    if log_file:
        if isinstance(log_file, str):
            log_file = Path(log_file)
        log_file.parent.mkdir(exist_ok=True, parents=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(DEFAULT_FORMAT))
        root.addHandler(file_handler)
