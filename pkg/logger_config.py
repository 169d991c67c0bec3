"""Logging configuration for HTD LR Scheduler.

This module sets up Rich-enhanced logging with:
- Colorful console output on stderr (stdout is reserved for CSV)
- Optional file logging
- Rich tracebacks for better error debugging
"""

import logging
from pathlib import Path
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.traceback import install

LOGGER_NAME = "htd_scheduler"

_FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def get_logger() -> logging.Logger:
    """Return the project logger used by every module."""
    return logging.getLogger(LOGGER_NAME)


def setup_logging(
    level: int = logging.WARNING,
    log_file: Optional[str] = None,
    use_rich: bool = True,
) -> logging.Logger:
    """Set up logging with a Rich stderr handler and optional file handler.

    Args:
        level: Logging level (logging.DEBUG, logging.INFO, etc.)
        log_file: Optional path to log file for persistent logging
        use_rich: Whether to use Rich formatting (default: True)

    Returns:
        Configured logger instance
    """
    stderr_console = Console(stderr=True)
    if use_rich:
        install(console=stderr_console, show_locals=False)

    logger = get_logger()
    logger.setLevel(level)
    logger.propagate = False

    # setup_logging may run more than once per process (tests, CLI re-entry)
    logger.handlers.clear()

    if use_rich:
        console_handler: logging.Handler = RichHandler(
            console=stderr_console,
            rich_tracebacks=True,
            markup=False,
            show_time=True,
            show_level=True,
            show_path=False,
        )
    else:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(logging.Formatter(_FILE_FORMAT))

    console_handler.setLevel(level)
    logger.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_path)
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter(_FILE_FORMAT))
        logger.addHandler(file_handler)

    return logger
