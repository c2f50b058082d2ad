"""
Logging configuration using loguru.

Console output is colored, an optional application log file is rotated and
compressed, and every run directory can carry its own ``run.log`` covering the
jobs that wrote into it.
"""

import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

from loguru import logger

CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | "
    "<level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | "
    "<level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss.SSS} | {level: <8} | {name}:{function}:{line} | {message}"

RUN_LOG_NAME = "run.log"


def setup_logging(
    log_level: str = "INFO",
    log_file: Optional[Path] = None,
    rotation: str = "10 MB",
    retention: str = "1 week",
    colorize: bool = True,
) -> None:
    """
    Configure application logging.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Path to log file. If None, only console logging is enabled
        rotation: Log file rotation size or time (e.g., "10 MB", "1 day")
        retention: How long to keep old log files (e.g., "1 week", "30 days")
        colorize: Whether to colorize console output
    """
    logger.remove()
    logger.add(sys.stderr, level=log_level, format=CONSOLE_FORMAT, colorize=colorize)

    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            str(log_file),
            level=log_level,
            format=FILE_FORMAT,
            rotation=rotation,
            retention=retention,
            compression="zip",
            enqueue=True,
        )
        logger.info(f"Logging to file: {log_file}")

    logger.debug(f"Logging initialized at {log_level} level")


@contextmanager
def run_log(run_dir: Path, level: str = "INFO") -> Iterator[str]:
    """
    Mirror log records into ``run_dir/run.log`` while the block runs.

    The file is appended to, so a later ``analyze`` continues the log of the
    ``simulate`` job that created the directory.

    Args:
        run_dir: Run directory (must exist)
        level: Lowest level written to the run log

    Yields:
        The log file name relative to ``run_dir``
    """
    sink_id = logger.add(str(Path(run_dir) / RUN_LOG_NAME), level=level, format=FILE_FORMAT)
    try:
        yield RUN_LOG_NAME
    finally:
        logger.remove(sink_id)


def get_logger(name: str = None):
    """
    Get a logger instance bound to a component name.

    Args:
        name: Component name (usually __name__)

    Returns:
        Logger instance from loguru
    """
    if name:
        return logger.bind(name=name)
    return logger
