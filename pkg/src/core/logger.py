"""
Logging configuration for the Maxwell edge element solver.

The CLI calls setup_logging() once; library modules only create
`logging.getLogger(__name__)` and never add handlers themselves.
"""

import logging
from datetime import datetime
from pathlib import Path

DEFAULT_LOG_DIR = Path.home() / ".maxwell_eem" / "logs"

_DETAILED_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
_CONSOLE_FORMAT = '%(levelname)s: %(message)s'


def log_file_path(log_dir=None, day=None):
    """Daily log file, e.g. ~/.maxwell_eem/logs/maxwell_eem_20250101.log."""
    day = day or datetime.now()
    return Path(log_dir or DEFAULT_LOG_DIR) / f"maxwell_eem_{day.strftime('%Y%m%d')}.log"


def setup_logging(log_level=logging.INFO, log_to_file=True, log_to_console=True, log_dir=None):
    """
    Configure the root logger.

    Warnings raised by numpy/scipy (e.g. a singular factor or an inefficient
    sparse update) are routed into the log as well.

    Args:
        log_level: Logging level (default: logging.INFO)
        log_to_file: Append to the daily log file
        log_to_console: Echo to stderr
        log_dir: Directory for log files (default: ~/.maxwell_eem/logs)

    Returns:
        logging.Logger: The configured root logger
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    if log_to_file:
        path = log_file_path(log_dir)
        path.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(path, encoding='utf-8', mode='a')
        file_handler.setFormatter(logging.Formatter(_DETAILED_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
        root_logger.addHandler(file_handler)

    if log_to_console:
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(logging.Formatter(_CONSOLE_FORMAT))
        root_logger.addHandler(console_handler)

    logging.captureWarnings(True)
    if log_to_file:
        root_logger.debug(f"日志文件: {path}")
    return root_logger
