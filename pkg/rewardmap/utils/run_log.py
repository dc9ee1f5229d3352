import logging
import os
from datetime import datetime

PACKAGE_LOGGER = "rewardmap"
LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"


def get_logger(name: str) -> logging.Logger:
    """Module logger under the package logger, e.g. get_logger("reward_engine")"""
    return logging.getLogger(f"{PACKAGE_LOGGER}.{name}")


def configure_logging(log_dir: str = None, level: int = logging.INFO) -> str:
    """
    Attach a dated file handler to the package logger.

    Args:
        log_dir: Directory for log files (defaults to $LOG_DIR, then "logs")
        level: Logging level for the package logger

    Returns:
        Path of the log file
    """
    log_directory = log_dir or os.getenv("LOG_DIR", "logs")
    os.makedirs(log_directory, exist_ok=True)
    log_file = os.path.join(
        log_directory, f"rewardmap_{datetime.now().strftime('%Y%m%d')}.log"
    )

    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(level)
    logger.propagate = False  # Keep run logs out of the root logger

    # Re-configuring (e.g. replay inside one process) must not stack handlers
    for handler in list(logger.handlers):
        if isinstance(handler, logging.FileHandler):
            logger.removeHandler(handler)
            handler.close()

    file_handler = logging.FileHandler(log_file, encoding="utf-8")
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(file_handler)
    return log_file
