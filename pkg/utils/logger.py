"""
Logging utilities for the CHR confluence checker
"""

import logging
import os
from pathlib import Path

import colorlog

# Library modules log under these package loggers
PACKAGE_LOGGERS = ("core", "utils")


def _attach(logger: logging.Logger, level: int, log_dir: Path):
    console_handler = colorlog.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(
        colorlog.ColoredFormatter(
            '%(log_color)s%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%H:%M:%S',
            log_colors={
                'DEBUG': 'cyan',
                'INFO': 'white',
                'WARNING': 'yellow',
                'ERROR': 'red',
                'CRITICAL': 'red,bg_white',
            },
        )
    )
    logger.addHandler(console_handler)

    file_handler = logging.FileHandler(log_dir / "chr_confluence.log")
    file_handler.setLevel(logging.DEBUG)  # File gets all messages
    file_handler.setFormatter(
        logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S',
        )
    )
    logger.addHandler(file_handler)


def setup_logger(name: str = "ChrConfluence", log_level: str = "INFO") -> logging.Logger:
    """
    Set up a colored logger for the application and the library packages

    Args:
        name: Logger name
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Avoid duplicate handlers
    if logger.handlers:
        return logger

    level = getattr(logging, log_level.upper(), logging.INFO)

    logs_dir = Path(os.getenv("CHR_LOG_DIR", "logs"))
    logs_dir.mkdir(parents=True, exist_ok=True)

    for target in (name,) + PACKAGE_LOGGERS:
        package_logger = logging.getLogger(target)
        package_logger.setLevel(logging.DEBUG)
        package_logger.propagate = False
        _attach(package_logger, level, logs_dir)

    return logger


def get_logger(name: str = None) -> logging.Logger:
    """
    Get a logger instance with default setup

    Args:
        name: Logger name (optional)

    Returns:
        Logger instance
    """
    if name is None:
        name = "ChrConfluence"

    return setup_logger(name)


def set_level(log_level: str):
    """Change the console level of the application and library loggers"""
    level = getattr(logging, log_level.upper(), logging.INFO)
    for target in ("ChrConfluence",) + PACKAGE_LOGGERS:
        for handler in logging.getLogger(target).handlers:
            if not isinstance(handler, logging.FileHandler):
                handler.setLevel(level)
