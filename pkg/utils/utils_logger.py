"""
Logger Setup
File: utils/utils_logger.py

One loguru logger for every qlrap module.

- File sink: logs/project_log.log (folder from QLRAP_LOG_DIR), rotated at 50 kB.
- Console sink: stderr. Stdout is reserved for command reports.
- Level from QLRAP_LOG_LEVEL (default INFO).

Records are written one per line: numpy arrays and report dicts that
print across several lines are flattened, and the home directory is
shown as "~" so shared logs do not carry local paths.
"""

#####################################
# Import Modules
#####################################

import os
import pathlib
import sys
from typing import Any, Mapping

from loguru import logger

#####################################
# Default Configurations
#####################################

LOG_FOLDER: pathlib.Path = pathlib.Path(os.getenv("QLRAP_LOG_DIR", "logs"))
LOG_FILE: pathlib.Path = LOG_FOLDER.joinpath("project_log.log")

# read directly: utils_config imports this module
LOG_LEVEL: str = os.getenv("QLRAP_LOG_LEVEL", "INFO").upper()

#####################################
# Formatting
#####################################


def format_record(record: Mapping[str, Any]) -> str:
    """Single-line 'time | LEVEL | message' with braces escaped for loguru."""
    message = " ".join(str(record["message"]).split())
    message = message.replace(str(pathlib.Path.home()), "~")
    # the returned string is used as a format template
    message = message.replace("{", "{{").replace("}", "}}")
    time_str = record["time"].strftime("%Y-%m-%d %H:%M:%S")
    return f"{time_str} | {record['level'].name} | {message}\n"


def configure(level: str = LOG_LEVEL, log_file: pathlib.Path = LOG_FILE) -> None:
    """Replace all sinks with the qlrap file and stderr sinks."""
    logger.remove()
    try:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        logger.add(log_file, level=level, rotation="50 kB", retention=1, enqueue=True, format=format_record)
    except Exception as e:
        sys.stderr.write(f"Log file {log_file} unavailable, logging to stderr only: {e}\n")
    logger.add(sys.stderr, level=level, enqueue=True, format=format_record)


configure()
