"""
tests/test_logger.py

The loguru formatter and sink setup.

Usage:
  pytest -q tests/test_logger.py
"""

import datetime
import pathlib
from types import SimpleNamespace

import numpy as np

from utils import utils_logger
from utils.utils_logger import format_record, logger


def _record(message: str) -> dict:
    return {
        "message": message,
        "time": datetime.datetime(2024, 1, 2, 3, 4, 5),
        "level": SimpleNamespace(name="WARNING"),
    }


def test_format_record_is_one_escaped_line():
    matrix = np.eye(3)
    line = format_record(_record(f"sigma* = {matrix} for {{'rank_bound': 2}}"))
    assert line.count("\n") == 1
    assert line.startswith("2024-01-02 03:04:05 | WARNING | sigma* = [[1. 0. 0.] [0. 1. 0.] [0. 0. 1.]]")
    assert "{{'rank_bound': 2}}" in line


def test_format_record_hides_home_directory():
    home = pathlib.Path.home()
    line = format_record(_record(f"wrote {home / 'runs.jsonl'}"))
    assert str(home) not in line
    assert "~" in line


def test_configure_writes_file_sink(tmp_path: pathlib.Path):
    log_file = tmp_path / "nested" / "qlrap.log"
    try:
        utils_logger.configure(level="DEBUG", log_file=log_file)
        logger.debug("descent_oracle hs: d=4, R=2")
        logger.complete()
    finally:
        utils_logger.configure()

    text = log_file.read_text(encoding="utf-8")
    assert "| DEBUG | descent_oracle hs: d=4, R=2" in text
