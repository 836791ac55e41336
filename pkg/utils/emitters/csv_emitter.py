"""
csv_emitter.py

Emit a pandas DataFrame to a CSV file preceded by a commented preamble.

The preamble records the run parameters, one "# key=value" line each,
so a sweep file is self-describing. Floats are written with 12
significant digits.

Read the file back with pandas.read_csv(path, comment="#").
"""

import pathlib
from typing import Any, Mapping

import pandas as pd

from utils.utils_logger import logger

FLOAT_FORMAT = "%.12g"


def emit_frame(
    frame: pd.DataFrame,
    *,
    path: pathlib.Path,
    preamble: Mapping[str, Any] | None = None,
) -> bool:
    """
    Write a DataFrame to CSV, overwriting any previous file.

    Args:
        frame: The table to write. The index is not written.
        path: Destination CSV file.
        preamble: Optional run parameters written as comment lines.

    Returns:
        bool: True if write succeeded, False otherwise.
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as f:
            for key, value in (preamble or {}).items():
                f.write(f"# {key}={value}\n")
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        logger.debug(f"Wrote {len(frame)} rows to {path}")
        return True
    except Exception as e:
        logger.error(f"CSV emit failed: {e}")
        return False
