"""
file_emitter.py

Append result records (verify checks, pca runs) to a JSONL file.

Records from the qlrap modules may still hold numpy scalars, small numpy
arrays, MetricTag values or complex numbers; these are converted on the way
out so callers can pass report dicts straight through. Keys are sorted so
two runs with the same seed produce identical files.
"""

import enum
import json
import pathlib
from typing import Any, Mapping

import numpy as np

from utils.utils_logger import logger


def _to_json(value: Any) -> Any:
    """json.dumps fallback for the non-JSON types qlrap records carry."""
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, np.ndarray):
        # complex entries come back through this hook one by one
        return value.tolist()
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def emit_record(record: Mapping[str, Any], *, path: pathlib.Path) -> bool:
    """
    Append one record as a JSON line.

    Returns:
        bool: True if write succeeded, False otherwise (including records
        holding values that cannot be encoded).
    """
    try:
        line = json.dumps(record, sort_keys=True, default=_to_json)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as f:
            f.write(line + "\n")
        logger.debug(f"Appended {record.get('check_name', 'record')} to {path}")
        return True
    except Exception as e:
        logger.error(f"File emit failed for {path}: {e}")
        return False
