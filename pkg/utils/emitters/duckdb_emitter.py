"""
duckdb_emitter.py

Emit summary records into a DuckDB database.

DuckDB is an in-process OLAP engine, so verify runs can be
accumulated in one file and compared with plain SQL, e.g.

    SELECT check_name, min(worst_margin) FROM oracle_reports GROUP BY 1;

Each row keeps a few indexed columns plus the full record as JSON text.
"""
from __future__ import annotations

import json
import pathlib
from typing import Any, Mapping

from utils.utils_logger import logger

try:
    import duckdb
except Exception as e:  # pragma: no cover
    duckdb = None
    _import_err = e
else:
    _import_err = None


def _table_sql(table: str) -> str:
    return f"""
CREATE TABLE IF NOT EXISTS {table} (
    recorded_at TIMESTAMP DEFAULT current_timestamp,
    check_name TEXT,
    metric TEXT,
    dim INTEGER,
    rank_bound INTEGER,
    passed BOOLEAN,
    worst_margin DOUBLE,
    payload TEXT
);
"""


def emit_record(
    record: Mapping[str, Any],
    *,
    db_path: pathlib.Path,
    table: str = "oracle_reports",
) -> bool:
    """
    Insert one summary record into DuckDB.

    Args:
        record: Dict-like payload. Missing indexed columns are stored as NULL.
        db_path: Path to the DuckDB file (*.duckdb).
        table: Target table, created on first use.

    Returns:
        True on success, False on failure.
    """
    if duckdb is None:
        logger.error(f"[duckdb_emitter] duckdb not installed: {_import_err}")
        return False

    if not table.isidentifier():
        logger.error(f"[duckdb_emitter] invalid table name: {table!r}")
        return False

    try:
        db_path.parent.mkdir(parents=True, exist_ok=True)
        con = duckdb.connect(database=str(db_path), read_only=False)
        try:
            con.execute(_table_sql(table))
            worst = record.get("worst_margin")
            dim = record.get("dim")
            rank_bound = record.get("rank_bound")
            passed = record.get("passed")
            con.execute(
                f"""
                INSERT INTO {table} (
                    check_name, metric, dim, rank_bound, passed,
                    worst_margin, payload
                ) VALUES (?, ?, ?, ?, ?, ?, ?)
                """,
                (
                    record.get("check_name"),
                    record.get("metric"),
                    None if dim is None else int(dim),
                    None if rank_bound is None else int(rank_bound),
                    None if passed is None else bool(passed),
                    None if worst is None else float(worst),
                    json.dumps(record, sort_keys=True, default=str),
                ),
            )
            logger.debug(f"[duckdb_emitter] inserted record into {db_path}")
            return True
        finally:
            con.close()
    except Exception as e:
        logger.error(f"[duckdb_emitter] failed to insert into {db_path}: {e}")
        return False
