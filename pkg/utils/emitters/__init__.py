"""
utils/emitters/__init__.py

Emitters write command results from a source to one or more sinks.

- A *source* produces a result (a solve report, a verify summary, a sweep).
- A *sink* stores that result (a JSONL file, a CSV table, a DuckDB database).
- An *emitter* is the callable bridge between the two.

This package provides three emitter modules:
- file_emitter.py    - append one JSON record per line to a local file
- csv_emitter.py     - write a tabular result with a "# key=value" preamble
- duckdb_emitter.py  - insert summary records into a DuckDB table

Choose an emitter based on purpose:
- file: simplest, always works, easy to diff between runs
- csv: sweeps and optimizer histories, readable by any plotting tool
- duckdb: accumulate verify runs and query them with SQL

Every emitter returns True on success and False on failure.
Failures are logged, never raised.
"""

from . import csv_emitter
from . import duckdb_emitter
from . import file_emitter

__all__ = [
    "file_emitter",
    "csv_emitter",
    "duckdb_emitter",
]
