"""Trace serialization: CSV with exact float round-trip.

Columns are fixed and documented (`dpcsim._kernel.COLUMNS`); every value is
written with ``%.17g``, which round-trips IEEE double exactly, so a file
parsed back yields bit-identical arrays.  Missing diagnostics (e.g. the
estimate columns on a non-adaptive run) are ``nan`` cells.
"""
from __future__ import annotations

import numpy as np

from ._kernel import COLUMNS

FLOAT_FORMAT = "%.17g"


def write_trace_csv(trace, path) -> None:
    """Write a trace (or any object with a ``.data`` (n, 19) array) to CSV."""
    data = trace.data if hasattr(trace, "data") else np.asarray(trace, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(COLUMNS):
        raise ValueError(f"expected an (n, {len(COLUMNS)}) array, got shape {data.shape}")
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",",
               header=",".join(COLUMNS), comments="")


def read_trace_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Read a trace CSV, returning ``(column_names, (n, 19) float array)``."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
    columns = tuple(header.split(","))
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != len(columns):
        raise ValueError(
            f"column count mismatch: header names {len(columns)}, rows carry {data.shape[1]}")
    return columns, data


def column_index(columns: tuple[str, ...], name: str) -> int:
    try:
        return columns.index(name)
    except ValueError:
        raise KeyError(f"trace file has no column {name!r} (columns: {', '.join(columns)})")
