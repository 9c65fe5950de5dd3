"""Numba acceleration with a pure-Python fallback.

The hot simulation loop and the scalar control-law helpers are written once
and decorated with :func:`maybe_njit`.  Which backend runs is decided at
import time from the ``DPCSIM_NUMBA`` environment variable:

* ``1`` / ``true``  -- require numba; raise if it cannot be imported
* ``0`` / ``false`` -- pure-Python loop (useful for debugging / profiling)
* unset / ``auto``  -- use numba when importable, fall back silently

Both backends execute the same source in the same order, so traces are
bit-identical between them (checked by the benchmark and the test suite).
"""
from __future__ import annotations

import os

_flag = os.environ.get("DPCSIM_NUMBA", "auto").strip().lower()
if _flag in ("1", "true", "yes", "on"):
    import numba  # hard requirement when forced on

    HAS_NUMBA = True
elif _flag in ("0", "false", "no", "off"):
    HAS_NUMBA = False
else:
    try:
        import numba

        HAS_NUMBA = True
    except ImportError:
        HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "python"


def active_backend() -> str:
    """Name of the loop backend selected at import time."""
    return BACKEND


def maybe_njit(func):
    """Compile with numba when enabled, otherwise return ``func`` unchanged."""
    if HAS_NUMBA:
        return numba.njit(cache=True, nogil=True)(func)
    return func
