"""Reduction backend selection.

Prefers the compiled extension; falls back to the pure-Python bitset
implementation. Set MEMLOOP_FORCE_PYTHON_REDUCE=1 to force the fallback
(used by the equivalence tests and the backend benchmark).
"""

from __future__ import annotations

import os

from . import _reduce_py

if os.environ.get("MEMLOOP_FORCE_PYTHON_REDUCE") == "1":
    _impl = _reduce_py
    BACKEND = "python"
else:
    try:
        from . import _fastreduce as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _reduce_py
        BACKEND = "python"

reduce_columns = _impl.reduce_columns


def backend_name() -> str:
    """Which reduction implementation is active: 'compiled' or 'python'."""
    return BACKEND
