"""Kernel backend selection.

The hot replica loops exist twice: a compiled Cython extension
(``_kernels``) and a pure-Python reference (``_kernels_py``).  The compiled
one is preferred when importable; set ``BCL_BACKEND=python`` to force the
fallback (any other value than ``python``/``compiled``/``auto`` is an
error).  Both produce bit-identical results, so the choice only affects
speed.

Trace/capture kernels are cold paths and always run on the Python backend.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built; pure Python still works
    _compiled = None


def _select():
    choice = os.environ.get("BCL_BACKEND", "auto").lower()
    if choice == "python":
        return _kernels_py, "python"
    if choice == "compiled":
        if _compiled is None:
            raise ImportError(
                "BCL_BACKEND=compiled but the beautycontest._kernels extension "
                "is not built (pip install -e . --no-build-isolation)"
            )
        return _compiled, "compiled"
    if choice == "auto":
        if _compiled is not None:
            return _compiled, "compiled"
        return _kernels_py, "python"
    raise ValueError(f"unrecognized BCL_BACKEND={choice!r}")


kernels, BACKEND_NAME = _select()

#: Python-only kernels (tracing, witness capture) regardless of backend.
trace_kernels = _kernels_py


def compiled_available() -> bool:
    return _compiled is not None
