"""Select the compiled simplex kernel when available, else the numpy fallback.

Set ``STATARB_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _simplex_py

BACKEND = "python"
if os.environ.get("STATARB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _simplex as _impl
    except ImportError:
        _impl = _simplex_py
    else:
        BACKEND = "cython"
else:
    _impl = _simplex_py

pivot = _impl.pivot
simplex_loop = _impl.simplex_loop

OPTIMAL = _simplex_py.OPTIMAL
UNBOUNDED = _simplex_py.UNBOUNDED
ITERATION_LIMIT = _simplex_py.ITERATION_LIMIT


def get_backend(name):
    """Return ``(pivot, simplex_loop)`` for ``"python"`` or ``"cython"``."""
    if name == "python":
        return _simplex_py.pivot, _simplex_py.simplex_loop
    if name == "cython":
        from . import _simplex

        return _simplex.pivot, _simplex.simplex_loop
    raise ValueError(f"unknown backend {name!r}")
