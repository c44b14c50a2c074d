"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it has been built;
otherwise the pure-Python twin is loaded.  Setting ``QBB_PURE_PYTHON=1``
forces the fallback.
"""

import os

if os.environ.get("QBB_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl
        BACKEND = "python"

flip_deltas = _impl.flip_deltas
descend = _impl.descend
anneal = _impl.anneal
tabu = _impl.tabu
node_bound = _impl.node_bound
search = getattr(_impl, "search", None)
HAS_SEARCH = search is not None

__all__ = ["BACKEND", "flip_deltas", "descend", "anneal", "tabu", "node_bound", "search", "HAS_SEARCH", "backends"]


def backends():
    """Map of every importable backend name to its module (for tests and benchmarks)."""
    from . import _kernels_py
    found = {"python": _kernels_py}
    try:
        from . import _kernels
        found["cython"] = _kernels
    except ImportError:
        pass
    return found
