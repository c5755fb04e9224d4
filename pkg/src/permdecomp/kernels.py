"""Kernel selection: compiled extension when importable, numpy fallback otherwise.

Set ``PERMDECOMP_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("PERMDECOMP_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

objective = _impl.objective
local_improve = _impl.local_improve
brute_force = _impl.brute_force


def implementations() -> dict:
    """All importable kernel modules keyed by name (used by tests and benchmarks)."""
    impls = {"python": _kernels_py}
    try:
        from . import _kernels as compiled
    except ImportError:
        return impls
    impls["cython"] = compiled
    return impls
