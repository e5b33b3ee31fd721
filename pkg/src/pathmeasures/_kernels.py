"""Kernel backend selection.

The compiled ``_ckernels`` module is used when it was built; otherwise, or
when ``PATHMEASURES_PURE_PYTHON=1`` is set, the numpy fallback is used.
"""
import os

from . import _pykernels

if os.environ.get("PATHMEASURES_PURE_PYTHON") == "1":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

CONVERGED = _pykernels.CONVERGED
INFEASIBLE = _pykernels.INFEASIBLE
MAX_ITERATIONS = _pykernels.MAX_ITERATIONS

path_weights = _impl.path_weights
sinkhorn_log = _impl.sinkhorn_log


def backends():
    """Available kernel modules by name, for benchmarks and cross-checks."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
