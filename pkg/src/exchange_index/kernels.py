"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``EXCHANGE_INDEX_PURE_PYTHON=1`` is set, the numpy
fallback is used.  Both expose ``excess_demand``, ``excess_jacobian``,
``newton`` and ``continuation`` with identical signatures and status codes.
"""
import os

from . import _pykernels

OK = _pykernels.OK
NO_CONVERGENCE = _pykernels.NO_CONVERGENCE
LEFT_DOMAIN = _pykernels.LEFT_DOMAIN
BRANCH_LOST = _pykernels.BRANCH_LOST

if os.environ.get("EXCHANGE_INDEX_PURE_PYTHON") == "1":
    backend = _pykernels
else:
    try:
        from . import _ckernels as backend
    except ImportError:  # extension not built
        backend = _pykernels

BACKEND = "cython" if backend is not _pykernels else "python"


def available_backends():
    found = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
