"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is. Set ``VECMAP_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

_FORCE_PURE = os.environ.get("VECMAP_PURE_PYTHON", "").lower() not in ("", "0", "false", "no")

if _FORCE_PURE:
    _impl = _kernels_py
else:
    try:
        from . import _ext as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND
best_permutation_costs = _impl.best_permutation_costs
chamfer = _impl.chamfer
lsa_square = _impl.lsa_square


def available_backends():
    """Map backend name to module for every importable backend."""
    found = {"python": _kernels_py}
    try:
        from . import _ext
    except ImportError:
        pass
    else:
        found["cython"] = _ext
    return found
