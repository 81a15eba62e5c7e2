"""Backend selection for the hot loops.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is loaded. Set ``TRAJALIGN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

if os.environ.get("TRAJALIGN_PURE_PYTHON", "0") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = _impl.BACKEND
fnv1a64 = _impl.fnv1a64
xoshiro_fill = _impl.xoshiro_fill
pairwise_euclidean = _impl.pairwise_euclidean
nearest_neighbors = _impl.nearest_neighbors


def available_backends():
    """Return ``{name: module}`` for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
