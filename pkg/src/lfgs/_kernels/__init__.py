"""Hot kernels with a compiled core and a pure-Python fallback.

The Cython extension ``_core`` is used when it imports; set
``LFGS_PURE_PYTHON=1`` to force the NumPy implementation.
"""

import os

from ._pycore import NONFINITE, MAX_ITER, OK, STAGNATION, canonical_norm, reduce_pair

if os.environ.get("LFGS_PURE_PYTHON"):
    _compiled = None
else:
    try:
        from . import _core as _compiled
    except ImportError:
        _compiled = None

if _compiled is not None:
    from ._core import expm, geodesic_point, midpoint, polar, shoot

    BACKEND = "cython"
else:
    from ._pycore import expm, geodesic_point, midpoint, polar, shoot

    BACKEND = "python"

__all__ = [
    "BACKEND",
    "MAX_ITER",
    "NONFINITE",
    "OK",
    "STAGNATION",
    "canonical_norm",
    "expm",
    "geodesic_point",
    "midpoint",
    "polar",
    "reduce_pair",
    "shoot",
]
