"""Kernel backend selection.

The compiled extension is used when it imports; set ``DEMRI_EVAL_PURE=1``
to force the pure-Python fallback.
"""
import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("DEMRI_EVAL_PURE"):
        raise ImportError("pure backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"
_impl = BACKENDS[BACKEND]


def get_backend(name=None):
    return BACKENDS[name or BACKEND]


def flood_2d(elevation, markers, mask, backend=None):
    impl = get_backend(backend)
    return impl.flood_2d(
        np.ascontiguousarray(elevation, dtype=np.float64),
        np.ascontiguousarray(markers, dtype=np.int32),
        np.ascontiguousarray(mask, dtype=np.uint8),
    )


def directed_hausdorff_sq(a, b, backend=None):
    impl = get_backend(backend)
    return float(impl.directed_hausdorff_sq(
        np.ascontiguousarray(a, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
    ))


def glcm_counts(q, mask, dx, dy, levels, backend=None):
    impl = get_backend(backend)
    return impl.glcm_counts(
        np.ascontiguousarray(q, dtype=np.int32),
        np.ascontiguousarray(mask, dtype=np.uint8),
        int(dx), int(dy), int(levels),
    )
