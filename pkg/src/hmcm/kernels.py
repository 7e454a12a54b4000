"""Backend selection for the MCM kernels.

The compiled extension is used when it imports; otherwise, or when
``HMCM_PURE_PYTHON`` is set to a non-empty value, the NumPy fallback is used.
Both backends produce bit-identical results.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_compiled = None
if not os.environ.get("HMCM_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def compiled_available() -> bool:
    return _compiled is not None


def mcm_forward(h: np.ndarray, hier, backend: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    h = np.ascontiguousarray(h, dtype=np.float64)
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled.mcm_forward(h, hier.postorder, hier.parent_array)
    return _kernels_py.mcm_forward(h, hier.closure)


def mcm_backward(trace: np.ndarray, grad_out: np.ndarray, backend: str | None = None) -> np.ndarray:
    trace = np.ascontiguousarray(trace, dtype=np.int64)
    grad_out = np.ascontiguousarray(grad_out, dtype=np.float64)
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not built")
        return _compiled.mcm_backward(trace, grad_out)
    return _kernels_py.mcm_backward(trace, grad_out)
