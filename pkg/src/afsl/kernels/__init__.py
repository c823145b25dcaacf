"""K-means inner loops, compiled when available.

The compiled Cython extension is used when it imports; otherwise the numpy
implementation is used. Set ``AFSL_PURE_PYTHON=1`` to force the fallback.
Both backends produce bitwise identical results.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

__all__ = ["BACKEND", "available_backends", "get_backend",
           "assign_labels", "centroid_sums", "sequential_sum"]


def available_backends() -> list[str]:
    names = ["python"]
    if _ckernels is not None:
        names.insert(0, "compiled")
    return names


def get_backend(name: str | None = None) -> ModuleType:
    """Return the kernel module for ``name`` (``"compiled"`` or ``"python"``)."""
    if name is None:
        name = BACKEND
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        return _ckernels
    if name == "python":
        return _pykernels
    raise ValueError(f"unknown kernel backend {name!r}")


if _ckernels is not None and os.environ.get("AFSL_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

_active = get_backend(BACKEND)
assign_labels = _active.assign_labels
centroid_sums = _active.centroid_sums
sequential_sum = _active.sequential_sum
