"""Kernel backend selection.

The compiled extension is preferred when importable; set FERMIDYN_PURE=1
to force the pure-numpy fallback (useful for benchmarking and debugging).
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("FERMIDYN_PURE", "") not in ("", "0"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py


def backend_name() -> str:
    return kernels.BACKEND
