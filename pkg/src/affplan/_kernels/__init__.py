"""Numeric kernel backends.

Two interchangeable implementations of the hot paths: a compiled Cython
extension (_ext) and a NumPy fallback (_py). The extension is preferred when
importable; set AFFPLAN_KERNELS=py or AFFPLAN_KERNELS=ext to force one.
"""

from __future__ import annotations

import os

from . import _py

_choice = os.environ.get("AFFPLAN_KERNELS", "").strip().lower()

if _choice == "py":
    _impl = _py
elif _choice == "ext":
    from . import _ext as _impl  # hard fail when forced but not built
elif _choice == "":
    try:
        from . import _ext as _impl
    except ImportError:
        _impl = _py
else:
    raise ValueError(
        f"AFFPLAN_KERNELS must be 'ext' or 'py', got {_choice!r}"
    )

BACKEND: str = _impl.BACKEND

attention_forward = _impl.attention_forward
attention_backward = _impl.attention_backward
squared_edt = _impl.squared_edt
masked_gaussian_smooth = _impl.masked_gaussian_smooth


def backend_name() -> str:
    """Name of the active kernel backend: 'ext' or 'py'."""
    return BACKEND
