"""Kernel dispatch: the compiled extension when importable, else the numpy version.

Set TGREV_PURE=1 to force the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("TGREV_PURE"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

ring_push = _impl.ring_push
multiset_keys = _impl.multiset_keys
unique_rows = _impl.unique_rows

__all__ = ["BACKEND", "ring_push", "multiset_keys", "unique_rows"]
