"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python
backend is the fallback. ``ABGROUND_KERNELS=pure`` (or ``compiled``)
forces a backend, which the benchmark suite uses to compare both.
"""

from __future__ import annotations

import os

from . import pure as _pure

_forced = os.environ.get("ABGROUND_KERNELS", "").strip().lower()

if _forced == "pure":
    _impl = _pure
    BACKEND = "pure"
elif _forced == "compiled":
    from . import _fast as _impl  # hard import: surface the error when forced

    BACKEND = "compiled"
else:
    try:
        from . import _fast as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

iou = _impl.iou
centered_iou = _impl.centered_iou
center_distance = _impl.center_distance
quantize_box = _impl.quantize_box
dequantize_box = _impl.dequantize_box
iou_matrix = _impl.iou_matrix
quantize_batch = _impl.quantize_batch
dequantize_batch = _impl.dequantize_batch

__all__ = [
    "BACKEND",
    "iou",
    "centered_iou",
    "center_distance",
    "quantize_box",
    "dequantize_box",
    "iou_matrix",
    "quantize_batch",
    "dequantize_batch",
]
