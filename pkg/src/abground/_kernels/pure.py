"""Pure-Python geometry kernels.

Fallback backend used when the compiled extension is unavailable. Scalar
kernels take corner coordinates as plain floats; batch kernels take
float64 numpy arrays of shape (n, 4) in (x1, y1, x2, y2) order.
"""

from __future__ import annotations

import math

import numpy as np


def iou(ax1, ay1, ax2, ay2, bx1, by1, bx2, by2):
    """Intersection over union of two corner-form boxes; 0 when the union is empty."""
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def centered_iou(ax1, ay1, ax2, ay2, bx1, by1, bx2, by2):
    """IoU after translating box b so both centers coincide (pure shape overlap)."""
    aw = ax2 - ax1
    ah = ay2 - ay1
    bw = bx2 - bx1
    bh = by2 - by1
    inter = min(aw, bw) * min(ah, bh)
    if inter <= 0.0:
        return 0.0
    union = aw * ah + bw * bh - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def center_distance(ax1, ay1, ax2, ay2, bx1, by1, bx2, by2):
    """Euclidean distance between box centers."""
    dx = (ax1 + ax2) - (bx1 + bx2)
    dy = (ay1 + ay2) - (by1 + by2)
    return math.hypot(dx, dy) / 2.0


def quantize_box(x1, y1, x2, y2, width, height):
    """Map pixel corners onto the [0, 1000] grid via floor(coord / extent * 1000)."""
    kx = 1000.0 / width
    ky = 1000.0 / height
    return (
        min(int(math.floor(x1 * kx)), 1000),
        min(int(math.floor(y1 * ky)), 1000),
        min(int(math.floor(x2 * kx)), 1000),
        min(int(math.floor(y2 * ky)), 1000),
    )


def dequantize_box(q1, q2, q3, q4, width, height):
    """Inverse grid mapping: q * extent / 1000, one rounding per component."""
    return ((q1 * width) / 1000.0, (q2 * height) / 1000.0,
            (q3 * width) / 1000.0, (q4 * height) / 1000.0)


def iou_matrix(a, b):
    """Pairwise IoU of two (n, 4) / (m, 4) corner arrays, as an (n, m) array."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=(inter > 0.0) & (union > 0.0))
    return out


def quantize_batch(boxes, width, height):
    """Vectorized quantize_box over an (n, 4) array; returns int64 (n, 4)."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    scale = np.array([1000.0 / width, 1000.0 / height] * 2)
    return np.minimum(np.floor(boxes * scale), 1000.0).astype(np.int64)


def dequantize_batch(qboxes, width, height):
    """Vectorized dequantize_box over an (n, 4) array; returns float64 (n, 4)."""
    qboxes = np.asarray(qboxes, dtype=np.float64).reshape(-1, 4)
    extents = np.array([float(width), float(height)] * 2)
    return (qboxes * extents) / 1000.0
