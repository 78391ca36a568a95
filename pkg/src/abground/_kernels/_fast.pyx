# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometry kernels. Mirrors the pure backend exactly."""

from libc.math cimport floor as c_floor, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _cmax(double a, double b) nogil:
    return a if a > b else b


cdef inline double _cmin(double a, double b) nogil:
    return a if a < b else b


cdef inline double _iou(double ax1, double ay1, double ax2, double ay2,
                        double bx1, double by1, double bx2, double by2) nogil:
    cdef double iw = _cmin(ax2, bx2) - _cmax(ax1, bx1)
    cdef double ih = _cmin(ay2, by2) - _cmax(ay1, by1)
    cdef double inter, union_
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union_ = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union_ <= 0.0:
        return 0.0
    return inter / union_


def iou(double ax1, double ay1, double ax2, double ay2,
        double bx1, double by1, double bx2, double by2):
    """Intersection over union of two corner-form boxes; 0 when the union is empty."""
    return _iou(ax1, ay1, ax2, ay2, bx1, by1, bx2, by2)


def centered_iou(double ax1, double ay1, double ax2, double ay2,
                 double bx1, double by1, double bx2, double by2):
    """IoU after translating box b so both centers coincide (pure shape overlap)."""
    cdef double aw = ax2 - ax1
    cdef double ah = ay2 - ay1
    cdef double bw = bx2 - bx1
    cdef double bh = by2 - by1
    cdef double inter = _cmin(aw, bw) * _cmin(ah, bh)
    cdef double union_
    if inter <= 0.0:
        return 0.0
    union_ = aw * ah + bw * bh - inter
    if union_ <= 0.0:
        return 0.0
    return inter / union_


def center_distance(double ax1, double ay1, double ax2, double ay2,
                    double bx1, double by1, double bx2, double by2):
    """Euclidean distance between box centers."""
    cdef double dx = (ax1 + ax2) - (bx1 + bx2)
    cdef double dy = (ay1 + ay2) - (by1 + by2)
    return sqrt(dx * dx + dy * dy) / 2.0


def quantize_box(double x1, double y1, double x2, double y2,
                 double width, double height):
    """Map pixel corners onto the [0, 1000] grid via floor(coord / extent * 1000)."""
    cdef double kx = 1000.0 / width
    cdef double ky = 1000.0 / height
    return (
        min(<long> c_floor(x1 * kx), 1000),
        min(<long> c_floor(y1 * ky), 1000),
        min(<long> c_floor(x2 * kx), 1000),
        min(<long> c_floor(y2 * ky), 1000),
    )


def dequantize_box(long q1, long q2, long q3, long q4,
                   double width, double height):
    """Inverse grid mapping: q * extent / 1000, one rounding per component."""
    return ((q1 * width) / 1000.0, (q2 * height) / 1000.0,
            (q3 * width) / 1000.0, (q4 * height) / 1000.0)


def iou_matrix(a, b):
    """Pairwise IoU of two (n, 4) / (m, 4) corner arrays, as an (n, m) array."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] aa = np.ascontiguousarray(
        np.asarray(a, dtype=np.float64).reshape(-1, 4))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bb = np.ascontiguousarray(
        np.asarray(b, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = aa.shape[0]
    cdef Py_ssize_t m = bb.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, m), dtype=np.float64)
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = _iou(aa[i, 0], aa[i, 1], aa[i, 2], aa[i, 3],
                                 bb[j, 0], bb[j, 1], bb[j, 2], bb[j, 3])
    return out


def quantize_batch(boxes, double width, double height):
    """Vectorized quantize_box over an (n, 4) array; returns int64 (n, 4)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bx = np.ascontiguousarray(
        np.asarray(boxes, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = bx.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] out = np.empty((n, 4), dtype=np.int64)
    cdef double kx = 1000.0 / width
    cdef double ky = 1000.0 / height
    cdef Py_ssize_t i
    cdef long q
    with nogil:
        for i in range(n):
            q = <long> c_floor(bx[i, 0] * kx)
            out[i, 0] = q if q < 1000 else 1000
            q = <long> c_floor(bx[i, 1] * ky)
            out[i, 1] = q if q < 1000 else 1000
            q = <long> c_floor(bx[i, 2] * kx)
            out[i, 2] = q if q < 1000 else 1000
            q = <long> c_floor(bx[i, 3] * ky)
            out[i, 3] = q if q < 1000 else 1000
    return out


def dequantize_batch(qboxes, double width, double height):
    """Vectorized dequantize_box over an (n, 4) array; returns float64 (n, 4)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] qb = np.ascontiguousarray(
        np.asarray(qboxes, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = qb.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 4), dtype=np.float64)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i, 0] = (qb[i, 0] * width) / 1000.0
            out[i, 1] = (qb[i, 1] * height) / 1000.0
            out[i, 2] = (qb[i, 2] * width) / 1000.0
            out[i, 3] = (qb[i, 3] * height) / 1000.0
    return out
