# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: event-frame accumulation and bilinear resampling.

These mirror evtrack.accel.fallback with the same floating-point expression
order, so the two backends produce bit-identical output.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def accumulate_events(cnp.int64_t[::1] t,
                      cnp.int32_t[::1] x,
                      cnp.int32_t[::1] y,
                      cnp.int8_t[::1] p,
                      Py_ssize_t width,
                      Py_ssize_t height,
                      cnp.int64_t t_lo,
                      cnp.int64_t t_hi):
    """Build (pos_count, neg_count, recency) planes from time-sorted events.

    The caller slices the event arrays to the window [t_lo, t_hi] beforehand.
    Recency is (t - t_lo) / max(t_hi - t_lo, 1); sorted input makes the last
    write per pixel the most recent timestamp.
    """
    cdef Py_ssize_t n = t.shape[0]
    pos = np.zeros((height, width), dtype=np.float64)
    neg = np.zeros((height, width), dtype=np.float64)
    rec = np.zeros((height, width), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] pos_v = pos
    cdef cnp.float64_t[:, ::1] neg_v = neg
    cdef cnp.float64_t[:, ::1] rec_v = rec
    cdef double span = <double> (t_hi - t_lo) if t_hi > t_lo else 1.0
    cdef Py_ssize_t i, xi, yi
    for i in range(n):
        xi = x[i]
        yi = y[i]
        if p[i] > 0:
            pos_v[yi, xi] += 1.0
        else:
            neg_v[yi, xi] += 1.0
        rec_v[yi, xi] = (<double> (t[i] - t_lo)) / span
    return pos, neg, rec


def bilinear_resample(cnp.float64_t[:, ::1] src,
                      Py_ssize_t out_h,
                      Py_ssize_t out_w,
                      double scale_y,
                      double scale_x,
                      double off_y,
                      double off_x):
    """Sample src on the affine grid sensor = offset + (out + 0.5)*scale - 0.5.

    Out-of-bounds neighbours contribute zero (zero padding).
    """
    cdef Py_ssize_t src_h = src.shape[0]
    cdef Py_ssize_t src_w = src.shape[1]
    out = np.zeros((out_h, out_w), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out_v = out
    cdef Py_ssize_t i, j
    cdef double sx, sy, fx, fy, v00, v01, v10, v11, row0, row1
    cdef Py_ssize_t x0, y0, x1, y1
    for i in range(out_h):
        sy = off_y + (i + 0.5) * scale_y - 0.5
        y0 = <Py_ssize_t> floor(sy)
        fy = sy - y0
        y1 = y0 + 1
        for j in range(out_w):
            sx = off_x + (j + 0.5) * scale_x - 0.5
            x0 = <Py_ssize_t> floor(sx)
            fx = sx - x0
            x1 = x0 + 1
            v00 = src[y0, x0] if 0 <= y0 < src_h and 0 <= x0 < src_w else 0.0
            v01 = src[y0, x1] if 0 <= y0 < src_h and 0 <= x1 < src_w else 0.0
            v10 = src[y1, x0] if 0 <= y1 < src_h and 0 <= x0 < src_w else 0.0
            v11 = src[y1, x1] if 0 <= y1 < src_h and 0 <= x1 < src_w else 0.0
            row0 = v00 * (1.0 - fx) + v01 * fx
            row1 = v10 * (1.0 - fx) + v11 * fx
            out_v[i, j] = row0 * (1.0 - fy) + row1 * fy
    return out
