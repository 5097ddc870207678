"""Pure-numpy versions of the compiled kernels.

Same floating-point expression order as accel._kernels, so results are
bit-identical between the two backends.
"""

import numpy as np


def accumulate_events(t, x, y, p, width, height, t_lo, t_hi):
    """Build (pos_count, neg_count, recency) planes from time-sorted events."""
    flat = y.astype(np.int64) * width + x.astype(np.int64)
    size = width * height
    pos = np.bincount(flat[p > 0], minlength=size).astype(np.float64)
    neg = np.bincount(flat[p < 0], minlength=size).astype(np.float64)
    rec = np.zeros(size, dtype=np.float64)
    span = float(t_hi - t_lo) if t_hi > t_lo else 1.0
    # in-order fancy assignment: the last (most recent) event per pixel wins
    rec[flat] = (t - t_lo).astype(np.float64) / span
    shape = (height, width)
    return pos.reshape(shape), neg.reshape(shape), rec.reshape(shape)


def bilinear_resample(src, out_h, out_w, scale_y, scale_x, off_y, off_x):
    """Sample src on the affine grid sensor = offset + (out + 0.5)*scale - 0.5."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    src_h, src_w = src.shape
    sy = off_y + (np.arange(out_h, dtype=np.float64) + 0.5) * scale_y - 0.5
    sx = off_x + (np.arange(out_w, dtype=np.float64) + 0.5) * scale_x - 0.5
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    y0 = y0[:, None]
    x0 = x0[None, :]
    y1 = y0 + 1
    x1 = x0 + 1

    def gather(yi, xi):
        valid = (yi >= 0) & (yi < src_h) & (xi >= 0) & (xi < src_w)
        vals = src[np.clip(yi, 0, src_h - 1), np.clip(xi, 0, src_w - 1)]
        return np.where(valid, vals, 0.0)

    v00 = gather(y0, x0)
    v01 = gather(y0, x1)
    v10 = gather(y1, x0)
    v11 = gather(y1, x1)
    row0 = v00 * (1.0 - fx) + v01 * fx
    row1 = v10 * (1.0 - fx) + v11 * fx
    return row0 * (1.0 - fy) + row1 * fy
