"""Vectorised numpy implementations of the hot kernels.

Layout is HWC for activations and (kh, kw, cin, cout) for kernels; every
array is float64 and C-contiguous. The compiled module ``_ckernels`` exposes
the same functions with the same signatures.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _padded(x, pad_top, pad_left, need_h, need_w, fill=0.0):
    h, w, c = x.shape
    out = np.full((need_h, need_w, c), fill, dtype=np.float64)
    y0, x0 = max(pad_top, 0), max(pad_left, 0)
    sy, sx = max(-pad_top, 0), max(-pad_left, 0)
    hh = min(h - sy, need_h - y0)
    ww = min(w - sx, need_w - x0)
    if hh > 0 and ww > 0:
        out[y0:y0 + hh, x0:x0 + ww] = x[sy:sy + hh, sx:sx + ww]
    return out


def _windows(xp, kh, kw, stride, dilation, out_h, out_w):
    s0, s1, s2 = xp.strides
    return as_strided(
        xp,
        shape=(out_h, out_w, kh, kw, xp.shape[2]),
        strides=(s0 * stride, s1 * stride, s0 * dilation, s1 * dilation, s2),
        writeable=False,
    )


def conv2d_forward(x, w, stride, dilation, pad_top, pad_left, out_h, out_w):
    kh, kw, cin, cout = w.shape
    need_h = (out_h - 1) * stride + (kh - 1) * dilation + 1
    need_w = (out_w - 1) * stride + (kw - 1) * dilation + 1
    xp = _padded(x, pad_top, pad_left, need_h, need_w)
    cols = _windows(xp, kh, kw, stride, dilation, out_h, out_w).reshape(out_h * out_w, kh * kw * cin)
    y = cols @ w.reshape(kh * kw * cin, cout)
    return y.reshape(out_h, out_w, cout)


def conv2d_backward(x, w, gy, stride, dilation, pad_top, pad_left):
    """Return (grad_input, grad_kernel) for :func:`conv2d_forward`."""
    kh, kw, cin, cout = w.shape
    out_h, out_w, _ = gy.shape
    need_h = (out_h - 1) * stride + (kh - 1) * dilation + 1
    need_w = (out_w - 1) * stride + (kw - 1) * dilation + 1
    xp = _padded(x, pad_top, pad_left, need_h, need_w)
    cols = _windows(xp, kh, kw, stride, dilation, out_h, out_w).reshape(out_h * out_w, kh * kw * cin)
    gy2 = gy.reshape(out_h * out_w, cout)
    gw = (cols.T @ gy2).reshape(kh, kw, cin, cout)

    gcols = (gy2 @ w.reshape(kh * kw * cin, cout).T).reshape(out_h, out_w, kh, kw, cin)
    gxp = np.zeros((need_h, need_w, cin), dtype=np.float64)
    span_h = (out_h - 1) * stride + 1
    span_w = (out_w - 1) * stride + 1
    for ky in range(kh):
        for kx in range(kw):
            oy, ox = ky * dilation, kx * dilation
            gxp[oy:oy + span_h:stride, ox:ox + span_w:stride] += gcols[:, :, ky, kx]

    gx = np.zeros_like(x)
    h, wd, _ = x.shape
    y0, x0 = max(pad_top, 0), max(pad_left, 0)
    sy, sx = max(-pad_top, 0), max(-pad_left, 0)
    hh = min(h - sy, need_h - y0)
    ww = min(wd - sx, need_w - x0)
    if hh > 0 and ww > 0:
        gx[sy:sy + hh, sx:sx + ww] = gxp[y0:y0 + hh, x0:x0 + ww]
    return gx, gw


def maxpool_forward(x, window, stride, pad_top, pad_left, out_h, out_w):
    """Max over each window; also returns the flat argmax index into ``x``.

    Padding cells hold -inf so they never win. Ties go to the first cell in
    row-major window order.
    """
    h, w, c = x.shape
    need_h = (out_h - 1) * stride + window
    need_w = (out_w - 1) * stride + window
    xp = _padded(x, pad_top, pad_left, need_h, need_w, fill=-np.inf)
    win = _windows(xp, window, window, stride, 1, out_h, out_w).reshape(out_h, out_w, window * window, c)
    k = np.argmax(win, axis=2)
    y = np.take_along_axis(win, k[:, :, None, :], axis=2)[:, :, 0, :]
    ky, kx = np.divmod(k, window)
    oy = np.arange(out_h)[:, None, None]
    ox = np.arange(out_w)[None, :, None]
    iy = oy * stride + ky - pad_top
    ix = ox * stride + kx - pad_left
    ch = np.arange(c)[None, None, :]
    arg = (iy * w + ix) * c + ch
    return np.ascontiguousarray(y), arg.astype(np.int64)


def maxpool_backward(gy, arg, in_h, in_w, channels):
    gx = np.zeros(in_h * in_w * channels, dtype=np.float64)
    np.add.at(gx, arg.ravel(), gy.ravel())
    return gx.reshape(in_h, in_w, channels)


def _interp_matrix(lo, hi, frac, n_in):
    m = np.zeros((lo.shape[0], n_in), dtype=np.float64)
    rows = np.arange(lo.shape[0])
    np.add.at(m, (rows, lo), 1.0 - frac)
    np.add.at(m, (rows, hi), frac)
    return m


def upsample_forward(x, lo_h, hi_h, frac_h, lo_w, hi_w, frac_w):
    ah = _interp_matrix(lo_h, hi_h, frac_h, x.shape[0])
    aw = _interp_matrix(lo_w, hi_w, frac_w, x.shape[1])
    return np.einsum("ph,hwc,qw->pqc", ah, x, aw, optimize=True)


def upsample_backward(gy, lo_h, hi_h, frac_h, lo_w, hi_w, frac_w, in_h, in_w):
    ah = _interp_matrix(lo_h, hi_h, frac_h, in_h)
    aw = _interp_matrix(lo_w, hi_w, frac_w, in_w)
    return np.einsum("ph,pqc,qw->hwc", ah, gy, aw, optimize=True)
