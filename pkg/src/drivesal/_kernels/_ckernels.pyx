# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; drop-in for ``_pykernels``.

Convolutions gather patches in C and multiply with BLAS dgemm. Pooling and
upsampling are direct loops.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY
from libc.string cimport memcpy, memset
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef void _im2col(const double[:, :, ::1] x, double* cols, Py_ssize_t kh, Py_ssize_t kw,
                  int stride, int dilation, int pad_top, int pad_left,
                  Py_ssize_t out_h, Py_ssize_t out_w) noexcept nogil:
    """Rows are output pixels; columns run over (ky, kx, ci). Padding reads as 0."""
    cdef Py_ssize_t h = x.shape[0], wd = x.shape[1], cin = x.shape[2]
    cdef Py_ssize_t oy, ox, ky, kx, ci, iy, ix
    cdef double* dst = cols
    for oy in range(out_h):
        for ox in range(out_w):
            for ky in range(kh):
                iy = oy * stride - pad_top + ky * dilation
                for kx in range(kw):
                    ix = ox * stride - pad_left + kx * dilation
                    if iy < 0 or iy >= h or ix < 0 or ix >= wd:
                        memset(dst, 0, cin * sizeof(double))
                    else:
                        memcpy(dst, &x[iy, ix, 0], cin * sizeof(double))
                    dst += cin


cdef void _gemm_rm(char* ta, char* tb, int m, int n, int k, const double* a, int lda,
                   const double* b, int ldb, double* c, int ldc) noexcept nogil:
    """Column-major dgemm ``C = op(A) op(B)`` with alpha 1, beta 0."""
    cdef double one = 1.0, zero = 0.0
    dgemm(ta, tb, &m, &n, &k, &one, <double*>a, &lda, <double*>b, &ldb, &zero, c, &ldc)


def conv2d_forward(const double[:, :, ::1] x, const double[:, :, :, ::1] w,
                   int stride, int dilation, int pad_top, int pad_left,
                   int out_h, int out_w):
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1], cin = w.shape[2], cout = w.shape[3]
    cdef int M = out_h * out_w, K = <int>(kh * kw * cin), N = <int>cout
    cols_arr = np.empty((M, K), dtype=np.float64)
    y_arr = np.empty((out_h, out_w, cout), dtype=np.float64)
    cdef double[:, ::1] cols = cols_arr
    cdef double[:, :, ::1] y = y_arr
    if M == 0 or N == 0:
        return y_arr
    with nogil:
        _im2col(x, &cols[0, 0], kh, kw, stride, dilation, pad_top, pad_left, out_h, out_w)
        # row-major Y[M,N] = cols[M,K] @ W[K,N]  <=>  column-major Y^T = W^T cols^T
        _gemm_rm(b"N", b"N", N, M, K, &w[0, 0, 0, 0], N, &cols[0, 0], K, &y[0, 0, 0], N)
    return y_arr


def conv2d_backward(const double[:, :, ::1] x, const double[:, :, :, ::1] w,
                    const double[:, :, ::1] gy, int stride, int dilation,
                    int pad_top, int pad_left):
    cdef Py_ssize_t h = x.shape[0], wd = x.shape[1], cin = x.shape[2]
    cdef Py_ssize_t kh = w.shape[0], kw = w.shape[1], cout = w.shape[3]
    cdef Py_ssize_t out_h = gy.shape[0], out_w = gy.shape[1]
    cdef int M = <int>(out_h * out_w), K = <int>(kh * kw * cin), N = <int>cout
    gx_arr = np.zeros((h, wd, cin), dtype=np.float64)
    gw_arr = np.zeros((kh, kw, cin, cout), dtype=np.float64)
    if M == 0 or N == 0:
        return gx_arr, gw_arr
    cols_arr = np.empty((M, K), dtype=np.float64)
    gcols_arr = np.empty((M, K), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[:, ::1] cols = cols_arr
    cdef double[:, ::1] gcols = gcols_arr
    cdef Py_ssize_t oy, ox, ky, kx, ci, iy, ix
    cdef const double* src
    with nogil:
        _im2col(x, &cols[0, 0], kh, kw, stride, dilation, pad_top, pad_left, out_h, out_w)
        # gW[K,N] = cols^T @ gy
        _gemm_rm(b"N", b"T", N, K, M, &gy[0, 0, 0], N, &cols[0, 0], K, &gw[0, 0, 0, 0], N)
        # gcols[M,K] = gy @ W^T
        _gemm_rm(b"T", b"N", K, M, N, &w[0, 0, 0, 0], N, &gy[0, 0, 0], N, &gcols[0, 0], K)
        src = &gcols[0, 0]
        for oy in range(out_h):
            for ox in range(out_w):
                for ky in range(kh):
                    iy = oy * stride - pad_top + ky * dilation
                    for kx in range(kw):
                        ix = ox * stride - pad_left + kx * dilation
                        if iy >= 0 and iy < h and ix >= 0 and ix < wd:
                            for ci in range(cin):
                                gx[iy, ix, ci] += src[ci]
                        src += cin
    return gx_arr, gw_arr


def maxpool_forward(const double[:, :, ::1] x, int window, int stride,
                    int pad_top, int pad_left, int out_h, int out_w):
    cdef Py_ssize_t h = x.shape[0], wd = x.shape[1], c = x.shape[2]
    y_arr = np.empty((out_h, out_w, c), dtype=np.float64)
    arg_arr = np.empty((out_h, out_w, c), dtype=np.int64)
    cdef double[:, :, ::1] y = y_arr
    cdef cnp.int64_t[:, :, ::1] arg = arg_arr
    cdef Py_ssize_t oy, ox, ky, kx, ch, iy, ix, best_i
    cdef double best, v
    with nogil:
        for oy in range(out_h):
            for ox in range(out_w):
                for ch in range(c):
                    best = -INFINITY
                    best_i = -1
                    for ky in range(window):
                        iy = oy * stride - pad_top + ky
                        if iy < 0 or iy >= h:
                            continue
                        for kx in range(window):
                            ix = ox * stride - pad_left + kx
                            if ix < 0 or ix >= wd:
                                continue
                            v = x[iy, ix, ch]
                            if best_i < 0 or v > best:
                                best = v
                                best_i = (iy * wd + ix) * c + ch
                    y[oy, ox, ch] = best
                    arg[oy, ox, ch] = best_i
    return y_arr, arg_arr


def maxpool_backward(const double[:, :, ::1] gy, const cnp.int64_t[:, :, ::1] arg,
                     int in_h, int in_w, int channels):
    gx_arr = np.zeros(in_h * in_w * channels, dtype=np.float64)
    cdef double[::1] gx = gx_arr
    cdef Py_ssize_t oy, ox, ch
    with nogil:
        for oy in range(gy.shape[0]):
            for ox in range(gy.shape[1]):
                for ch in range(gy.shape[2]):
                    gx[arg[oy, ox, ch]] += gy[oy, ox, ch]
    return gx_arr.reshape(in_h, in_w, channels)


def upsample_forward(const double[:, :, ::1] x,
                     const cnp.int64_t[::1] lo_h, const cnp.int64_t[::1] hi_h, const double[::1] frac_h,
                     const cnp.int64_t[::1] lo_w, const cnp.int64_t[::1] hi_w, const double[::1] frac_w):
    cdef Py_ssize_t oh = lo_h.shape[0], ow = lo_w.shape[0], c = x.shape[2]
    y_arr = np.empty((oh, ow, c), dtype=np.float64)
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t p, q, ch
    cdef double fy, fx
    with nogil:
        for p in range(oh):
            fy = frac_h[p]
            for q in range(ow):
                fx = frac_w[q]
                for ch in range(c):
                    y[p, q, ch] = ((1.0 - fy) * ((1.0 - fx) * x[lo_h[p], lo_w[q], ch] + fx * x[lo_h[p], hi_w[q], ch])
                                   + fy * ((1.0 - fx) * x[hi_h[p], lo_w[q], ch] + fx * x[hi_h[p], hi_w[q], ch]))
    return y_arr


def upsample_backward(const double[:, :, ::1] gy,
                      const cnp.int64_t[::1] lo_h, const cnp.int64_t[::1] hi_h, const double[::1] frac_h,
                      const cnp.int64_t[::1] lo_w, const cnp.int64_t[::1] hi_w, const double[::1] frac_w,
                      int in_h, int in_w):
    cdef Py_ssize_t oh = gy.shape[0], ow = gy.shape[1], c = gy.shape[2]
    gx_arr = np.zeros((in_h, in_w, c), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t p, q, ch
    cdef double fy, fx, g
    with nogil:
        for p in range(oh):
            fy = frac_h[p]
            for q in range(ow):
                fx = frac_w[q]
                for ch in range(c):
                    g = gy[p, q, ch]
                    gx[lo_h[p], lo_w[q], ch] += (1.0 - fy) * (1.0 - fx) * g
                    gx[lo_h[p], hi_w[q], ch] += (1.0 - fy) * fx * g
                    gx[hi_h[p], lo_w[q], ch] += fy * (1.0 - fx) * g
                    gx[hi_h[p], hi_w[q], ch] += fy * fx * g
    return gx_arr
