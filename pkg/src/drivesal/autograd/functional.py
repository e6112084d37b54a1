"""Differentiable network primitives on HWC tensors.

Spatial operators take a single image laid out as ``[H, W, C]``; there is no
batch axis. Convolution kernels are ``[kh, kw, cin, cout]``.
"""

import math

import numpy as np

from .. import _kernels as K
from ..errors import ArgumentError, DimensionError
from .tensor import Tensor, _as_tensor


def _geometry(n, k_eff, stride, padding):
    """Output extent and leading pad for one spatial axis."""
    if padding == "valid":
        if n < k_eff:
            raise DimensionError(f"window extent {k_eff} exceeds input extent {n}")
        return (n - k_eff) // stride + 1, 0
    if padding == "same":
        out = -(-n // stride)
        total = max((out - 1) * stride + k_eff - n, 0)
        return out, total // 2
    raise ArgumentError(f"padding must be 'same' or 'valid', got {padding!r}")


def effective_extent(k, dilation):
    """Extent covered by a kernel of size ``k`` at the given dilation."""
    return k + (k - 1) * (dilation - 1)


def conv2d(x, kernel, stride=1, dilation=1, padding="same"):
    x, kernel = _as_tensor(x), _as_tensor(kernel)
    if x.ndim != 3 or kernel.ndim != 4:
        raise DimensionError(f"conv2d expects [H,W,C] input and 4-d kernel, got {x.shape}, {kernel.shape}")
    kh, kw, cin, cout = kernel.shape
    if x.shape[2] != cin:
        raise DimensionError(f"input has {x.shape[2]} channels, kernel expects {cin}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ArgumentError(f"kernel extents must be odd, got {kh}x{kw}")
    if stride < 1 or dilation < 1:
        raise ArgumentError("stride and dilation must be >= 1")
    h, w, _ = x.shape
    out_h, pad_t = _geometry(h, effective_extent(kh, dilation), stride, padding)
    out_w, pad_l = _geometry(w, effective_extent(kw, dilation), stride, padding)
    xd = np.ascontiguousarray(x.data)
    kd = np.ascontiguousarray(kernel.data)
    out = K.get("conv2d_forward")(xd, kd, stride, dilation, pad_t, pad_l, out_h, out_w)

    def backward(g):
        gx, gk = K.get("conv2d_backward")(xd, kd, np.ascontiguousarray(g), stride, dilation, pad_t, pad_l)
        if x.requires_grad:
            x._accum(gx)
        if kernel.requires_grad:
            kernel._accum(gk)

    return Tensor._make(out, (x, kernel), backward, "conv2d")


def maxpool2d(x, window, stride=None, padding="valid"):
    """Max pooling; the gradient goes to the first maximal cell of each window."""
    x = _as_tensor(x)
    stride = window if stride is None else stride
    if window < 1 or stride < 1:
        raise ArgumentError("window and stride must be >= 1")
    if x.ndim != 3:
        raise DimensionError(f"maxpool2d expects [H,W,C], got {x.shape}")
    h, w, c = x.shape
    if padding == "valid" and (window > h or window > w):
        raise DimensionError(f"window {window} larger than input {h}x{w}")
    out_h, pad_t = _geometry(h, window, stride, padding)
    out_w, pad_l = _geometry(w, window, stride, padding)
    out, arg = K.get("maxpool_forward")(np.ascontiguousarray(x.data), window, stride, pad_t, pad_l, out_h, out_w)

    def backward(g):
        x._accum(K.get("maxpool_backward")(np.ascontiguousarray(g), arg, h, w, c))

    return Tensor._make(out, (x,), backward, "maxpool2d")


def avgpool2d(x, window):
    """Non-overlapping mean pooling; extents must be divisible by ``window``."""
    x = _as_tensor(x)
    h, w, c = x.shape
    if window < 1:
        raise ArgumentError("window must be >= 1")
    if h % window or w % window:
        raise DimensionError(f"{h}x{w} not divisible by pooling window {window}")
    if window == 1:
        return x
    return x.reshape(h // window, window, w // window, window, c).mean(axis=(1, 3))


def _taps(n_in, factor):
    # half-pixel centers: output cell o samples input coordinate (o + 0.5) / factor - 0.5
    src = (np.arange(n_in * factor, dtype=np.float64) + 0.5) / factor - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def upsample_bilinear(x, factor):
    x = _as_tensor(x)
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise ArgumentError(f"upsample factor must be a positive integer, got {factor!r}")
    if x.ndim != 3:
        raise DimensionError(f"upsample_bilinear expects [H,W,C], got {x.shape}")
    if factor == 1:
        return x
    h, w, _ = x.shape
    th, tw = _taps(h, factor), _taps(w, factor)
    out = K.get("upsample_forward")(np.ascontiguousarray(x.data), *th, *tw)

    def backward(g):
        x._accum(K.get("upsample_backward")(np.ascontiguousarray(g), *th, *tw, h, w))

    return Tensor._make(out, (x,), backward, "upsample")


def dense(x, W, b):
    """``x @ W + b`` for a vector or a row-batch ``x``."""
    x, W, b = _as_tensor(x), _as_tensor(W), _as_tensor(b)
    if W.ndim != 2 or x.ndim not in (1, 2) or x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise DimensionError(f"dense: x {x.shape}, W {W.shape}, b {b.shape} do not agree")
    return x @ W + b


_ACTIVATIONS = {
    "tanh": Tensor.tanh,
    "sigmoid": Tensor.sigmoid,
    "relu": Tensor.relu,
    "exp": Tensor.exp,
    "log": Tensor.log,
    "softplus": Tensor.softplus,
}


def activation(x, kind):
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ArgumentError(f"unknown activation {kind!r}") from None
    return fn(_as_tensor(x))


def softmax(v):
    v = _as_tensor(v)
    if v.ndim != 1 or v.shape[0] < 1:
        raise ArgumentError(f"softmax expects a non-empty vector, got shape {v.shape}")
    e = np.exp(v.data - v.data.max())
    s = e / e.sum()

    def backward(g):
        v._accum(s * (g - np.dot(g, s)))

    return Tensor._make(s, (v,), backward, "softmax")


def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ArgumentError("concat of nothing")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        for t, part in zip(tensors, np.split(g, bounds, axis=axis)):
            if t.requires_grad:
                t._accum(part)

    return Tensor._make(out, tensors, backward, "concat")


def stack(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ArgumentError("stack of nothing")
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"stack: incompatible shapes {[t.shape for t in tensors]}") from exc

    def backward(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accum(np.take(g, i, axis=axis))

    return Tensor._make(out, tensors, backward, "stack")


def output_extent(n, k, stride=1, dilation=1, padding="same"):
    """Spatial extent produced by a conv/pool along one axis."""
    return _geometry(n, effective_extent(k, dilation), stride, padding)[0]


def he_std(fan_in):
    return math.sqrt(2.0 / fan_in)
