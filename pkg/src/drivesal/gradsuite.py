"""Finite-difference checks for every differentiable building block.

Each check builds a tiny random problem, contracts the output with a fixed
random tensor to get a scalar, and compares analytic against central
difference gradients. Used by ``drivesal gradcheck`` and the test suite.
"""

import zlib
from typing import NamedTuple

import numpy as np

from .attention import DamWeights, attn_score, convlstm_step, run_dam
from .autograd import (
    Tensor, activation, conv2d, dense, grad_check, maxpool2d, softmax, upsample_bilinear,
)
from .losses import LossConfig, bce_loss, cc_loss, combined_loss, kl_loss, nss_loss, sum_to_one
from .priors import gaussian_prior_map, rbf_prior_map

TOL = 1e-4
TOL_COMPOSED = 1e-3


def _p(rng, *shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, shape), requires_grad=True)


def _contracted(rng, fn, params):
    """Scalar ``sum(fn(*params) * r)`` with a fixed random ``r``."""
    shape = fn(*params).shape
    r = Tensor(rng.uniform(-1.0, 1.0, shape))
    return lambda: (fn(*params) * r).sum()


def _simple(fn, *make):
    def build(rng):
        params = [m(rng) for m in make]
        return _contracted(rng, fn, params), params
    return build


def _convlstm(rng):
    w = DamWeights.init(2, 3, attn_channels=2, seed=int(rng.integers(1 << 30)))
    x = _p(rng, 3, 4, 2)
    h, c = _p(rng, 3, 4, 3), _p(rng, 3, 4, 3)
    params = [x, h, c, w.lstm_kernel, w.lstm_bias]

    def fn(x, h, c, k, b):
        s = convlstm_step((h, c), x, w)
        return s.h * 1.5 + s.c
    return _contracted(rng, fn, params), params


def _attn_score(rng):
    s, h = _p(rng, 3, 4, 3), _p(rng, 3, 4, 3)
    W_a, v_a = _p(rng, 1, 1, 6, 4), _p(rng, 1, 1, 4, 1)
    params = [s, h, W_a, v_a]
    return (lambda: attn_score(s, h, W_a, v_a) * 1.0), params


def _full_dam(rng):
    w = DamWeights.init(2, 3, attn_channels=2, seed=int(rng.integers(1 << 30)))
    frames = [_p(rng, 3, 4, 2) for _ in range(3)]
    params = [*frames, w.lstm_kernel, w.lstm_bias, w.W_a, w.v_a]
    return _contracted(rng, lambda *_: run_dam(frames, w).context, params), params


def _gaussian(rng):
    mx, my = _p(rng, 3, lo=0.2, hi=0.8), _p(rng, 3, lo=0.2, hi=0.8)
    sx, sy = _p(rng, 3, lo=0.15, hi=0.4), _p(rng, 3, lo=0.15, hi=0.4)
    params = [mx, my, sx, sy]
    return _contracted(rng, lambda *a: gaussian_prior_map(*a, 5, 6), params), params


def _rbf(rng):
    cx, cy = _p(rng, 3, lo=0.2, hi=0.8), _p(rng, 3, lo=0.2, hi=0.8)
    eps, wt = _p(rng, 3, lo=2.0, hi=10.0), _p(rng, 3)
    params = [cx, cy, eps, wt]
    return _contracted(rng, lambda *a: rbf_prior_map(*a, 5, 6), params), params


def _maps(rng):
    return Tensor(rng.uniform(0.05, 1.0, (3, 4, 1))), _p(rng, 3, 4, 1, lo=0.05, hi=1.0)


def _kl(rng):
    y, p = _maps(rng)
    yt = sum_to_one(y)
    return (lambda: kl_loss(yt, sum_to_one(p))), [p]


def _cc(rng):
    y, p = _maps(rng)
    return (lambda: cc_loss(y, p)), [p]


def _nss(rng):
    _, p = _maps(rng)
    fix = np.zeros((3, 4, 1))
    fix.flat[rng.choice(12, 4, replace=False)] = 1.0
    return (lambda: nss_loss(p, Tensor(fix))), [p]


def _combined(rng):
    y, p = _maps(rng)
    fix = np.zeros((3, 4, 1))
    fix.flat[rng.choice(12, 3, replace=False)] = 1.0
    cfg = LossConfig()
    return (lambda: combined_loss(y, p, Tensor(fix), cfg)), [p]


def _bce(rng):
    labels = (rng.uniform(size=6) > 0.5).astype(float)
    probs = _p(rng, 6, lo=0.1, hi=0.9)
    return (lambda: bce_loss(labels, probs)), [probs]


def _act(kind):
    return _simple(lambda x: activation(x, kind), lambda r: _p(r, 7))


CHECKS = {
    "conv2d": (_simple(lambda x, k: conv2d(x, k), lambda r: _p(r, 6, 5, 2), lambda r: _p(r, 3, 3, 2, 3)), TOL),
    "conv2d_stride2": (_simple(lambda x, k: conv2d(x, k, stride=2), lambda r: _p(r, 7, 6, 2), lambda r: _p(r, 3, 3, 2, 2)), TOL),
    "conv2d_dilation2": (_simple(lambda x, k: conv2d(x, k, dilation=2), lambda r: _p(r, 7, 7, 2), lambda r: _p(r, 3, 3, 2, 2)), TOL),
    "maxpool2d": (_simple(lambda x: maxpool2d(x, 2), lambda r: _p(r, 6, 6, 2)), TOL),
    "maxpool2d_same_s1": (_simple(lambda x: maxpool2d(x, 2, 1, padding="same"), lambda r: _p(r, 5, 4, 2)), TOL),
    "upsample_bilinear": (_simple(lambda x: upsample_bilinear(x, 3), lambda r: _p(r, 3, 4, 2)), TOL),
    "dense": (_simple(dense, lambda r: _p(r, 2, 5), lambda r: _p(r, 5, 3), lambda r: _p(r, 3)), TOL),
    "relu": (_act("relu"), TOL),
    "tanh": (_act("tanh"), TOL),
    "sigmoid": (_act("sigmoid"), TOL),
    "softplus": (_act("softplus"), TOL),
    "softmax": (_simple(softmax, lambda r: _p(r, 6)), TOL),
    "convlstm_step": (_convlstm, TOL),
    "attn_score": (_attn_score, TOL),
    "gaussian_prior": (_gaussian, TOL),
    "rbf_prior": (_rbf, TOL),
    "kl_loss": (_kl, TOL),
    "cc_loss": (_cc, TOL),
    "nss_loss": (_nss, TOL),
    "combined_loss": (_combined, TOL),
    "bce_loss": (_bce, TOL),
    "full_dam": (_full_dam, TOL_COMPOSED),
}


class CheckResult(NamedTuple):
    name: str
    error: float
    tol: float

    @property
    def passed(self):
        return bool(self.error <= self.tol)


def run_check(name, seed=0):
    build, tol = CHECKS[name]
    rng = np.random.default_rng(zlib.crc32(name.encode()) + seed)
    f, params = build(rng)
    return CheckResult(name, grad_check(f, params, step=1e-4), tol)


def run_suite(names=None, seed=0):
    return [run_check(n, seed) for n in (names or CHECKS)]
