"""Central finite-difference gradient checking."""

import math

import numpy as np

from ..errors import ArgumentError, NumericError
from .tensor import no_grad


def _scalar(loss):
    v = loss.item() if hasattr(loss, "item") else float(loss)
    if not math.isfinite(v):
        raise NumericError(f"non-finite loss {v}")
    return v


def grad_check(f, params, step=1e-4, max_coords=None, seed=0):
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` rebuilds the scalar loss from ``params`` on every call. Each
    coordinate is nudged by ``+-step`` in place and restored. Returns the
    largest ``|a - n| / max(|a|, |n|, 1e-8)`` over the checked coordinates.
    ``max_coords`` limits how many coordinates per parameter are probed
    (chosen with ``seed``); ``None`` probes all of them.
    """
    if step <= 0:
        raise ArgumentError("step must be positive")
    for p in params:
        p.zero_grad()
    loss = f()
    _scalar(loss)
    loss.backward()
    analytic = [p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    worst = 0.0
    with no_grad():
        for p, a in zip(params, analytic):
            flat = p.data.reshape(-1)
            coords = np.arange(flat.size)
            if max_coords is not None and flat.size > max_coords:
                coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
            for i in coords:
                orig = flat[i]
                flat[i] = orig + step
                fp = _scalar(f())
                flat[i] = orig - step
                fm = _scalar(f())
                flat[i] = orig
                num = (fp - fm) / (2.0 * step)
                ai = a.flat[i]
                err = abs(ai - num) / max(abs(ai), abs(num), 1e-8)
                worst = max(worst, err)
    return worst
