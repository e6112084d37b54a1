"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled Cython module is used when it was built and importable. Set
``DRIVESAL_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_NAMES = (
    "conv2d_forward",
    "conv2d_backward",
    "maxpool_forward",
    "maxpool_backward",
    "upsample_forward",
    "upsample_backward",
)

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels

if _ckernels is not None and os.environ.get("DRIVESAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    BACKEND = "cython"
else:
    BACKEND = "python"

_active = BACKENDS[BACKEND]


def use_backend(name):
    """Switch the active backend at runtime; returns the previous name."""
    global BACKEND, _active
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    prev, BACKEND, _active = BACKEND, name, BACKENDS[name]
    return prev


def get(name):
    return getattr(_active, name)


__all__ = ["BACKEND", "BACKENDS", "use_backend", "get", *_NAMES]


def __getattr__(name):
    if name in _NAMES:
        return getattr(_active, name)
    raise AttributeError(name)
