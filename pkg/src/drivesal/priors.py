"""Learnable central-bias prior channels and the saliency readout.

Prior maps are evaluated on normalized cell-center coordinates: column ``j``
of a ``W``-wide grid sits at ``x = (j + 0.5) / W`` and row ``i`` at
``y = (i + 0.5) / H``. Widths and RBF shapes are stored raw and passed
through softplus so they stay positive under gradient descent.
"""

import math
import re

import numpy as np

from .autograd import Tensor, concat, conv2d, upsample_bilinear
from .errors import ConfigError, DimensionError, DomainError

VARIANTS = ("NCB", "G16", "G32", "RBF16", "RBF32")


def parse_variant(name):
    """``'G16'`` -> ``('gaussian', 16)``, ``'RBF32'`` -> ``('rbf', 32)``, ``'NCB'`` -> ``('none', 0)``."""
    if name == "NCB":
        return "none", 0
    m = re.fullmatch(r"(G|RBF)(\d+)", name)
    if not m or int(m.group(2)) < 1:
        raise ConfigError(f"unknown model variant {name!r}; expected one of {', '.join(VARIANTS)}")
    return ("gaussian" if m.group(1) == "G" else "rbf"), int(m.group(2))


def grid(height, width):
    """Cell-center coordinates as broadcastable ``([H,1,1], [1,W,1])`` arrays."""
    ys = ((np.arange(height) + 0.5) / height).reshape(height, 1, 1)
    xs = ((np.arange(width) + 0.5) / width).reshape(1, width, 1)
    return ys, xs


def inverse_softplus(y):
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


def _t(v):
    return v if isinstance(v, Tensor) else Tensor(np.atleast_1d(np.asarray(v, dtype=np.float64)))


def gaussian_prior_map(mu_x, mu_y, sigma_x, sigma_y, height, width):
    """Axis-aligned 2-d Gaussian density per channel -> ``[H, W, K]``.

    Parameters broadcast along the channel axis (scalars give ``K = 1``).
    """
    mu_x, mu_y, sigma_x, sigma_y = (_t(v) for v in (mu_x, mu_y, sigma_x, sigma_y))
    if np.any(sigma_x.data <= 0) or np.any(sigma_y.data <= 0):
        raise DomainError("Gaussian widths must be positive")
    ys, xs = grid(height, width)
    dx = (Tensor(xs) - mu_x) / sigma_x
    dy = (Tensor(ys) - mu_y) / sigma_y
    norm = 1.0 / (2.0 * math.pi * sigma_x * sigma_y)
    return norm * (-(dx * dx + dy * dy) * 0.5).exp()


def rbf_prior_map(center_x, center_y, shape, weight, height, width):
    """Weighted Gaussian-kernel RBF ``w * exp(-shape * r^2)`` per channel -> ``[H, W, K]``."""
    center_x, center_y, shape, weight = (_t(v) for v in (center_x, center_y, shape, weight))
    if np.any(shape.data <= 0):
        raise DomainError("RBF shape parameter must be positive")
    ys, xs = grid(height, width)
    dx = Tensor(xs) - center_x
    dy = Tensor(ys) - center_y
    return weight * (-(shape * (dx * dx + dy * dy))).exp()


def _lattice(k, lo=0.2, hi=0.8):
    rows = max(d for d in range(1, int(math.isqrt(k)) + 1) if k % d == 0)
    cols = k // rows
    xs = np.linspace(lo, hi, cols) if cols > 1 else np.array([0.5 * (lo + hi)])
    ys = np.linspace(lo, hi, rows) if rows > 1 else np.array([0.5 * (lo + hi)])
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return gx.ravel(), gy.ravel()


class GaussianPriors:
    kind = "gaussian"

    def __init__(self, k, seed=0):
        rng = np.random.default_rng(seed)
        self.k = k
        self.mu_x = Tensor(np.full(k, 0.5), requires_grad=True)
        self.mu_y = Tensor(np.full(k, 0.5), requires_grad=True)
        self.sigma_x_raw = Tensor(inverse_softplus(rng.uniform(0.1, 0.3, k)), requires_grad=True)
        self.sigma_y_raw = Tensor(inverse_softplus(rng.uniform(0.1, 0.3, k)), requires_grad=True)

    def params(self):
        return {
            "priors.mu_x": self.mu_x,
            "priors.mu_y": self.mu_y,
            "priors.sigma_x_raw": self.sigma_x_raw,
            "priors.sigma_y_raw": self.sigma_y_raw,
        }

    def maps(self, height, width):
        return gaussian_prior_map(
            self.mu_x, self.mu_y, self.sigma_x_raw.softplus(), self.sigma_y_raw.softplus(), height, width
        )


class RBFPriors:
    kind = "rbf"

    def __init__(self, k, seed=0, shape_init=10.0, weight_init=1.0):
        cx, cy = _lattice(k)
        self.k = k
        self.center_x = Tensor(cx, requires_grad=True)
        self.center_y = Tensor(cy, requires_grad=True)
        self.shape_raw = Tensor(np.full(k, inverse_softplus(shape_init)), requires_grad=True)
        self.weight = Tensor(np.full(k, float(weight_init)), requires_grad=True)

    def params(self):
        return {
            "priors.center_x": self.center_x,
            "priors.center_y": self.center_y,
            "priors.shape_raw": self.shape_raw,
            "priors.weight": self.weight,
        }

    def maps(self, height, width):
        return rbf_prior_map(self.center_x, self.center_y, self.shape_raw.softplus(), self.weight, height, width)


def make_priors(variant, seed=0):
    kind, k = parse_variant(variant)
    if kind == "gaussian":
        return GaussianPriors(k, seed)
    if kind == "rbf":
        return RBFPriors(k, seed)
    return None


def append_priors(features, prior_maps):
    """Concatenate prior channels after the feature channels."""
    if prior_maps is None or prior_maps.shape[-1] == 0:
        return features
    if features.shape[:2] != prior_maps.shape[:2]:
        raise DimensionError(f"features {features.shape} and priors {prior_maps.shape} differ spatially")
    return concat([features, prior_maps], axis=2)


class Readout:
    """1x1 convolution to one channel, ReLU, bilinear upsampling."""

    def __init__(self, in_channels, factor, seed=0, bias_init=0.1, weight_std=0.01, prior_channels=0):
        if factor < 1:
            raise ConfigError("upsample factor must be >= 1")
        if not 0 <= prior_channels <= in_channels:
            raise ConfigError("prior_channels must lie in [0, in_channels]")
        rng = np.random.default_rng(seed)
        self.factor = factor
        w = rng.normal(0.0, weight_std, (1, 1, in_channels, 1))
        # prior channels start non-negative: the central bias begins as added
        # central mass, never as a central dip
        if prior_channels:
            w[:, :, in_channels - prior_channels:, :] = np.abs(w[:, :, in_channels - prior_channels:, :])
        self.kernel = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.full(1, bias_init), requires_grad=True)

    def params(self):
        return {"readout.kernel": self.kernel, "readout.bias": self.bias}

    def __call__(self, combined):
        return readout(combined, self.kernel, self.bias, self.factor)


def readout(combined, kernel, bias, factor):
    m = (conv2d(combined, kernel) + bias).relu()
    return upsample_bilinear(m, factor)
