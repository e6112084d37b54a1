"""Braking decision head: pooled saliency map -> three dense layers -> sigmoid."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .autograd import Tensor, dense, no_grad
from .errors import ArgumentError, DimensionError
from .losses import bce_loss


@dataclass
class DecisionConfig:
    input_h: int
    input_w: int
    input_downsample: int = 4
    hidden_sizes: tuple = (128, 64)
    threshold: float = 0.5

    def __post_init__(self):
        if len(self.hidden_sizes) != 2 or min(self.hidden_sizes) < 1:
            raise ArgumentError("hidden_sizes must be two ints >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ArgumentError("threshold must lie in (0, 1)")
        d = self.input_downsample
        if d < 1 or self.input_h % d or self.input_w % d:
            raise ArgumentError(f"input {self.input_h}x{self.input_w} not divisible by downsample {d}")

    @property
    def n_inputs(self):
        d = self.input_downsample
        return (self.input_h // d) * (self.input_w // d)


class BrakeDecision(NamedTuple):
    probability: float
    brake: bool


_LAYERS = ("W1", "b1", "W2", "b2", "W3", "b3")


@dataclass
class DecisionWeights:
    """Dense layers plus a fixed per-input shift and scale.

    ``shift``/``scale`` standardize the pooled map before the first layer.
    They are fitted on the training maps, not learned by descent, since
    saliency losses leave the overall map scale arbitrary.
    """

    W1: Tensor
    b1: Tensor
    W2: Tensor
    b2: Tensor
    W3: Tensor
    b3: Tensor
    shift: Tensor = None
    scale: Tensor = None

    def __post_init__(self):
        n = self.W1.shape[0]
        if self.shift is None:
            self.shift = Tensor(np.zeros(n))
        if self.scale is None:
            self.scale = Tensor(np.ones(n))

    @classmethod
    def init(cls, config, seed=0):
        rng = np.random.default_rng(seed)
        sizes = [config.n_inputs, *config.hidden_sizes, 1]
        arrays = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            arrays.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, fan_out)))
            arrays.append(np.zeros(fan_out))
        return cls(*(Tensor(a, requires_grad=True) for a in arrays))

    @classmethod
    def zeros(cls, config):
        sizes = [config.n_inputs, *config.hidden_sizes, 1]
        arrays = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            arrays += [np.zeros((a, b)), np.zeros(b)]
        return cls(*(Tensor(a, requires_grad=True) for a in arrays))

    def params(self):
        """Trainable tensors only."""
        return {f"decision.{k}": getattr(self, k) for k in _LAYERS}

    def state(self):
        out = self.params()
        out["decision.shift"] = self.shift
        out["decision.scale"] = self.scale
        return out

    @classmethod
    def from_state(cls, arrays):
        names = [f"decision.{k}" for k in (*_LAYERS, "shift", "scale")]
        missing = [n for n in names if n not in arrays]
        if missing:
            raise ArgumentError(f"decision checkpoint lacks {missing}")
        ts = [Tensor(np.asarray(arrays[n], dtype=np.float64), requires_grad=i < 6) for i, n in enumerate(names)]
        return cls(*ts)

    def fit_inputs(self, features):
        """Set shift/scale to the per-input mean and std of ``features`` ``[N, n_inputs]``."""
        mu = features.mean(axis=0)
        sd = features.std(axis=0)
        self.shift = Tensor(mu)
        self.scale = Tensor(np.where(sd > 1e-12, sd, 1.0))


def _features(m, config):
    """Pool ``[H, W, 1]`` (or ``[N, H, W, 1]``) maps to ``[N, n_inputs]``."""
    m = m if isinstance(m, Tensor) else Tensor(m)
    d = config.input_downsample
    if m.ndim == 3:
        m = m.reshape((1, *m.shape))
    if m.ndim != 4 or m.shape[1:] != (config.input_h, config.input_w, 1):
        raise DimensionError(f"expected maps of shape ({config.input_h}, {config.input_w}, 1), got {m.shape}")
    n = m.shape[0]
    if d == 1:
        return m.reshape((n, config.n_inputs))
    # average pooling over d x d blocks of every map at once
    pooled = m.reshape((n, config.input_h // d, d, config.input_w // d, d)).mean(axis=(2, 4))
    return pooled.reshape((n, config.n_inputs))


def decision_forward(maps, weights, config):
    """Brake probabilities for a batch of maps, shape ``[N]``."""
    x = (_features(maps, config) - weights.shift) / weights.scale
    h = dense(x, weights.W1, weights.b1).relu()
    h = dense(h, weights.W2, weights.b2).relu()
    z = dense(h, weights.W3, weights.b3)
    return z.reshape((z.shape[0],)).sigmoid()


def decide_brake(saliency_map, weights, config):
    with no_grad():
        p = float(decision_forward(saliency_map, weights, config).data[0])
    return BrakeDecision(p, p > config.threshold)


def decision_loss(maps, labels, weights, config):
    return bce_loss(np.asarray(labels, dtype=np.float64), decision_forward(maps, weights, config))


def train_decision(maps, labels, config, seed=0, lr=0.05, epochs=300, log_fn=None):
    """Full-batch gradient descent on BCE. Returns ``(weights, per-epoch losses)``."""
    maps = np.asarray(maps, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if len(maps) != len(labels):
        raise ArgumentError(f"{len(maps)} maps but {len(labels)} labels")
    if labels.size == 0 or labels.min() == labels.max():
        raise ArgumentError("training data must contain both classes")
    weights = DecisionWeights.init(config, seed)
    weights.fit_inputs(_features(maps, config).data)
    params = list(weights.params().values())
    x = Tensor(maps)
    log = []
    for epoch in range(epochs):
        for p in params:
            p.zero_grad()
        loss = decision_loss(x, labels, weights, config)
        loss.backward()
        for p in params:
            p.data = p.data - lr * p.grad
        log.append(loss.item())
        if log_fn is not None:
            log_fn(epoch, log[-1])
    return weights, log
