"""Convolutional LSTM with additive soft attention over timestep encodings.

Each frame's feature map is encoded by one ConvLSTM step from a fresh state
(the per-timestep annotation ``h_i``). The same cell also runs recurrently
over the whole sequence; its final hidden map is the query. Every
annotation is scored against the query with ``v_a . tanh(W_a [s; h_i])``
(1x1 convolutions followed by a spatial mean), the scores are softmaxed into
attention weights, and the output is the weighted sum of annotations.

Identical frames therefore give identical annotations and uniform weights,
so a still image repeated ``n`` times yields the same output for every ``n``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .autograd import Tensor, concat, conv2d, softmax, stack
from .errors import ArgumentError, DimensionError


class ConvLSTMState(NamedTuple):
    h: Tensor
    c: Tensor


def zero_state(height, width, channels):
    return ConvLSTMState(Tensor(np.zeros((height, width, channels))), Tensor(np.zeros((height, width, channels))))


@dataclass
class DamWeights:
    lstm_kernel: Tensor  # [3, 3, cin + ch, 4 * ch], gate order i, f, o, g
    lstm_bias: Tensor  # [4 * ch]
    W_a: Tensor  # [1, 1, 2 * ch, attn]
    v_a: Tensor  # [1, 1, attn, 1]

    @property
    def hidden_channels(self):
        return self.lstm_bias.shape[0] // 4

    @classmethod
    def init(cls, in_channels, hidden_channels, attn_channels=16, seed=0, forget_bias=1.0, kernel_size=3):
        rng = np.random.default_rng(seed)
        ch = hidden_channels
        fan_in = kernel_size * kernel_size * (in_channels + ch)
        kernel = rng.normal(0.0, np.sqrt(1.0 / fan_in), (kernel_size, kernel_size, in_channels + ch, 4 * ch))
        bias = np.zeros(4 * ch)
        bias[ch:2 * ch] = forget_bias
        W_a = rng.normal(0.0, np.sqrt(1.0 / (2 * ch)), (1, 1, 2 * ch, attn_channels))
        v_a = rng.normal(0.0, np.sqrt(1.0 / attn_channels), (1, 1, attn_channels, 1))
        return cls(*(Tensor(a, requires_grad=True) for a in (kernel, bias, W_a, v_a)))

    def params(self):
        return {
            "dam.lstm_kernel": self.lstm_kernel,
            "dam.lstm_bias": self.lstm_bias,
            "dam.W_a": self.W_a,
            "dam.v_a": self.v_a,
        }


def convlstm_step(state, x, weights):
    """One ConvLSTM update; returns the new (h, c)."""
    h, c = state
    ch = weights.hidden_channels
    if h.shape != c.shape or h.shape[2] != ch:
        raise DimensionError(f"state shapes {h.shape}/{c.shape} do not match {ch} hidden channels")
    if x.ndim != 3 or x.shape[:2] != h.shape[:2]:
        raise DimensionError(f"input {x.shape} not aligned with state {h.shape}")
    if x.shape[2] + ch != weights.lstm_kernel.shape[2]:
        raise DimensionError(f"input has {x.shape[2]} channels, kernel expects {weights.lstm_kernel.shape[2] - ch}")
    z = conv2d(concat([x, h], axis=2), weights.lstm_kernel) + weights.lstm_bias
    i = z[:, :, 0:ch].sigmoid()
    f = z[:, :, ch:2 * ch].sigmoid()
    o = z[:, :, 2 * ch:3 * ch].sigmoid()
    g = z[:, :, 3 * ch:4 * ch].tanh()
    c_new = f * c + i * g
    h_new = o * c_new.tanh()
    return ConvLSTMState(h_new, c_new)


def attn_score(s_prev, h_i, W_a, v_a):
    """Additive score of annotation ``h_i`` against query map ``s_prev`` (scalar tensor)."""
    if s_prev.shape != h_i.shape:
        raise DimensionError(f"query {s_prev.shape} and annotation {h_i.shape} are not aligned")
    e = conv2d(concat([s_prev, h_i], axis=2), W_a).tanh()
    return conv2d(e, v_a).mean()


def attn_weights(scores):
    if len(scores) < 1:
        raise ArgumentError("need at least one score")
    if isinstance(scores, Tensor):
        return softmax(scores)
    return softmax(stack([s if isinstance(s, Tensor) else Tensor(s) for s in scores]))


def context(alpha, hs):
    """Weighted sum of annotation maps."""
    n = alpha.shape[0]
    if n != len(hs):
        raise DimensionError(f"{n} weights for {len(hs)} annotations")
    if any(h.shape != hs[0].shape for h in hs):
        raise DimensionError("annotations do not share a shape")
    out = alpha[0] * hs[0]
    for i in range(1, n):
        out = out + alpha[i] * hs[i]
    return out


class DamOutput(NamedTuple):
    context: Tensor
    alpha: Tensor
    annotations: list
    query: Tensor


def run_dam(frames, weights):
    """Attend over a sequence of feature maps; returns :class:`DamOutput`."""
    if len(frames) < 1:
        raise ArgumentError("empty frame sequence")
    hf, wf, _ = frames[0].shape
    ch = weights.hidden_channels
    fresh = zero_state(hf, wf, ch)

    # frames that are the same Tensor object share one annotation
    first_steps = {}
    for x in frames:
        if id(x) not in first_steps:
            first_steps[id(x)] = convlstm_step(fresh, x, weights)
    annotations = [first_steps[id(x)].h for x in frames]

    state = first_steps[id(frames[0])]
    for x in frames[1:]:
        state = convlstm_step(state, x, weights)
    query = state.h

    scores = [attn_score(query, h, weights.W_a, weights.v_a) for h in annotations]
    alpha = attn_weights(scores)
    return DamOutput(context(alpha, annotations), alpha, annotations, query)
