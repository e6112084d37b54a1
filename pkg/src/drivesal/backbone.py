"""Truncated VGG-16 style feature extractor.

Blocks 1-3 keep their 2x2/stride-2 pooling, so features come out at 1/8 of
the input resolution. Block 4 pools with stride 1 and its last convolution
is dilated; block 5 has no pooling and every convolution in it is dilated.
There are no dense layers.
"""

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor, conv2d, maxpool2d
from .autograd.functional import he_std, output_extent
from .errors import ConfigError, DimensionError

# convolutions per block in VGG-16
VGG16_CONVS = (2, 2, 3, 3, 3)


@dataclass
class BackboneConfig:
    input_h: int = 48
    input_w: int = 64
    block_channels: list = field(default_factory=lambda: [8, 16, 32, 32, 32])
    feature_channels: int = 32
    dilation_last: int = 2

    def validate(self):
        if self.input_h <= 0 or self.input_w <= 0 or self.input_h % 8 or self.input_w % 8:
            raise ConfigError(f"input size {self.input_h}x{self.input_w} must be positive multiples of 8")
        if len(self.block_channels) != 5 or any(int(c) < 1 for c in self.block_channels):
            raise ConfigError(f"block_channels needs 5 positive counts, got {self.block_channels}")
        if self.feature_channels < 1:
            raise ConfigError("feature_channels must be >= 1")
        if self.dilation_last < 2:
            raise ConfigError(f"dilation_last must be >= 2, got {self.dilation_last}")
        return self

    @classmethod
    def full_scale(cls):
        return cls(240, 320, [64, 128, 256, 512, 512], 512, 2)


def _layer_plan(cfg):
    """List of ('conv', name, cin, cout, dilation) / ('pool', name, window, stride, padding)."""
    plan = []
    cin = 3
    for b, (n_conv, ch) in enumerate(zip(VGG16_CONVS, cfg.block_channels), start=1):
        for i in range(1, n_conv + 1):
            dil = 1
            if b == 4 and i == n_conv:
                dil = cfg.dilation_last
            elif b == 5:
                dil = cfg.dilation_last
            cout = cfg.feature_channels if (b == 5 and i == n_conv) else int(ch)
            plan.append(("conv", f"block{b}_conv{i}", cin, cout, dil))
            cin = cout
        if b <= 3:
            plan.append(("pool", f"block{b}_pool", 2, 2, "valid"))
        elif b == 4:
            plan.append(("pool", f"block{b}_pool", 2, 1, "same"))
    return plan


class Backbone:
    def __init__(self, config, seed=0):
        self.config = config.validate()
        self.seed = seed
        self.plan = _layer_plan(config)
        rng = np.random.default_rng(seed)
        self.weights = {}
        for step in self.plan:
            if step[0] != "conv":
                continue
            _, name, cin, cout, _ = step
            std = he_std(9 * cin)
            self.weights[f"{name}.kernel"] = Tensor(rng.normal(0.0, std, (3, 3, cin, cout)), requires_grad=True)
            self.weights[f"{name}.bias"] = Tensor(np.zeros(cout), requires_grad=True)

    def params(self):
        return {f"backbone.{k}": v for k, v in self.weights.items()}

    def output_shape(self, h=None, w=None):
        h = self.config.input_h if h is None else h
        w = self.config.input_w if w is None else w
        c = 3
        for step in self.plan:
            if step[0] == "conv":
                c = step[3]
            else:
                _, _, win, stride, pad = step
                h = output_extent(h, win, stride, 1, pad)
                w = output_extent(w, win, stride, 1, pad)
        return h, w, c

    def __call__(self, image):
        return extract_features(self, image)


def build_backbone(config, seed=0):
    return Backbone(config, seed)


def extract_features(backbone, image):
    """Run ``image`` ([H, W, 3], values in [0, 1]) through the backbone."""
    cfg = backbone.config
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionError(f"expected an [H, W, 3] image, got {image.shape}")
    h, w, _ = image.shape
    if h % 8 or w % 8:
        raise DimensionError(f"image {h}x{w} is not divisible by 8")
    if (h, w) != (cfg.input_h, cfg.input_w):
        raise DimensionError(f"image {h}x{w} does not match configured {cfg.input_h}x{cfg.input_w}")
    x = image
    for step in backbone.plan:
        if step[0] == "conv":
            _, name, _, _, dil = step
            x = (conv2d(x, backbone.weights[f"{name}.kernel"], dilation=dil) + backbone.weights[f"{name}.bias"]).relu()
        else:
            _, _, win, stride, pad = step
            x = maxpool2d(x, win, stride, padding=pad)
    return x
