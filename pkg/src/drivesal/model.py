"""Full saliency model: backbone -> attention -> priors -> readout."""

import numpy as np

from .attention import DamWeights, run_dam
from .autograd import Tensor, no_grad
from .backbone import Backbone
from .errors import ArgumentError, ConfigError
from .priors import Readout, append_priors, make_priors


class SaliencyModel:
    def __init__(self, config):
        self.config = config
        seed = config.seed
        self.backbone = Backbone(config.backbone_config(), seed=seed)
        hf, wf, cf = self.backbone.output_shape()
        self.feature_shape = (hf, wf)
        self.dam = DamWeights.init(cf, cf, config.attn_channels, seed=seed + 1)
        self.priors = make_priors(config.variant, seed=seed + 2)
        k = 0 if self.priors is None else self.priors.k
        self.readout = Readout(cf + k, config.upsample_factor, seed=seed + 3, prior_channels=k)

    @property
    def n_frames(self):
        return 1 if self.config.static else self.config.seq_len

    @property
    def output_shape(self):
        f = self.config.upsample_factor
        return self.feature_shape[0] * f, self.feature_shape[1] * f, 1

    def params(self):
        out = dict(self.backbone.params())
        out.update(self.dam.params())
        if self.priors is not None:
            out.update(self.priors.params())
        out.update(self.readout.params())
        return out

    def trainable(self):
        p = self.params()
        if not self.config.train_backbone:
            p = {k: v for k, v in p.items() if not k.startswith("backbone.")}
        return p

    def load_params(self, arrays):
        params = self.params()
        missing = sorted(set(params) - set(arrays))
        extra = sorted(set(arrays) - set(params))
        if missing or extra:
            raise ConfigError(f"checkpoint does not match model: missing {missing}, unexpected {extra}")
        for name, t in params.items():
            a = np.asarray(arrays[name], dtype=np.float64)
            if a.shape != t.shape:
                raise ConfigError(f"{name}: checkpoint shape {a.shape} != model shape {t.shape}")
            t.data = a.copy()

    def __call__(self, frames):
        """Predict a map ``[H, W, 1]`` from a list of ``[h, w, 3]`` frames.

        In static mode a single image is presented ``seq_len`` times.
        """
        if len(frames) != self.n_frames:
            raise ArgumentError(f"expected {self.n_frames} frame(s), got {len(frames)}")
        imgs = [f if isinstance(f, Tensor) else Tensor(f) for f in frames]
        feats = [self.backbone(x) for x in imgs]
        if self.config.static:
            feats = feats * self.config.seq_len
        ctx = run_dam(feats, self.dam).context
        prior_maps = None if self.priors is None else self.priors.maps(*self.feature_shape)
        return self.readout(append_priors(ctx, prior_maps))

    def predict(self, frames):
        with no_grad():
            return self(frames).data
