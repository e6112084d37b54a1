"""Training loop and split evaluation for the saliency model."""

import time
from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor
from .data.maps import load_gray_map, load_rgb_image
from .errors import ConfigError, DimensionError, NumericError
from .losses import cc, combined_loss, kld, nss_score
from .model import SaliencyModel


@dataclass
class Sample:
    sample_id: str
    frames: list
    saliency: np.ndarray
    fixation: np.ndarray = None
    label: bool = None


def load_samples(manifest):
    out = []
    for e in manifest:
        frames = [load_rgb_image(manifest.resolve(p)) for p in e.frame_paths]
        sal = load_gray_map(manifest.resolve(e.saliency_map_path))
        fix = None
        if e.fixation_map_path:
            fix = load_gray_map(manifest.resolve(e.fixation_map_path), binarize=True)
        out.append(Sample(e.sequence_id, frames, sal, fix, e.brake_label))
    return out


@dataclass
class EpochRecord:
    epoch: int
    steps: int
    losses: dict
    val_metrics: dict
    seconds: float


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)

    def final_losses(self):
        return self.records[-1].losses if self.records else {}

    def lines(self):
        return [format_record(r) for r in self.records]


def format_record(r):
    parts = [f"epoch={r.epoch}", f"steps={r.steps}"]
    parts += [f"{k}={v:.6g}" for k, v in r.losses.items()]
    parts += [f"val_{k}={v:.6g}" for k, v in r.val_metrics.items() if v is not None]
    parts.append(f"time={r.seconds:.2f}s")
    return " ".join(parts)


def check_compatible(config, samples):
    if config.nss_enabled and any(s.fixation is None for s in samples):
        raise ConfigError("NSS loss requires fixation maps for every training sample")
    n = 1 if config.static else config.seq_len
    for s in samples:
        if len(s.frames) != n:
            raise ConfigError(f"{s.sample_id}: {len(s.frames)} frames, config expects {n}")
        if s.frames[0].shape[:2] != (config.input_h, config.input_w):
            raise DimensionError(f"{s.sample_id}: frame shape {s.frames[0].shape} does not match config")


def _clip(grads, limit):
    if limit <= 0:
        return grads
    norm = np.sqrt(sum(float((g * g).sum()) for g in grads))
    if norm <= limit:
        return grads
    return [g * (limit / norm) for g in grads]


class SGD:
    def __init__(self, params, lr):
        self.params, self.lr = params, lr

    def step(self, grads):
        for p, g in zip(self.params, grads):
            p.data = p.data - self.lr * g


class Adam:
    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params, self.lr = params, lr
        self.b1, self.b2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g * g
            p.data = p.data - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam}


def make_optimizer(name, params, lr):
    if name not in OPTIMIZERS:
        raise ConfigError(f"unknown optimizer {name!r}; choose from {', '.join(OPTIMIZERS)}")
    return OPTIMIZERS[name](params, lr)


def train_saliency(config, samples, val_samples=None, log_fn=None, model=None):
    """Gradient descent with batch size 1 (plain by default, Adam on request).

    Each epoch visits the samples in a seeded random order. ``max_steps``
    (when non-zero) stops training after that many updates.
    """
    check_compatible(config, samples)
    model = model or SaliencyModel(config)
    params = model.trainable()
    loss_cfg = config.loss_config()
    opt = make_optimizer(config.optimizer, list(params.values()), config.lr)
    rng = np.random.default_rng(config.seed)
    log = TrainingLog()
    step = 0
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        sums = {}
        count = 0
        for idx in rng.permutation(len(samples)):
            if config.max_steps and step >= config.max_steps:
                break
            s = samples[idx]
            for p in params.values():
                p.zero_grad()
            pred = model(s.frames)
            total, terms = combined_loss(Tensor(s.saliency), pred, s.fixation, loss_cfg, return_terms=True)
            if not np.isfinite(total.item()):
                raise NumericError(f"non-finite loss at step {step} on {s.sample_id}")
            total.backward()
            opt.step(_clip([p.grad for p in params.values()], config.grad_clip))
            for k, v in terms.items():
                sums[k] = sums.get(k, 0.0) + v.item()
            sums["total"] = sums.get("total", 0.0) + total.item()
            count += 1
            step += 1
        if count == 0:
            break
        val = evaluate(model.predict, val_samples, config.kl_epsilon) if val_samples else {}
        rec = EpochRecord(epoch, step, {k: v / count for k, v in sums.items()}, val, time.perf_counter() - t0)
        log.records.append(rec)
        if log_fn is not None:
            log_fn(rec)
    return model, log


def evaluate(predict_fn, samples, epsilon=1e-7):
    """Mean CC, KLD and NSS of ``predict_fn(frames)`` over the samples.

    NSS is ``None`` unless every sample carries a fixation map.
    """
    ccs, klds, nsss = [], [], []
    with_fix = all(s.fixation is not None for s in samples)
    for s in samples:
        pred = np.asarray(predict_fn(s.frames), dtype=np.float64)
        if pred.shape != s.saliency.shape:
            raise DimensionError(f"{s.sample_id}: prediction {pred.shape} vs target {s.saliency.shape}")
        ccs.append(cc(s.saliency, pred))
        klds.append(kld(s.saliency, pred, epsilon))
        if with_fix:
            nsss.append(nss_score(pred, s.fixation))
    return {
        "CC": float(np.mean(ccs)),
        "KLD": float(np.mean(klds)),
        "NSS": float(np.mean(nsss)) if with_fix else None,
    }
