"""Synthetic desk-scale driving-attention data.

Each sequence shows one bright disc drifting (and growing, as if approaching)
over a noisy background. The ground-truth saliency is a Gaussian bump on the
disc in the last frame with width equal to the disc radius, and the brake
label is true when the last-frame disc area exceeds ``area_threshold``. In
static mode each sample is a single frame and also gets a binary fixation
map sampled from the saliency bump.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .manifest import Manifest, ManifestEntry, write_manifest
from .maps import write_gray_map, write_rgb_image

FRAME_RATE = 3.0


@dataclass
class SynthConfig:
    n_train: int = 64
    n_val: int = 0
    n_test: int = 64
    seq_len: int = 4
    height: int = 48
    width: int = 64
    static: bool = False
    radius_min: float = 4.0
    radius_max: float = 16.0
    area_threshold: float = None  # defaults to the area at the mid radius
    noise: float = 0.3
    n_fixations: int = 12

    @property
    def threshold(self):
        if self.area_threshold is not None:
            return self.area_threshold
        r = 0.5 * (self.radius_min + self.radius_max)
        return math.pi * r * r


def _render(rng, cfg, cx, cy, r, color):
    h, w = cfg.height, cfg.width
    img = rng.uniform(0.0, cfg.noise, (h, w, 3))
    yy, xx = np.mgrid[0:h, 0:w]
    d = np.hypot(xx + 0.5 - cx, yy + 0.5 - cy)
    cover = np.clip(r + 0.5 - d, 0.0, 1.0)[:, :, None]
    return img * (1.0 - cover) + color * cover


def _saliency(cfg, cx, cy, r):
    yy, xx = np.mgrid[0:cfg.height, 0:cfg.width]
    d2 = (xx + 0.5 - cx) ** 2 + (yy + 0.5 - cy) ** 2
    m = np.exp(-d2 / (2.0 * r * r))
    return (m / m.max())[:, :, None]


def _fixations(rng, sal, n):
    p = sal.ravel() / sal.sum()
    idx = rng.choice(p.size, size=n, replace=True, p=p)
    fix = np.zeros(p.size)
    fix[idx] = 1.0
    return fix.reshape(sal.shape)


def sample_sequence(rng, cfg):
    """One synthetic sample as arrays: (frames, saliency, fixation, label, last_radius)."""
    n = 1 if cfg.static else cfg.seq_len
    r_last = rng.uniform(cfg.radius_min, cfg.radius_max)
    r_first = r_last * rng.uniform(0.6, 1.0)
    margin = cfg.radius_max + 1.0
    x0, y0 = rng.uniform(margin, cfg.width - margin), rng.uniform(margin, cfg.height - margin)
    x1 = np.clip(x0 + rng.normal(0.0, 4.0), margin, cfg.width - margin)
    y1 = np.clip(y0 + rng.normal(0.0, 3.0), margin, cfg.height - margin)
    color = rng.uniform(0.8, 1.0, 3)
    frames = []
    for i in range(n):
        a = 1.0 if n == 1 else i / (n - 1)
        frames.append(_render(rng, cfg, x0 + a * (x1 - x0), y0 + a * (y1 - y0), r_first + a * (r_last - r_first), color))
    sal = _saliency(cfg, x1 if n > 1 else x0, y1 if n > 1 else y0, r_last)
    fix = _fixations(rng, sal, cfg.n_fixations) if cfg.static else None
    label = bool(math.pi * r_last * r_last > cfg.threshold)
    return frames, sal, fix, label, r_last


def gen_synthetic(out_dir, cfg=None, seed=0):
    """Write frames, maps and ``train/val/test.jsonl`` manifests; returns {split: Manifest}."""
    cfg = cfg or SynthConfig()
    out = Path(out_dir)
    rng = np.random.default_rng(seed)
    manifests = {}
    for split, count in (("train", cfg.n_train), ("val", cfg.n_val), ("test", cfg.n_test)):
        if count <= 0:
            continue
        sdir = out / split
        sdir.mkdir(parents=True, exist_ok=True)
        entries = []
        for k in range(count):
            frames, sal, fix, label, _ = sample_sequence(rng, cfg)
            sid = f"{split}_{k:05d}"
            frame_paths = []
            for i, img in enumerate(frames):
                rel = f"{split}/{sid}_f{i}.ppm"
                write_rgb_image(img, out / rel)
                frame_paths.append(rel)
            sal_rel = f"{split}/{sid}_sal.pgm"
            write_gray_map(sal, out / sal_rel)
            fix_rel = None
            if fix is not None:
                fix_rel = f"{split}/{sid}_fix.pgm"
                write_gray_map(fix, out / fix_rel)
            t_last = (len(frames) - 1) / FRAME_RATE
            entries.append(ManifestEntry(sid, frame_paths, sal_rel, fix_rel, label, t_last))
        manifest = Manifest(entries, out)
        write_manifest(manifest, out / f"{split}.jsonl")
        manifests[split] = manifest
    return manifests
