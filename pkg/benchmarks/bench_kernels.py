"""Compare the compiled and numpy kernel backends.

Times each hot kernel at a few layer shapes taken from the desk-scale
backbone, then one forward+backward pass of the whole saliency model.
Reports the best of ``--repeat`` runs in milliseconds.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--quick]
"""

import argparse
import timeit

import numpy as np

from drivesal import _kernels
from drivesal.autograd import Tensor, conv2d, maxpool2d, upsample_bilinear
from drivesal.config import RunConfig
from drivesal.losses import combined_loss
from drivesal.model import SaliencyModel

# (label, input shape, kernel shape, dilation)
CONV_CASES = [
    ("conv 48x64x3->8", (48, 64, 3), (3, 3, 3, 8), 1),
    ("conv 24x32x8->16", (24, 32, 8), (3, 3, 8, 16), 1),
    ("conv 6x8x32->32 dil2", (6, 8, 32), (3, 3, 32, 32), 2),
    ("conv 60x80x16->32", (60, 80, 16), (3, 3, 16, 32), 1),
]


def _cases(rng, quick):
    cases = CONV_CASES[:3] if quick else CONV_CASES
    for label, xs, ks, dil in cases:
        x = Tensor(rng.normal(size=xs), requires_grad=True)
        k = Tensor(rng.normal(size=ks), requires_grad=True)
        yield label + " fwd", lambda x=x, k=k, d=dil: conv2d(x, k, dilation=d)
        yield label + " fwd+bwd", lambda x=x, k=k, d=dil: conv2d(x, k, dilation=d).sum().backward()
    x = Tensor(rng.normal(size=(48, 64, 8)), requires_grad=True)
    yield "maxpool 48x64x8 fwd+bwd", lambda: maxpool2d(x, 2).sum().backward()
    y = Tensor(rng.normal(size=(6, 8, 33)), requires_grad=True)
    yield "upsample x8 6x8x33 fwd+bwd", lambda: upsample_bilinear(y, 8).sum().backward()

    cfg = RunConfig(static=True)
    model = SaliencyModel(cfg)
    frames = [rng.uniform(size=(48, 64, 3))]
    target = Tensor(rng.uniform(0.01, 1.0, (48, 64, 1)))
    loss_cfg = cfg.loss_config()

    def step():
        for p in model.params().values():
            p.zero_grad()
        combined_loss(target, model(frames), None, loss_cfg).backward()

    yield "model step (static, G16)", step


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=3)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args(argv)

    backends = sorted(_kernels.BACKENDS)
    if "cython" not in backends:
        print("compiled backend not built; timing the numpy fallback only")
    results = {}
    for name in backends:
        _kernels.use_backend(name)
        rng = np.random.default_rng(0)
        for label, fn in _cases(rng, args.quick):
            fn()  # warm-up
            t = min(timeit.repeat(fn, number=args.number, repeat=args.repeat)) / args.number
            results.setdefault(label, {})[name] = t * 1e3

    width = max(len(k) for k in results)
    head = f"{'case':<{width}}" + "".join(f"  {b + ' ms':>11}" for b in backends)
    if len(backends) == 2:
        head += f"  {'speedup':>8}"
    print(head)
    for label, row in results.items():
        line = f"{label:<{width}}" + "".join(f"  {row[b]:>11.3f}" for b in backends)
        if len(backends) == 2:
            line += f"  {row['python'] / row['cython']:>7.2f}x"
        print(line)


if __name__ == "__main__":
    main()
