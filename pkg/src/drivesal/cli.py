"""``drivesal`` command line.

Configuration precedence: built-in defaults, then ``--config`` file, then
flags. Exit codes: 0 success, 1 usage or config error, 2 data error,
3 numeric failure.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import errors
from .autograd import no_grad
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, format_config, load_config, parse_config
from .data.manifest import read_manifest
from .data.maps import load_rgb_image, normalize_map, write_gray_map
from .data.synth import SynthConfig, gen_synthetic
from .data.telemetry import BrakeLabelConfig, frame_times_at, label_brakes, parse_telemetry
from .decision import DecisionConfig, DecisionWeights, decision_forward, train_decision
from .losses import auc, roc_curve, write_metrics_csv
from .model import SaliencyModel
from .train import evaluate, format_record, load_samples, train_saliency

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out(msg):
    print(msg, flush=True)


# -- config and checkpoints -------------------------------------------------


def run_config(args):
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {}
    for key in ("seed", "variant", "lr", "epochs", "max_steps", "optimizer", "manifest", "val_manifest"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "losses", None):
        overrides["losses"] = [t.strip() for t in args.losses.split(",") if t.strip()]
    if getattr(args, "static", False):
        overrides["static"] = True
    return cfg.replace(**overrides) if overrides else cfg


def save_model(model, path, final_losses=None):
    meta = {
        "kind": "saliency",
        "seed": model.config.seed,
        "config": format_config(model.config),
        "final_losses": final_losses or {},
    }
    save_checkpoint(path, model.params(), meta)


def load_model(path):
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "saliency":
        raise errors.ConfigError(f"{path} is not a saliency checkpoint")
    model = SaliencyModel(parse_config(meta["config"]))
    model.load_params(arrays)
    return model


def load_decision(path):
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "decision":
        raise errors.ConfigError(f"{path} is not a decision checkpoint")
    dc = DecisionConfig(meta["input_h"], meta["input_w"], meta["input_downsample"], tuple(meta["hidden_sizes"]), meta["threshold"])
    return DecisionWeights.from_state(arrays), dc


def _predict_all(model, samples):
    return np.array([model.predict(s.frames) for s in samples])


def _probabilities(maps, weights, dc):
    with no_grad():
        return decision_forward(maps, weights, dc).data


# -- commands ---------------------------------------------------------------


def cmd_train(args):
    cfg = run_config(args)
    if not cfg.manifest:
        raise errors.ConfigError("train needs --manifest (or manifest in the config file)")
    samples = load_samples(read_manifest(cfg.manifest))
    if args.module == "decision":
        return _train_decision(args, cfg, samples)
    val = load_samples(read_manifest(cfg.val_manifest)) if cfg.val_manifest else None
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None

    def report(rec):
        line = format_record(rec)
        _out(line)
        if log_fh:
            log_fh.write(line + "\n")

    try:
        model, history = train_saliency(cfg, samples, val, log_fn=report)
    finally:
        if log_fh:
            log_fh.close()
    save_model(model, args.out, history.final_losses())
    _out(f"wrote {args.out}")
    return EXIT_OK


def _train_decision(args, cfg, samples):
    if not args.checkpoint:
        raise errors.ConfigError("train --module decision needs --checkpoint (a saliency checkpoint)")
    model = load_model(args.checkpoint)
    if any(s.label is None for s in samples):
        raise errors.FormatError("every manifest entry needs a brake_label to train the decision module")
    mcfg = model.config
    h, w, _ = model.output_shape
    dc = DecisionConfig(h, w, cfg.decision_downsample, tuple(cfg.decision_hidden), cfg.decision_threshold)
    maps = _predict_all(model, samples)
    labels = np.array([s.label for s in samples], dtype=np.float64)
    weights, losses = train_decision(maps, labels, dc, seed=cfg.seed, lr=cfg.decision_lr, epochs=cfg.decision_epochs)
    for i in range(0, len(losses), max(1, len(losses) // 10)):
        _out(f"epoch={i} bce={losses[i]:.6g}")
    meta = {
        "kind": "decision",
        "seed": cfg.seed,
        "input_h": h,
        "input_w": w,
        "input_downsample": dc.input_downsample,
        "hidden_sizes": list(dc.hidden_sizes),
        "threshold": dc.threshold,
        "saliency_model": mcfg.model_id,
        "final_loss": losses[-1] if losses else None,
    }
    save_checkpoint(args.out, weights.state(), meta)
    _out(f"wrote {args.out}")
    return EXIT_OK


def cmd_eval(args):
    model = load_model(args.checkpoint)
    samples = load_samples(read_manifest(args.manifest))
    metrics = evaluate(model.predict, samples, model.config.kl_epsilon)
    row = {"model_id": args.model_id or model.config.model_id, **metrics}
    if args.decision_checkpoint:
        weights, dc = load_decision(args.decision_checkpoint)
        if any(s.label is None for s in samples):
            raise errors.FormatError("AUC needs a brake_label on every manifest entry")
        probs = _probabilities(_predict_all(model, samples), weights, dc)
        row["AUC"] = auc(probs, np.array([s.label for s in samples], dtype=int))
    write_metrics_csv([row], args.out)
    _out(" ".join(f"{k}={v}" for k, v in row.items() if v is not None))
    return EXIT_OK


def _frames(paths):
    return [load_rgb_image(p) for p in paths]


def cmd_predict(args):
    model = load_model(args.checkpoint)
    if len(args.frames) != model.n_frames:
        raise errors.ArgumentError(f"model expects {model.n_frames} frame(s), got {len(args.frames)}")
    pred = model.predict(_frames(args.frames))
    out = normalize_map(pred, "max_to_one") if pred.max() > 0 else pred
    write_gray_map(out, args.out)
    _out(f"wrote {args.out}")
    return EXIT_OK


def cmd_decide(args):
    model = load_model(args.checkpoint)
    weights, dc = load_decision(args.decision_checkpoint)
    if args.manifest:
        if not args.out:
            raise errors.ArgumentError("decide --manifest needs --out for the per-sample CSV")
        samples = load_samples(read_manifest(args.manifest))
        probs = _probabilities(_predict_all(model, samples), weights, dc)
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "probability", "label"])
            for s, p in zip(samples, probs):
                w.writerow([s.sample_id, repr(float(p)), "" if s.label is None else int(s.label)])
        _out(f"wrote {args.out}")
        return EXIT_OK
    if not args.frames:
        raise errors.ArgumentError("decide needs frames or --manifest")
    if len(args.frames) != model.n_frames:
        raise errors.ArgumentError(f"model expects {model.n_frames} frame(s), got {len(args.frames)}")
    p = float(_probabilities(model.predict(_frames(args.frames)), weights, dc)[0])
    _out(f"probability={p!r} brake={str(p > dc.threshold).lower()}")
    return EXIT_OK


def read_predictions(path):
    scores, labels = [], []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh), start=2):
            try:
                scores.append(float(row["probability"]))
                labels.append(int(row["label"]))
            except (KeyError, TypeError, ValueError):
                raise errors.FormatError(f"{path}:{i}: need numeric probability and 0/1 label") from None
    return np.array(scores), np.array(labels)


def cmd_roc(args):
    scores, labels = read_predictions(args.predictions)
    fpr, tpr, thr = roc_curve(scores, labels)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "fpr", "tpr"])
            for t, f, p in zip(thr, fpr, tpr):
                w.writerow([repr(float(t)), repr(float(f)), repr(float(p))])
    _out(f"auc={auc(scores, labels)!r}")
    return EXIT_OK


def cmd_label(args):
    with open(args.telemetry, encoding="utf-8", newline="") as fh:
        series = parse_telemetry(fh)
    if args.frame_times:
        times = [float(x) for x in Path(args.frame_times).read_text().split()]
    else:
        times = frame_times_at(series, args.fps)
    cfg = BrakeLabelConfig(args.delta_v, args.interval, args.tolerance)
    result = label_brakes(series, times, cfg)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_time", "brake", "speed_before", "speed_now"])
        for lab in result.labels:
            w.writerow([repr(lab.frame_time), int(lab.brake), repr(lab.speed_before), repr(lab.speed_now)])
    skipped = args.skipped or str(Path(args.out).with_suffix(".skipped.csv"))
    with open(skipped, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_time", "reason"])
        for s in result.skipped:
            w.writerow([repr(s.frame_time), s.reason])
    _out(f"labelled {len(result.labels)} frame(s), skipped {len(result.skipped)}; wrote {args.out} and {skipped}")
    return EXIT_OK


def cmd_synth(args):
    cfg = SynthConfig(
        n_train=args.n_train, n_val=args.n_val, n_test=args.n_test, seq_len=args.seq_len, static=args.static
    )
    manifests = gen_synthetic(args.out, cfg, seed=args.seed)
    for split, m in manifests.items():
        _out(f"{split}: {len(m)} sample(s) -> {Path(args.out) / (split + '.jsonl')}")
    return EXIT_OK


def cmd_gradcheck(args):
    from .gradsuite import run_suite

    results = run_suite(seed=args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        _out(f"{r.name:<{width}}  max_rel_err={r.error:.3e}  tol={r.tol:.0e}  {'PASS' if r.passed else 'FAIL'}")
    failed = sum(not r.passed for r in results)
    _out(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_NUMERIC if failed else EXIT_OK


# -- parser -----------------------------------------------------------------


def _model_flags(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", help="NCB, G16, G32, RBF16 or RBF32")
    p.add_argument("--losses", help="comma list from CC,KL,NSS")


def build_parser():
    parser = _Parser(prog="drivesal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train the saliency model or the decision head")
    _model_flags(p)
    p.add_argument("--manifest")
    p.add_argument("--val-manifest", dest="val_manifest")
    p.add_argument("--out", required=True, help="checkpoint to write")
    p.add_argument("--module", choices=("saliency", "decision"), default="saliency")
    p.add_argument("--checkpoint", help="saliency checkpoint (for --module decision)")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--optimizer", choices=("sgd", "adam"))
    p.add_argument("--static", action="store_true", help="single-image mode")
    p.add_argument("--log", help="also write per-epoch log lines here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="metrics CSV for a checkpoint on a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--decision-checkpoint", dest="decision_checkpoint", help="fill the AUC column")
    p.add_argument("--model-id", dest="model_id")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write a predicted map as PGM")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("frames", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("decide", help="brake probability for frames, or a CSV over a manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--decision-checkpoint", dest="decision_checkpoint", required=True)
    p.add_argument("--manifest")
    p.add_argument("--out", help="per-sample CSV (with --manifest)")
    p.add_argument("frames", nargs="*")
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("roc", help="ROC points and AUC from a decide CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("label", help="brake labels from a telemetry CSV")
    p.add_argument("--telemetry", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--skipped", help="skip-list CSV (default: <out>.skipped.csv)")
    p.add_argument("--frame-times", dest="frame_times", help="whitespace separated frame times in seconds")
    p.add_argument("--fps", type=float, default=3.0)
    p.add_argument("--delta-v", dest="delta_v", type=float, default=0.5)
    p.add_argument("--interval", type=float, default=1.0)
    p.add_argument("--tolerance", type=float, default=0.05)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--static", action="store_true")
    p.add_argument("--n-train", dest="n_train", type=int, default=64)
    p.add_argument("--n-val", dest="n_val", type=int, default=0)
    p.add_argument("--n-test", dest="n_test", type=int, default=64)
    p.add_argument("--seq-len", dest="seq_len", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference check of every primitive")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


_EXIT_FOR = (
    ((errors.ConfigError, errors.ArgumentError), EXIT_USAGE),
    ((errors.NumericError, errors.DomainError, errors.DegenerateInputError), EXIT_NUMERIC),
    ((errors.DimensionError, errors.FormatError, errors.ContractError, errors.TelemetryLookupError, OSError), EXIT_DATA),
)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        for kinds, code in _EXIT_FOR:
            if isinstance(exc, kinds):
                print(f"drivesal {args.command}: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
