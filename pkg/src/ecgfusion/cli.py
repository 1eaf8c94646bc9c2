"""Command-line entry point: ``ecgfusion <command> [flags]``.

Tables go to stdout as CSV, diagnostics to stderr.  Exit status is 0 on
success, 1 when a command fails and 2 on a usage error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from contextlib import nullcontext
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import dsp, experiment, metrics, optim
from .data import CLASS_NAMES, NoiseConfig, generate_dataset, read_dataset, rhythm_class, split_folds
from .data import write_dataset
from .errors import EcgFusionError
from .fusion import FusionScheme, ScaleBank, fusion_weights
from .nn import count_flops, count_params, forward, infer_shapes, load_model, param_shapes, save_model

log = logging.getLogger("ecgfusion")


def _positive(conv):
    def parse(text):
        try:
            v = conv(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def _non_negative(conv):
    def parse(text):
        try:
            v = conv(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if v < 0:
            raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
        return v
    return parse


def _emit(rows, header, fh=None):
    w = csv.writer(fh or sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def _write_csv(path, rows, header):
    with open(path, "w", newline="") as fh:
        _emit(rows, header, fh)


def _out(args, path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else Path(args.out_dir) / p


def _class_names(ds):
    if ds.class_names:
        return tuple(ds.class_names)
    if ds.num_classes == len(CLASS_NAMES):
        return tuple(CLASS_NAMES)
    return tuple(str(i) for i in range(ds.num_classes))


def _fraction(w) -> str:
    return str(Fraction(w).limit_denominator(1 << 12))


# --------------------------------------------------------------------------
# commands

def cmd_gen(args) -> int:
    names = [c.strip() for c in args.classes.split(",")] if args.classes != "all" else None
    classes = None if names is None else [rhythm_class(n) for n in names]
    noise = NoiseConfig(args.baseline_amp, args.gaussian_std, args.powerline_amp, args.powerline_hz)
    ds = generate_dataset(classes, per_class=args.per_class, duration_s=args.duration, rate=args.rate,
                          seed=args.seed, noise=noise, relabel=args.relabel)
    path = _out(args, args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(path, ds)
    names = _class_names(ds)
    _emit([[lab, names[lab], n] for lab, n in ds.class_counts().items()], ["label", "class", "count"])
    log.info("wrote %d records to %s", len(ds), path)
    return 0


def _load_labelled(path):
    ds = read_dataset(path)
    if np.any(ds.labels < 0):
        raise EcgFusionError(f"{path} has unlabelled records")
    return ds


def _fold_split(ds, folds, fold, seed):
    """``(train, test)`` for one held-out fold, or ``(ds, ds)`` when no fold is chosen."""
    if fold is None:
        return ds, ds
    if not 0 <= fold < folds:
        raise EcgFusionError(f"fold {fold} outside 0..{folds - 1}")
    parts = split_folds(ds, folds, seed)
    rest = np.concatenate([p for i, p in enumerate(parts) if i != fold])
    return ds.subset(np.sort(rest)), ds.subset(parts[fold])


def cmd_train(args) -> int:
    ds = _load_labelled(args.data)
    train_ds, _ = _fold_split(ds, args.folds, args.holdout_fold, args.seed)
    top = min(6, int(np.log2(min(len(r) for r in ds.records) // 512)) + 1) if ds.records else 1
    levels = list(range(1, top + 1)) if args.all_levels else [args.level]
    cfg = optim.TrainConfig(batch_size=args.batch_size, total_iters=args.iters, lr0=args.lr,
                            lr_halve_every=args.lr_halve_every, lr_floor=args.lr_floor,
                            momentum=args.momentum, weight_decay=args.weight_decay, seed=args.seed)
    out_dir = _out(args, args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for s in levels:
        level_cfg = replace(cfg, seed=experiment.level_seed(args.seed, s))
        model, hist = experiment.train_level(train_ds, s, level_cfg, args.preset, args.augment_copies)
        save_model(model, out_dir / f"h{s}.ecgm")
        hist.to_csv(out_dir / f"h{s}_history.csv")
        cm = experiment.score_model(model, train_ds, s)
        rows.append([s, model.spec.descriptor, f"{float(metrics.accuracy(cm)):.6f}"])
        log.info("level %d done, final loss %.5f", s, hist.loss[-1] if hist.loss else float("nan"))
    _emit(rows, ["level", "model", "train_accuracy"])
    return 0


def _eval_folds(args, ds, score):
    """Apply ``score(subset) -> ConfusionMatrix`` per fold (or to ``--fold``)."""
    if args.fold is not None:
        _, test = _fold_split(ds, args.folds, args.fold, args.seed)
        return [(args.fold, score(test))]
    parts = split_folds(ds, args.folds, args.seed) if args.folds > 1 else [np.arange(len(ds))]
    return [(i, score(ds.subset(p))) for i, p in enumerate(parts) if len(p)]


def _score_row(cm, normal):
    return [f"{float(metrics.accuracy(cm)):.6f}", f"{float(metrics.mean_f1(cm)):.6f}",
            f"{float(metrics.specificity_paper(cm, normal)):.6f}", cm.total]


def _mean_std_rows(label_cols, values):
    arr = np.array(values, dtype=float)
    return [label_cols + ["mean"] + [f"{v:.6f}" for v in arr.mean(axis=0)],
            label_cols + ["std"] + [f"{v:.6f}" for v in arr.std(axis=0)]]


def cmd_eval(args) -> int:
    ds = _load_labelled(args.data)
    model = load_model(args.model)
    level = args.level or experiment.level_of(model.spec)
    if model.spec.num_classes != ds.num_classes:
        raise EcgFusionError(f"model has {model.spec.num_classes} classes, data has {ds.num_classes}")
    names = _class_names(ds)
    results = _eval_folds(args, ds, lambda sub: experiment.score_model(model, sub, level, names))
    rows = [[level, i] + _score_row(cm, args.normal_class) for i, cm in results]
    stats = [[float(r) for r in row[2:5]] for row in rows]
    rows += [r + [sum(cm.total for _, cm in results)] for r in _mean_std_rows([level], stats)]
    _emit(rows, ["level", "fold", "accuracy", "mean_f1", "specificity_paper", "n"])
    total = results[0][1]
    for _, cm in results[1:]:
        total = total + cm
    report = metrics.Report(total, args.normal_class)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eval_report.csv").write_text(report.to_csv())
    print(report.summary(), file=sys.stderr)
    return 0


def _load_bank(bank_dir):
    models = []
    for s in range(1, 7):
        path = Path(bank_dir) / f"h{s}.ecgm"
        if not path.exists():
            break
        models.append(load_model(path))
    if not models:
        raise EcgFusionError(f"no h1.ecgm in {bank_dir}")
    return ScaleBank(models)


def cmd_fuse(args) -> int:
    ds = _load_labelled(args.data)
    bank = _load_bank(args.bank_dir)
    data_top = int(np.log2(min(len(r) for r in ds.records) // 512)) + 1
    top = min(bank.s_max, data_top, args.max_level or 6)
    scheme = FusionScheme(args.scheme)
    names = _class_names(ds)

    def score(sub):
        fused = experiment.fused_predictions(bank, sub, top, scheme)
        return {L: metrics.confusion(p, y, bank.num_classes, names) for L, (p, y) in fused.items()}

    per_fold = dict(_eval_folds(args, ds, score))
    rows = []
    for L in range(1, top + 1):
        weights = ",".join(_fraction(w) for w in fusion_weights(L, scheme).w)
        stats = []
        for i, cms in per_fold.items():
            row = _score_row(cms[L], args.normal_class)
            rows.append([L, scheme.value, weights, i] + row)
            stats.append([float(v) for v in row[:3]])
        n = sum(cms[L].total for cms in per_fold.values())
        rows += [r[:1] + [scheme.value, weights] + r[1:] + [n] for r in _mean_std_rows([L], stats)]
    header = ["level", "scheme", "weights", "fold", "accuracy", "mean_f1", "specificity_paper", "n"]
    _emit(rows, header)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / f"fuse_{scheme.value}.csv", rows, header)
    return 0


def cmd_bench(args) -> int:
    if args.model:
        models = [load_model(args.model)]
    else:
        models = list(_load_bank(args.bank_dir).models)
    if args.level:
        models = [m for m in models if experiment.level_of(m.spec) == args.level]
        if not models:
            raise EcgFusionError(f"no model for level {args.level}")
    rng = np.random.default_rng(args.seed)
    rows = []
    for m in models:
        x = rng.standard_normal((args.batch,) + m.spec.input_dims).astype(m.dtype)
        for _ in range(args.warmup):
            forward(m, x)
        times = []
        for _ in range(args.repeats):
            t0 = time.perf_counter()
            forward(m, x)
            times.append((time.perf_counter() - t0) * 1e3 / args.batch)
        rows.append([experiment.level_of(m.spec), m.spec.descriptor, count_params(m.spec),
                     count_flops(m.spec), args.batch, f"{np.mean(times):.4f}", f"{np.std(times):.4f}"])
    _emit(rows, ["level", "model", "params", "flops", "batch", "mean_ms", "std_ms"])
    return 0


def _shape_rows(spec):
    shapes = infer_shapes(spec)
    pshapes = param_shapes(spec)
    rows = [["input", "-", "x".join(map(str, spec.input_dims)), 0]]
    for i, (layer, shp) in enumerate(zip(spec.layers, shapes)):
        n = sum(int(np.prod(v)) for k, v in pshapes if k.split(".")[0] == str(i))
        rows.append([i, type(layer).__name__, "x".join(map(str, shp)), n])
    return rows


def cmd_inspect(args) -> int:
    if args.model:
        model = load_model(args.model)
        spec = model.spec
        _emit(_shape_rows(spec), ["layer", "type", "output_shape", "params"])
        print(f"# {spec.descriptor}: params {count_params(spec)}, flops {count_flops(spec)}", file=sys.stderr)
        return 0
    ds = read_dataset(args.data)
    names = _class_names(ds)
    lengths = np.array([len(r) for r in ds.records]) if ds.records else np.zeros(1, dtype=int)
    rows = [[lab, "unlabelled" if lab is None else names[lab], n] for lab, n in ds.class_counts().items()]
    _emit(rows, ["label", "class", "count"])
    print(f"# {len(ds)} records at {ds.sample_rate} Hz, {ds.num_classes} classes, "
          f"length min {lengths.min()} max {lengths.max()}", file=sys.stderr)
    return 0


def cmd_export(args) -> int:
    ds = read_dataset(args.record)
    if not 0 <= args.index < len(ds):
        raise EcgFusionError(f"record index {args.index} outside 0..{len(ds) - 1}")
    rec = ds.records[args.index]
    if args.level:
        rec = rec.with_samples(rec.samples[: dsp.level_length(args.level)])
    cfg = dsp.StftConfig()
    spec = dsp.spectrogram(dsp.stft(rec.samples.astype(np.float64), cfg), cfg, rec.sample_rate_hz)
    grid = spec.values
    header = ["freq_hz"] + [f"t{j}" for j in range(grid.shape[1])]
    rows = [[f"{b * spec.freq_resolution_hz:g}"] + [repr(float(v)) for v in row] for b, row in enumerate(grid)]
    path = _out(args, args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(path, rows, header)
    log.info("wrote %dx%d spectrogram to %s", grid.shape[0], grid.shape[1], path)
    return 0


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecgfusion", description="Multi-scale ECG classification and fusion.")
    p.add_argument("--seed", type=_non_negative(int), default=0)
    p.add_argument("--threads", type=_positive(int), default=None, help="BLAS thread limit")
    p.add_argument("--out-dir", default=".", help="base directory for relative output paths")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--classes", default="all", help="comma-separated class names, or 'all'")
    g.add_argument("--per-class", type=_positive(int), default=120)
    g.add_argument("--duration", type=_positive(float), default=32.0, help="seconds per record")
    g.add_argument("--rate", type=_positive(int), default=512)
    g.add_argument("--baseline-amp", type=_non_negative(float), default=0.05)
    g.add_argument("--gaussian-std", type=_non_negative(float), default=0.01)
    g.add_argument("--powerline-amp", type=_non_negative(float), default=0.0)
    g.add_argument("--powerline-hz", type=_positive(float), default=50.0)
    g.add_argument("--relabel", action="store_true", help="number the chosen classes 0..k-1")
    g.add_argument("--out", default="dataset.ecgd")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train scale-specific models")
    t.add_argument("--data", required=True)
    lv = t.add_mutually_exclusive_group(required=True)
    lv.add_argument("--level", type=int, choices=range(1, 7))
    lv.add_argument("--all-levels", action="store_true")
    t.add_argument("--preset", choices=["h_level", "deep_variant", "baseline_1d"], default="h_level")
    t.add_argument("--iters", type=_non_negative(int), default=20_000)
    t.add_argument("--batch-size", type=_positive(int), default=128)
    t.add_argument("--lr", type=_positive(float), default=0.01)
    t.add_argument("--lr-halve-every", type=_positive(int), default=5_000)
    t.add_argument("--lr-floor", type=_positive(float), default=6.25e-4)
    t.add_argument("--momentum", type=_non_negative(float), default=0.9)
    t.add_argument("--weight-decay", type=_non_negative(float), default=5e-6)
    t.add_argument("--augment-copies", type=_non_negative(int), default=0,
                   help="randomly rotated copies of each record added before segmenting")
    t.add_argument("--folds", type=_positive(int), default=3)
    t.add_argument("--holdout-fold", type=int, default=None, help="train on all folds but this one")
    t.add_argument("--out", default="bank")
    t.set_defaults(func=cmd_train)

    for name, func in (("eval", cmd_eval), ("fuse", cmd_fuse)):
        e = sub.add_parser(name, help="score one model per fold" if name == "eval"
                           else "score progressive fusion per level and fold")
        e.add_argument("--data", required=True)
        if name == "eval":
            e.add_argument("--model", required=True)
            e.add_argument("--level", type=int, choices=range(1, 7), default=None)
        else:
            e.add_argument("--bank-dir", required=True)
            e.add_argument("--scheme", choices=[s.value for s in FusionScheme], default="uniform")
            e.add_argument("--max-level", type=int, choices=range(1, 7), default=None)
        e.add_argument("--folds", type=_positive(int), default=3)
        e.add_argument("--fold", type=int, default=None, help="score only this fold")
        e.add_argument("--normal-class", type=_non_negative(int), default=0)
        e.set_defaults(func=func)

    b = sub.add_parser("bench", help="time inference and report static FLOPs")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--bank-dir")
    b.add_argument("--level", type=int, choices=range(1, 7), default=None)
    b.add_argument("--batch", type=_positive(int), default=1)
    b.add_argument("--repeats", type=_positive(int), default=10)
    b.add_argument("--warmup", type=_non_negative(int), default=1)
    b.set_defaults(func=cmd_bench)

    i = sub.add_parser("inspect", help="shape trace of a model or summary of a dataset")
    src = i.add_mutually_exclusive_group(required=True)
    src.add_argument("--model")
    src.add_argument("--data")
    i.set_defaults(func=cmd_inspect)

    x = sub.add_parser("export", help="write a record's spectrogram as CSV")
    x.add_argument("--record", required=True, help="ECGD file holding the record")
    x.add_argument("--index", type=_non_negative(int), default=0)
    x.add_argument("--level", type=int, choices=range(1, 7), default=None,
                   help="use only the first level-sized segment")
    x.add_argument("--out", default="spectrogram.csv")
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    if args.threads:
        from threadpoolctl import threadpool_limits
        limits = threadpool_limits(limits=args.threads)
    else:
        limits = nullcontext()
    try:
        with limits:
            return args.func(args)
    except (EcgFusionError, OSError, ValueError, KeyError) as exc:
        print(f"ecgfusion {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
