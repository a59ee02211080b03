"""Command-line front end.

Exit codes: 0 ok, 1 usage, 2 data error, 3 internal invariant violation.
"""
import argparse
import dataclasses
import os
import sys

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _models_arg(p, required=True):
    p.add_argument("--models-dir", required=required, help="directory with ladder/ and adapter checkpoints")


def _overrides(cfg, args, names):
    kw = {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}
    return dataclasses.replace(cfg, **kw)


def cmd_train_lic(args):
    from .training import LicTrainConfig, read_config, train_lic, write_config

    cfg = read_config(args.config, LicTrainConfig) if args.config else LicTrainConfig()
    cfg = _overrides(cfg, args, ("seed", "epochs", "patches_per_epoch"))
    out = os.path.join(args.models_dir, "ladder")
    os.makedirs(out, exist_ok=True)
    log = args.log or os.path.join(args.models_dir, "lic_log.csv")

    def progress(epoch, row):
        if args.verbose:
            print(f"epoch {epoch}: loss {row[4]:.5f} rate {row[5]:.4f} mse {row[6]:.5f} task {row[7]:.5f}")

    ladder, _ = train_lic(cfg, log_path=log, progress=progress)
    if ladder is None:
        raise UsageError("no checkpoints collected (epochs = 0?)")
    ladder.save(out)
    write_config(os.path.join(args.models_dir, "lic.cfg"), cfg)
    for m in ladder:
        print(f"QP {m.nominal_qp}: {m.bpp:.4f} bpp")
    return EXIT_OK


def cmd_train_adapter(args):
    from .pipeline import Models
    from .training import (AdapterTrainConfig, SystemConfig, fima_data, generate_images, iha_data, ima_data,
                           load_models, read_config, train_adapter, write_config)
    from .training.system import training_sequences

    cfg = read_config(args.config, AdapterTrainConfig) if args.config else AdapterTrainConfig(kind=args.kind)
    cfg = dataclasses.replace(_overrides(cfg, args, ("seed", "epochs", "patches_per_epoch")), kind=args.kind)
    sys_cfg = SystemConfig(seed=cfg.seed)
    models = load_models(args.models_dir)
    if args.kind in ("iha", "ima") and models.ladder is None:
        raise FileNotFoundError(f"{args.models_dir}/ladder is required to train {args.kind}")
    if args.kind == "iha":
        data = iha_data(models.ladder, generate_images(sys_cfg.iha_images, (sys_cfg.height, sys_cfg.width),
                                                       seed=cfg.seed * 2 + 7))
    elif args.kind == "ima":
        if models.iha is None:
            raise FileNotFoundError(f"{args.models_dir}/iha.nnvw is required to train ima")
        data = ima_data(Models(models.ladder, models.iha, None, None), training_sequences(sys_cfg),
                        intra_period=args.intra_period)
    else:
        data = fima_data(training_sequences(sys_cfg), intra_period=args.intra_period)
    model, rows = train_adapter(data, cfg, log_path=os.path.join(args.models_dir, f"{args.kind}_log.csv"))
    model.save(os.path.join(args.models_dir, f"{args.kind}.nnvw"))
    write_config(os.path.join(args.models_dir, f"{args.kind}.cfg"), cfg)
    if rows:
        print(f"{args.kind}: {len(data)} training frames, final loss {rows[-1][1]:.6f}")
    return EXIT_OK


def cmd_encode(args):
    from .io import read_frames
    from .pipeline import EncodeConfig, Models, mux, vcm_encode
    from .training import load_models

    frames = read_frames(args.input)
    config = EncodeConfig(args.qp, args.intra_period, use_iha=not args.no_iha, use_ima=not args.no_ima,
                          force_fallback=args.force_fallback, workers=args.workers)
    models = load_models(args.models_dir) if args.models_dir else Models(None, None, None, None)
    bs = vcm_encode(list(frames), config, models)
    data = mux(bs)
    with open(args.output, "wb") as f:
        f.write(data)
    mode = "fallback" if bs.fallback else "hybrid"
    print(f"{len(frames)} frames, {len(data)} bytes, {8 * len(data) / frames[0][0].size / len(frames):.4f} bpp "
          f"({mode})")
    return EXIT_OK


def cmd_decode(args):
    from .io import write_frames
    from .pipeline import Models, vcm_decode
    from .training import load_models

    with open(args.input, "rb") as f:
        data = f.read()
    models = load_models(args.models_dir) if args.models_dir else Models(None, None, None, None)
    frames = vcm_decode(data, models, args.workers)
    write_frames(args.output, np.stack(frames) if frames else np.zeros((0, 3, 1, 1), np.uint8))
    print(f"{len(frames)} frames decoded")
    return EXIT_OK


def _curve_from_dir(path, config=None):
    from .evaluation import read_rows
    from .evaluation.experiment import curves_from_rows

    csv_path = path if os.path.isfile(path) else os.path.join(path, "results.csv")
    curves = curves_from_rows(read_rows(csv_path))
    if config is None:
        if len(curves) != 1:
            raise ValueError(f"{csv_path} has configs {sorted(curves)}; pick one with --config")
        return next(iter(curves.values()))
    if config not in curves:
        raise ValueError(f"{csv_path} has no config {config!r}")
    return curves[config]


def cmd_eval(args):
    from .evaluation import METRICS, bd_metric

    anchor = _curve_from_dir(args.anchor, args.anchor_config)
    test = _curve_from_dir(args.test, args.test_config)
    for m in METRICS:
        r = bd_metric(anchor, test, m)
        flag = "" if r.valid else "  (no overlap)"
        adj = "  (monotonic-adjusted)" if r.adjusted else ""
        print(f"{m:<14} BD-rate {r.bd_rate:+8.2f} %   BD-task {r.bd_task:+8.4f}{flag}{adj}")
    return EXIT_OK


def cmd_ablate(args):
    from .evaluation import run_experiment
    from .training import SystemConfig, held_out_sequences, load_models

    models = load_models(args.models_dir)
    missing = [k for k in ("ladder", "iha", "ima", "fima") if getattr(models, k) is None]
    if missing:
        raise FileNotFoundError(f"{args.models_dir}: missing {', '.join(missing)}")
    models.ladder.check_monotone()
    seqs = held_out_sequences(SystemConfig(), args.sequences)
    qps = tuple(args.qps) if args.qps else (22, 27, 32, 37, 42, 47)
    report = run_experiment(models, seqs, qps, intra_period=args.intra_period, workers=args.workers)
    os.makedirs(args.output, exist_ok=True)
    report.write_csv(os.path.join(args.output, "results.csv"))
    _write_bd(report, os.path.join(args.output, "bd.csv"))
    _print_bd(report)
    return EXIT_OK


def _write_bd(report, path):
    import csv

    rows = report.bd_rows()
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})


def _print_bd(report):
    for r in report.bd_rows():
        print(f"{r['config']:<12} " + "  ".join(
            f"{m}: BD-rate {r[f'bd_rate_{m}']:+7.2f} % BD-task {r[f'bd_task_{m}']:+7.3f}"
            for m in ("feat_fidelity", "map", "psnr")))


def cmd_report(args):
    from .evaluation import complexity_rows, format_complexity, read_rows, report_from_rows

    if args.macs or not args.csv:
        print(format_complexity(complexity_rows()))
    if not args.csv:
        return EXIT_OK
    report = report_from_rows(read_rows(args.csv))
    if report.bd:
        _print_bd(report)
    if args.svg:
        pattern = args.svg if "{metric}" in args.svg else os.path.join(args.svg, "{metric}.svg")
        if "{metric}" not in args.svg:
            os.makedirs(args.svg, exist_ok=True)
        for p in report.write_svg(pattern):
            print(f"wrote {p}")
    return EXIT_OK


def build_parser():
    p = _Parser(prog="nnvvc", description="Hybrid learned/block video codec for machine consumption.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train-lic", help="train the LIC quality ladder")
    _models_arg(t)
    t.add_argument("--config", help="key = value training config")
    t.add_argument("--seed", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--patches-per-epoch", type=int)
    t.add_argument("--log")
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(func=cmd_train_lic)

    a = sub.add_parser("train-adapter", help="train IHA, IMA or F-IMA")
    _models_arg(a)
    a.add_argument("--kind", required=True, choices=("iha", "ima", "fima"))
    a.add_argument("--config")
    a.add_argument("--seed", type=int)
    a.add_argument("--epochs", type=int)
    a.add_argument("--patches-per-epoch", type=int)
    a.add_argument("--intra-period", type=int, default=8)
    a.set_defaults(func=cmd_train_adapter)

    e = sub.add_parser("encode", help="encode a video or image")
    e.add_argument("--input", required=True)
    e.add_argument("--output", required=True)
    e.add_argument("--qp", type=int, required=True, help="target inter QP (intra uses QP - 5)")
    e.add_argument("--intra-period", type=int, default=32)
    e.add_argument("--no-iha", action="store_true")
    e.add_argument("--no-ima", action="store_true")
    e.add_argument("--force-fallback", action="store_true")
    e.add_argument("--workers", type=int, default=1)
    _models_arg(e, required=False)
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="decode a bitstream")
    d.add_argument("--input", required=True)
    d.add_argument("--output", required=True)
    d.add_argument("--workers", type=int, default=1)
    _models_arg(d, required=False)
    d.set_defaults(func=cmd_decode)

    v = sub.add_parser("eval", help="BD metrics between two result sets")
    v.add_argument("--anchor", required=True, help="directory (results.csv) or CSV file")
    v.add_argument("--test", required=True)
    v.add_argument("--anchor-config")
    v.add_argument("--test-config")
    v.set_defaults(func=cmd_eval)

    b = sub.add_parser("ablate", help="run the five-configuration experiment")
    _models_arg(b)
    b.add_argument("--output", required=True)
    b.add_argument("--sequences", type=int, default=5)
    b.add_argument("--qps", type=int, nargs="+")
    b.add_argument("--intra-period", type=int, default=8)
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=cmd_ablate)

    r = sub.add_parser("report", help="BD table, plots and complexity")
    r.add_argument("--csv", help="results.csv from ablate")
    r.add_argument("--svg", help="output directory, or a pattern containing {metric}")
    r.add_argument("--macs", action="store_true", help="print the complexity table")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    from .entropy import CorruptStreamError
    from .lic.ladder import LadderError
    from .nn.autograd import GraphError

    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "qp", None) is not None and not 0 <= args.qp <= 63:
            raise UsageError(f"--qp must be in [0, 63], got {args.qp}")
        if getattr(args, "intra_period", None) is not None and args.intra_period < 1:
            raise UsageError("--intra-period must be positive")
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except LadderError as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except (CorruptStreamError, OSError, ValueError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (AssertionError, ArithmeticError, GraphError) as e:
        print(f"invariant violation: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
