"""Command-line entry point: ``adjpriv <command>``.

Commands
    preprocess  raw Adult CSV(s) -> train.csv, test.csv, column_map.json
    train       train the obfuscator -> model.txt, history.csv
    obfuscate   pass a dataset CSV through a model with chosen k / lambda
    eval        run one protocol (weak, strong, utility, baseline) -> results CSV
    sweep       tradeoff curve(s), hull plot data and AUC report
    params      parameter-count table for the default architecture

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from . import data as D
from . import nn
from .config import ConfigError, RunConfig, load_config
from .errors import DataError, ModelFormatError, NumericError
from .evaluate import (PROTOCOLS, baseline_protocol, decorrelation_test, strong_adversary_protocol,
                       train_probe, utility_protocol, weak_adversary_protocol, for_role)
from .obfuscator import (REFERENCE_PARAM_COUNT, ObfuscatorArch, load_model, save_model,
                         train_obfuscator)
from .privatize import PrivacyParams, obfuscate_dataset
from .tradeoff import (Splits, convex_hull_auc, emit_curve, emit_hull, gaussian_input_baseline,
                       sweep)

log = logging.getLogger("adjpriv")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _write_rows(path: Path, rows: list[dict], columns):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    path.write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _load_splits(cfg: RunConfig, train_path=None, test_path=None):
    train = D.read_dataset(train_path or cfg.path("train.csv"))
    test = D.read_dataset(test_path or cfg.path("test.csv"))
    obf, aux = D.split(train, D.SplitConfig(1.0 - cfg.aux_fraction, cfg.partition_seed))
    return Splits(obf, aux, test)


# --------------------------------------------------------------------------- commands

def cmd_preprocess(args, cfg: RunConfig) -> int:
    raw = [Path(p) for p in args.raw] if args.raw else cfg.raw
    if not raw:
        raise UsageError("no raw input given (positional paths or [paths] raw)")
    for p in raw:
        if not p.exists():
            raise FileNotFoundError(f"input not found: {p}")
    out = Path(args.out) if args.out else cfg.workdir
    out.mkdir(parents=True, exist_ok=True)
    records = D.read_adult(raw, header=args.header or cfg.raw_header)
    kept = D.drop_missing(records)
    train, test, enc = D.preprocess_adult(records, D.SplitConfig(cfg.train_fraction, cfg.split_seed))
    D.write_dataset(train, out / "train.csv")
    D.write_dataset(test, out / "test.csv")
    manifest = {
        "sources": [p.name for p in raw],
        "records_read": len(records),
        "records_dropped_missing": len(records) - len(kept),
        "records_kept": len(kept),
        "train_records": len(train),
        "test_records": len(test),
        "train_fraction": cfg.train_fraction,
        "split_seed": cfg.split_seed,
        "encoded_width": enc.encoded_width,
        "encoded_width_target": D.TARGET_ENCODED_WIDTH,
        "feature_width": train.width,
        "feature_width_target": D.TARGET_FEATURE_WIDTH,
        "private_label": f"{D.PRIVATE_ATTR}=={D.PRIVATE_POSITIVE}",
        "nonprivate_label": f"{D.NONPRIVATE_ATTR}=={D.NONPRIVATE_POSITIVE}",
        "columns": [c.as_dict() for c in enc.column_map],
    }
    _write_json(out / "column_map.json", manifest)
    print(f"encoded width {enc.encoded_width} (target {D.TARGET_ENCODED_WIDTH}), "
          f"feature width {train.width} (target {D.TARGET_FEATURE_WIDTH}); "
          f"{len(train)} train / {len(test)} test records -> {out}")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    splits = _load_splits(cfg, args.train)
    fit, val = D.split(splits.train, D.SplitConfig(1.0 - cfg.train.val_fraction, cfg.train.seed))
    arch = ObfuscatorArch.dense(splits.train.width, cfg.hidden, cfg.bottleneck)
    model, history = train_obfuscator(arch, fit, val, cfg.train)
    model_path = Path(args.model) if args.model else cfg.path("model.txt")
    model_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, model_path)
    hist_path = Path(args.history) if args.history else cfg.path("history.csv")
    _write_rows(hist_path, history.rows(),
                ("epoch", "train_ae", "val_ae", "train_c", "val_acc", "best"))
    print(f"trained {history.epochs_run} epochs (best {history.best_epoch}, "
          f"early stop {'yes' if history.stopped_early else 'no'}); "
          f"initial val L_ae {history.initial_val_ae:.5f} -> best {model.meta['val_ae']:.5f}")
    return EXIT_OK


def _privacy_from_args(args, cfg: RunConfig) -> PrivacyParams:
    k = args.k if args.k is not None else 0.0
    lam = args.lam if args.lam is not None else cfg.lam_grid[0]
    return PrivacyParams(k=k, lam=lam, g_enabled=not args.no_g, f_enabled=not args.no_f,
                         noise_seed=cfg.noise_seed if args.noise_seed is None else args.noise_seed)


def cmd_obfuscate(args, cfg: RunConfig) -> int:
    model = load_model(args.model or cfg.path("model.txt"))
    dataset = D.read_dataset(args.data)
    privacy = _privacy_from_args(args, cfg)
    out = obfuscate_dataset(model, dataset, privacy)
    D.write_dataset(out, args.out)
    print(f"obfuscated {len(out)} records ({privacy.label()}) -> {args.out}")
    return EXIT_OK


RESULT_COLUMNS = ("protocol", "k", "lambda", "seed", "accuracy", "baseline")


def cmd_eval(args, cfg: RunConfig) -> int:
    if args.protocol not in PROTOCOLS:
        raise UsageError(f"unknown protocol {args.protocol!r}; choose from {', '.join(PROTOCOLS)}")
    splits = _load_splits(cfg)
    config = cfg.probe_config(splits.test.width)
    rows = []
    if args.protocol == "baseline":
        for target in ("private", "nonprivate"):
            source = splits.aux if target == "private" else splits.train
            res = baseline_protocol(source, splits.test, config, target)
            rows.append({**res.row(), "protocol": f"baseline_{target}"})
    else:
        model = load_model(args.model or cfg.path("model.txt"))
        privacy = _privacy_from_args(args, cfg)
        obf_test = obfuscate_dataset(model, splits.test, privacy)
        if args.protocol == "weak":
            res = weak_adversary_protocol(splits.aux, obf_test, config, privacy)
            rows.append(res.row())
        elif args.protocol == "strong":
            res = strong_adversary_protocol(model, privacy, splits.aux, obf_test, config)
            rows.append(res.row())
        else:
            res = utility_protocol(model, privacy, splits.train, splits.test, config,
                                   cfg.eval_mode, obf_test=obf_test)
            for mode in ("original", "obfuscated"):
                rows.append({**res.row(), "protocol": f"utility_{mode}", "accuracy": res.details[mode]})
    out = Path(args.out) if args.out else cfg.path(f"eval_{args.protocol}.csv")
    _write_rows(out, rows, RESULT_COLUMNS)
    for row in rows:
        print(f"{row['protocol']}: accuracy {row['accuracy']:.4f} (majority {row['baseline']:.4f})")
    return EXIT_OK


def cmd_sweep(args, cfg: RunConfig) -> int:
    splits = _load_splits(cfg)
    model = load_model(args.model or cfg.path("model.txt"))
    config = cfg.probe_config(splits.test.width)
    out = Path(args.out) if args.out else cfg.path("sweep")
    out.mkdir(parents=True, exist_ok=True)
    adversary_type = args.adversary or cfg.adversary
    eval_mode = args.eval_mode or cfg.eval_mode
    curves = {"proposed": sweep(model, splits, cfg.k_grid, cfg.lam_grid, adversary_type, eval_mode,
                                config, cfg.noise_seed, manifest=out / "manifest_proposed.jsonl",
                                jobs=args.jobs)}
    if args.baseline:
        curves["gaussian_input"] = gaussian_input_baseline(
            splits, cfg.variance_grid, config, adversary_type, eval_mode, cfg.noise_seed,
            manifest=out / "manifest_gaussian_input.jsonl", jobs=args.jobs)
    report = ["curve,auc_zero,auc_half,points"]
    for name, curve in curves.items():
        emit_curve(curve, out / f"curve_{name}.csv")
        emit_hull(curve, out / f"hull_{name}.dat")
        zero, half = convex_hull_auc(curve, "zero"), convex_hull_auc(curve, "half")
        report.append(f"{name},{zero!r},{half!r},{len(curve.points)}")
        print(f"{name}: convex-hull AUC {zero:.4f} (origin 0,0)  {half:.4f} (origin 0.5,0.5)")
    (out / "auc.csv").write_text("\n".join(report) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_decorrelate(args, cfg: RunConfig) -> int:
    splits = _load_splits(cfg)
    model = load_model(args.model or cfg.path("model.txt"))
    config = cfg.probe_config(splits.test.width)
    lam = args.lam if args.lam is not None else cfg.lam_grid[0]
    clamp_only = PrivacyParams(k=0.0, lam=lam, f_enabled=False, noise_seed=cfg.noise_seed)
    provider = train_probe(config, obfuscate_dataset(model, splits.train, for_role(clamp_only, "train")),
                           "nonprivate")
    res = decorrelation_test(model, splits.test, lam, provider, config, cfg.decorrelation_seed)
    out = Path(args.out) if args.out else cfg.path("decorrelation.json")
    _write_json(out, res.summary())
    print(f"agreement between injected and predicted class: {res.agreement:.4f}")
    return EXIT_OK


def cmd_params(args, cfg: RunConfig) -> int:
    arch = ObfuscatorArch.reference()
    total = arch.param_count()
    print(f"{'network':<12}{'layers':<26}{'parameters':>12}")
    for name, spec in arch.specs().items():
        dims = "-".join([str(spec.in_dim)] + [str(l.out_dim) for l in spec.layers])
        print(f"{name:<12}{dims:<26}{nn.param_count(spec):>12,}")
    dev = (total - REFERENCE_PARAM_COUNT) / REFERENCE_PARAM_COUNT
    print(f"{'total':<38}{total:>12,}")
    print(f"reference count {REFERENCE_PARAM_COUNT:,}; deviation {total - REFERENCE_PARAM_COUNT:+,} "
          f"({dev:+.2%}) -- {'within' if abs(dev) <= 0.05 else 'OUTSIDE'} 5%")
    return EXIT_OK


# --------------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adjpriv", description="Adjustable-privacy obfuscator for tabular data.")
    parser.add_argument("-c", "--config", help="run configuration file")
    parser.add_argument("-w", "--workdir", help="work directory (default $OBF_WORKDIR or ./work)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("preprocess", help="clean, encode and split raw Adult CSV files")
    p.add_argument("raw", nargs="*", help="raw CSV file(s); default [paths] raw")
    p.add_argument("--out", help="output directory (default: work dir)")
    p.add_argument("--header", action="store_true", help="raw files start with a header row")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="train the obfuscator")
    p.add_argument("--train", help="training CSV (default work/train.csv)")
    p.add_argument("--model", help="model output path (default work/model.txt)")
    p.add_argument("--history", help="history CSV path (default work/history.csv)")
    p.set_defaults(func=cmd_train)

    def privacy_flags(p):
        p.add_argument("--k", type=float, help="noise variance multiplier (variance = k * nu)")
        p.add_argument("--lam", type=float, help="clamp value lambda (<= 0)")
        p.add_argument("--no-f", action="store_true", help="disable the rest-head noise")
        p.add_argument("--no-g", action="store_true", help="disable the label clamp")
        p.add_argument("--noise-seed", type=int)

    p = sub.add_parser("obfuscate", help="obfuscate a dataset CSV")
    p.add_argument("--model")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    privacy_flags(p)
    p.set_defaults(func=cmd_obfuscate)

    p = sub.add_parser("eval", help="run one measurement protocol")
    p.add_argument("protocol", help="weak | strong | utility | baseline")
    p.add_argument("--model")
    p.add_argument("--out")
    privacy_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="tradeoff sweep with convex-hull AUC")
    p.add_argument("--model")
    p.add_argument("--out", help="output directory (default work/sweep)")
    p.add_argument("--adversary", choices=("weak", "strong"))
    p.add_argument("--eval-mode", choices=("original", "obfuscated"))
    p.add_argument("--baseline", action="store_true", help="also sweep the Gaussian-input baseline")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("decorrelate", help="random class-injection decorrelation test")
    p.add_argument("--model")
    p.add_argument("--lam", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_decorrelate)

    p = sub.add_parser("params", help="parameter-count table")
    p.set_defaults(func=cmd_params)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.workdir)
        return args.func(args, cfg)
    except (UsageError, ConfigError) as exc:
        print(f"adjpriv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFormatError, FileNotFoundError, OSError) as exc:
        print(f"adjpriv: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"adjpriv: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
