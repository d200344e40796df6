"""Command-line entry point: ``cfwgan train|evaluate|compare``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_config, preset_names
from .errors import ConfigError, DataError, NumericalAbort
from .evaluation import METRIC_COLUMNS
from .experiment import FINAL_FILE, evaluate_checkpoint, read_final, run_experiment, write_final
from .reference import COLUMNS, MODEL_ROW, REFERENCE

_log = logging.getLogger("cfwgan")


def _overrides(args) -> dict:
    out = {}
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    if args.seed is not None:
        out["seed"] = args.seed
    if args.data is not None:
        out["dataset"] = args.data
    return out


def cmd_train(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    out = Path(args.out) if args.out else Path("runs") / f"{Path(args.config).stem}-seed{cfg.seed}"
    result = run_experiment(cfg, out, threads=args.threads)
    _print_report(result.report.row())
    print(f"artifacts written to {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    report = evaluate_checkpoint(cfg, args.checkpoint, threads=args.threads)
    _print_report(report.row())
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_final(report, cfg.model, cfg.seed, Path(args.out) / FINAL_FILE)
    return 0


def cmd_compare(args) -> int:
    runs: dict[str, list] = {}
    for d in args.runs:
        path = Path(d) / FINAL_FILE if Path(d).is_dir() else Path(d)
        if not path.is_file():
            raise DataError(f"no {FINAL_FILE} in {d}")
        model, _, report = read_final(path)
        runs.setdefault(model, []).append(report.row())

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("source", "model", "n_runs") + COLUMNS)
    for name, values in REFERENCE[args.dataset].items():
        w.writerow(["published", name, ""] + [f"{values[c]:.3f}" for c in COLUMNS])
    for model, rows in sorted(runs.items()):
        mean = [np.mean([r[c] for r in rows]) for c in COLUMNS]
        std = [np.std([r[c] for r in rows]) for c in COLUMNS]
        w.writerow(["mean", MODEL_ROW[model], len(rows)] + [f"{v:.4f}" for v in mean])
        w.writerow(["std", MODEL_ROW[model], len(rows)] + [f"{v:.4f}" for v in std])
    return 0


def _print_report(row: dict) -> None:
    print("  ".join(f"{c} {row[c]:.4f}" for c in METRIC_COLUMNS))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfwgan", description="Train and evaluate GAN-based top-k recommenders.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help=f"config file or preset name ({', '.join(preset_names())})")
        p.add_argument("--seed", type=int, help="model seed, overrides the config")
        p.add_argument("--data", help="dataset path, overrides the config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
        p.add_argument("--threads", type=int, default=1, help="BLAS threads (1 is the deterministic reference)")

    p = sub.add_parser("train", help="train with early stopping, then report test metrics")
    common(p)
    p.add_argument("--out", help="output directory (default runs/<config>-seed<N>)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="test metrics of a saved checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="write final.csv here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="aggregate run directories beside the published table")
    p.add_argument("runs", nargs="+", help="run directories or final.csv files")
    p.add_argument("--dataset", default="ML100K", choices=sorted(REFERENCE))
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return ConfigError.exit_code
    try:
        return args.func(args)
    except (ConfigError, DataError, NumericalAbort) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
