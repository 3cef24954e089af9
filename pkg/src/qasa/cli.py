"""Command-line entry point: ingest -> features -> label -> train -> backtest -> report.

The artifact root comes from --out, falling back to the QASA_RUN_DIR env var,
then ./qasa_run. A YAML config (--config) sets stage parameters; CLI flags
override file values and the resolved config is echoed into every artifact.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import config as config_mod
from . import pipeline, selftest
from .marketdata import OhlcvError
from .synthetic import SyntheticConfig, write_fixture


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get("QASA_RUN_DIR", "qasa_run"))


def _load_config(args, overrides: dict | None = None) -> config_mod.RunConfig:
    cfg = config_mod.load(getattr(args, "config", None))
    if overrides:
        cfg = config_mod.with_overrides(cfg, overrides)
    return cfg


def cmd_ingest(args) -> int:
    cfg = _load_config(args, {
        ("data", "forward_fill"): args.forward_fill or None,
        ("data", "bar_interval"): args.bar_interval,
    })
    series = pipeline.stage_ingest(args.csv, _out_dir(args), cfg)
    print(f"ingested {len(series)} bars at {series.bar_interval}s interval")
    return 0


def cmd_features(args) -> int:
    cfg = _load_config(args)
    pipeline.stage_features(_out_dir(args), cfg)
    meta = json.loads((_out_dir(args) / "features.json").read_text())
    print(f"wrote {len(meta['columns'])} feature columns, valid from bar {meta['valid_from']}")
    return 0


def cmd_label(args) -> int:
    cfg = _load_config(args, {
        ("label", "tau"): args.tau,
        ("label", "mode"): args.mode,
    })
    pipeline.stage_label(_out_dir(args), cfg)
    meta = json.loads((_out_dir(args) / "label.json").read_text())
    print(f"labeled {meta['n_labeled']} bars, {meta['n_positive']} positive")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args, {
        ("model", "variant"): args.variant,
        ("model", "window"): args.window,
        ("model", "n_layers"): args.layers,
        ("train", "seed"): args.seed,
        ("train", "n_repeats"): args.repeats,
        ("train", "epochs"): args.epochs,
    })
    summary = pipeline.stage_train(_out_dir(args), cfg, workers=args.workers)
    metrics = summary["metrics"]
    acc = metrics.get("accuracy")
    if acc:
        print(f"mean test accuracy {acc['mean']:.3f} ± {acc['sd']:.3f}")
    ret = metrics.get("total_return")
    if ret:
        print(f"mean backtest return {100 * ret['mean']:.2f}% ± {100 * ret['sd']:.2f}%")
    print(f"artifacts in {_out_dir(args)}")
    return 0


def cmd_backtest(args) -> int:
    cfg = _load_config(args, {
        ("backtest", "fee_bps"): args.fee_bps,
        ("backtest", "cooldown_bars"): args.cooldown,
        ("backtest", "mode"): args.mode,
    })
    reports = pipeline.stage_backtest(_out_dir(args), cfg, shots=args.shots)
    for rep in reports:
        print(
            f"return {100 * rep['total_return']:+.2f}%  sharpe {rep['sharpe']:.2f}  "
            f"maxdd {100 * rep['max_drawdown']:.2f}%  trades {rep['n_trades']}"
        )
    return 0


def cmd_report(args) -> int:
    print(pipeline.stage_report(_out_dir(args)))
    return 0


def cmd_selftest(args) -> int:
    results = selftest.run_all(fast=args.fast)
    for result in results:
        print(result.line())
    return 0 if all(r.ok for r in results) else 1


def cmd_synth(args) -> int:
    cfg = SyntheticConfig(n_bars=args.bars, seed=args.seed)
    series = write_fixture(args.csv, cfg)
    print(f"wrote {len(series)} synthetic bars to {args.csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qasa",
        description="Quantum-attention rebalance detection pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="artifact directory (default: $QASA_RUN_DIR or ./qasa_run)")
        p.add_argument("--config", help="YAML run config")

    p = sub.add_parser("ingest", help="validate a candle CSV into the run directory")
    common(p)
    p.add_argument("--csv", required=True, help="input OHLCV CSV")
    p.add_argument("--forward-fill", action="store_true", dest="forward_fill",
                   help="patch gaps by repeating the last close with zero volume")
    p.add_argument("--bar-interval", type=int, dest="bar_interval",
                   help="bar interval in seconds (default: inferred)")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("features", help="compute the engineered feature frame")
    common(p)
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("label", help="append rebalance labels to the feature frame")
    common(p)
    p.add_argument("--tau", type=float, help="deviation threshold")
    p.add_argument("--mode", choices=["upper", "two-sided"])
    p.set_defaults(fn=cmd_label)

    p = sub.add_parser("train", help="train with seeded repeats and summarize")
    common(p)
    p.add_argument("--variant", choices=["sequence", "hybrid"])
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--repeats", type=int, help="number of seeded repeats")
    p.add_argument("--epochs", type=int)
    p.add_argument("--window", type=int, help="token window W")
    p.add_argument("--layers", type=int, help="variational layers L")
    p.add_argument("--workers", type=int, default=1, help="concurrent repeat runs")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("backtest", help="re-run the backtest for every trained run")
    common(p)
    p.add_argument("--fee-bps", type=float, dest="fee_bps")
    p.add_argument("--cooldown", type=int)
    p.add_argument("--mode", choices=["lp", "switch"])
    p.add_argument("--shots", type=int, default=0,
                   help="sample expectations with this many shots (default exact)")
    p.set_defaults(fn=cmd_backtest)

    p = sub.add_parser("report", help="print the Table-1-style summary table")
    common(p)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("selftest", help="run the built-in verification suites")
    p.add_argument("--fast", action="store_true", help="trimmed trial counts")
    p.set_defaults(fn=cmd_selftest)

    p = sub.add_parser("synth", help="write a synthetic regime-switching fixture CSV")
    p.add_argument("--csv", required=True, help="output path")
    p.add_argument("--bars", type=int, default=300)
    p.add_argument("--seed", type=int, default=SyntheticConfig.seed)
    p.set_defaults(fn=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OhlcvError, pipeline.MissingArtifactError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
