"""File-driven pipeline stages shared by the CLI.

Each stage reads its prerequisite artifacts from the run directory and writes
its own: ingest -> ohlcv.csv, features -> features.csv, label -> label column,
train -> run_<seed>/ artifacts + summary.json, backtest -> per-run report.json
and equity.csv, report -> aggregate report.json. Artifacts embed the resolved
config and contain no wall-clock timestamps, so identical configs reproduce
byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from . import attention, backtest, featuremap, trainer
from .config import RunConfig
from .indicators import build_feature_frame
from .labeling import label_series
from .marketdata import OhlcvSeries, SplitIndices, chronological_split, load_ohlcv, save_ohlcv


class MissingArtifactError(FileNotFoundError):
    """A stage ran before its prerequisite stage."""


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(
            f"missing artifact {path.name!r}: run the {produced_by!r} stage first"
        )
    return path


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))


def stage_ingest(csv_path: str | Path, out_dir: Path, cfg: RunConfig) -> OhlcvSeries:
    series = load_ohlcv(
        csv_path,
        forward_fill=cfg.data.forward_fill,
        bar_interval=cfg.data.bar_interval,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    save_ohlcv(series, out_dir / "ohlcv.csv")
    _write_json(out_dir / "ingest.json", {
        "source": str(csv_path),
        "n_bars": len(series),
        "bar_interval": series.bar_interval,
        "config": cfg.to_dict(),
    })
    return series


def _load_series(out_dir: Path) -> OhlcvSeries:
    return load_ohlcv(_require(out_dir / "ohlcv.csv", "ingest"))


def stage_features(out_dir: Path, cfg: RunConfig) -> None:
    series = _load_series(out_dir)
    frame = build_feature_frame(series, cfg.indicators)
    frame.to_csv(out_dir / "features.csv", timestamps=series.timestamps)
    _write_json(out_dir / "features.json", {
        "n_bars": frame.n_bars,
        "valid_from": frame.valid_from,
        "columns": frame.names(),
        "config": cfg.to_dict(),
    })


def stage_label(out_dir: Path, cfg: RunConfig) -> None:
    series = _load_series(out_dir)
    features_path = _require(out_dir / "features.csv", "features")
    labels = label_series(series.close, cfg.label)

    with features_path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    if "label" in header:
        header = header[: header.index("label")]
        data = [row[: len(header)] for row in data]
    bar_col = header.index("bar_index")
    header.append("label")
    for row in data:
        row.append(repr(float(labels[int(row[bar_col])])))
    with features_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(data)
    finite = labels[np.isfinite(labels)]
    _write_json(out_dir / "label.json", {
        "n_labeled": int(finite.size),
        "n_positive": int(finite.sum()),
        "config": cfg.to_dict(),
    })


def load_labels(out_dir: Path, n_bars: int) -> np.ndarray:
    """Label column from features.csv, realigned to bar index; NaN where absent."""
    features_path = _require(out_dir / "features.csv", "features")
    labels = np.full(n_bars, np.nan)
    with features_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "label" not in reader.fieldnames:
            raise MissingArtifactError(
                "features.csv has no 'label' column: run the 'label' stage first"
            )
        for row in reader:
            labels[int(row["bar_index"])] = float(row["label"])
    return labels


def build_samples(
    series: OhlcvSeries,
    labels: np.ndarray,
    splits: SplitIndices,
    cfg: RunConfig,
) -> tuple[attention.SampleSet, featuremap.MinMaxScaler | None]:
    """Variant-appropriate encoded samples; the hybrid scaler fits on train rows only."""
    if cfg.model.variant == "sequence":
        return attention.build_sequence_samples(series.close, labels, cfg.model.window), None
    frame = build_feature_frame(series, cfg.indicators)
    channels = featuremap.six_scalar_channels(frame, cfg.indicators)
    scaler = featuremap.fit_minmax(channels, splits.train)
    angles = featuremap.encode_angles_batch(channels, scaler)
    samples = attention.build_hybrid_samples(angles, labels, cfg.model.window)
    return samples, scaler


def predictions_for_range(
    samples: attention.SampleSet,
    model: attention.QasaModel,
    bar_range: range,
    shots: int = 0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-bar probabilities over bar_range; bars without a sample predict 0."""
    out = np.zeros(len(bar_range))
    mask = (samples.bars >= bar_range.start) & (samples.bars < bar_range.stop)
    if not np.any(mask):
        return out
    sub = samples.subset(mask)
    if shots > 0:
        probs = attention.predict_batch_sampled(sub.states, model, shots, rng)
    else:
        probs = attention.predict_batch(sub.states, model)
    out[sub.bars - bar_range.start] = probs
    return out


def evaluate_model(
    model: attention.QasaModel,
    samples: attention.SampleSet,
    series: OhlcvSeries,
    splits: SplitIndices,
    cfg: RunConfig,
) -> tuple[dict, backtest.BacktestReport]:
    """Test-split accuracy plus the backtest metric set."""
    masks = trainer.split_masks(samples, splits)
    test = samples.subset(masks["test"])
    metrics: dict = {}
    if len(test) > 0:
        probs = attention.predict_batch(test.states, model)
        metrics["accuracy"] = float(np.mean((probs >= cfg.backtest.decision_threshold)
                                            == (test.labels == 1.0)))
    preds = predictions_for_range(samples, model, splits.test)
    report = backtest.simulate(
        series.close[splits.test.start : splits.test.stop], preds, cfg.backtest
    )
    metrics.update({
        "total_return": report.total_return,
        "sharpe": report.sharpe,
        "max_drawdown": report.max_drawdown,
        "calmar": report.calmar if math.isfinite(report.calmar) else 0.0,
    })
    return metrics, report


def stage_train(out_dir: Path, cfg: RunConfig, workers: int = 1) -> dict:
    series = _load_series(out_dir)
    labels = load_labels(out_dir, len(series))
    splits = chronological_split(len(series), cfg.split.fractions)
    samples, scaler = build_samples(series, labels, splits, cfg)

    def factory(seed: int) -> attention.QasaModel:
        return attention.new_model(
            cfg.model.variant, cfg.model.window, cfg.model.n_layers, seed, scaler=scaler
        )

    def evaluate(model: attention.QasaModel) -> dict:
        metrics, _ = evaluate_model(model, samples, series, splits, cfg)
        return metrics

    artifacts, summary = trainer.repeat_runs(
        factory, samples, splits, cfg.train, evaluate=evaluate, workers=workers
    )
    for artifact in artifacts:
        run_dir = out_dir / f"run_{artifact.seed}"
        artifact.save(run_dir)
        _, report = evaluate_model(artifact.model, samples, series, splits, cfg)
        report.save(run_dir / "report.json")
        report.save_equity_csv(
            run_dir / "equity.csv",
            series.timestamps[splits.test.start : splits.test.stop],
        )
    summary["variant"] = cfg.model.variant
    summary["config"] = cfg.to_dict()
    _write_json(out_dir / "summary.json", summary)
    return summary


def stage_backtest(out_dir: Path, cfg: RunConfig, shots: int = 0) -> list[dict]:
    series = _load_series(out_dir)
    labels = load_labels(out_dir, len(series))
    splits = chronological_split(len(series), cfg.split.fractions)
    run_dirs = sorted(out_dir.glob("run_*"))
    if not run_dirs:
        raise MissingArtifactError("no run_<seed> directories: run the 'train' stage first")
    samples, _ = build_samples(series, labels, splits, cfg)
    out = []
    for run_dir in run_dirs:
        model = attention.QasaModel.load(_require(run_dir / "checkpoint.json", "train"))
        rng = np.random.default_rng(int(run_dir.name.split("_")[1])) if shots else None
        preds = predictions_for_range(samples, model, splits.test, shots=shots, rng=rng)
        report = backtest.simulate(
            series.close[splits.test.start : splits.test.stop], preds, cfg.backtest
        )
        report.save(run_dir / "report.json")
        report.save_equity_csv(
            run_dir / "equity.csv",
            series.timestamps[splits.test.start : splits.test.stop],
        )
        out.append(report.to_dict())
    return out


def format_report_table(summary: dict) -> str:
    """Table-1-style text table: Model, Return, Sharpe, MaxDD, Calmar."""
    metrics = summary["metrics"]
    model_name = "QASA-" + summary.get("variant", "?").capitalize()

    def cell(key: str, pct: bool) -> str:
        if key not in metrics:
            return "n/a"
        m, s = metrics[key]["mean"], metrics[key]["sd"]
        if pct:
            return f"{100 * m:.2f}% ± {100 * s:.2f}%"
        return f"{m:.2f} ± {s:.2f}"

    headers = ["Model", "Return", "Sharpe", "MaxDD", "Calmar"]
    row = [
        model_name,
        cell("total_return", True),
        cell("sharpe", False),
        cell("max_drawdown", True),
        cell("calmar", False),
    ]
    widths = [max(len(h), len(v)) for h, v in zip(headers, row)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
        "  ".join(v.ljust(w) for v, w in zip(row, widths)),
    ]
    return "\n".join(lines)


def stage_report(out_dir: Path) -> str:
    summary_path = _require(out_dir / "summary.json", "train")
    summary = json.loads(summary_path.read_text())
    table = format_report_table(summary)
    _write_json(out_dir / "report.json", {
        "table": summary["metrics"],
        "model": "QASA-" + summary.get("variant", "?").capitalize(),
        "seeds": summary.get("seeds"),
        "config": summary.get("config"),
    })
    return table
