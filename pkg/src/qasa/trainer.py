"""Supervised training of the attention model with validation-based selection.

Optimizer is adaptive moment estimation on every trainable parameter: the
three circuits' angles via parameter-shift gradients, the head analytically.
Class imbalance is handled by weighting the positive class by the train-split
negative/positive ratio. Early stopping restores the best-validation
checkpoint. Runs are deterministic per seed: same seed, same data, same
loss curve, byte-identical checkpoint.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .attention import QasaModel, SampleSet, batch_loss_and_grads, predict_batch
from .marketdata import SplitIndices


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.01
    batch_size: int = 16
    seed: int = 0
    n_repeats: int = 5
    patience: int = 15

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.patience, self.n_repeats) < 1:
            raise ValueError("epochs, batch_size, patience, n_repeats must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning rate must be non-negative")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "n_repeats": self.n_repeats,
            "patience": self.patience,
        }


@dataclass
class RunArtifact:
    model: QasaModel
    seed: int
    losses: list[tuple[int, float, float]]  # (epoch, train_loss, val_loss)
    best_epoch: int
    config: dict
    metrics: dict = field(default_factory=dict)

    def save(self, run_dir: str | Path) -> None:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        self.model.save(run_dir / "checkpoint.json")
        with (run_dir / "losses.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss"])
            for epoch, tr, va in self.losses:
                writer.writerow([epoch, repr(tr), repr(va)])


def bce_loss(p: float, y: float, pos_weight: float = 1.0) -> float:
    """Weighted binary cross-entropy; p clamped into [1e-7, 1 - 1e-7]."""
    p = min(max(p, 1e-7), 1.0 - 1e-7)
    return -(pos_weight * y * math.log(p) + (1.0 - y) * math.log(1.0 - p))


class Adam:
    """Adaptive moment estimation over a dict of named parameter arrays."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict) -> dict[str, np.ndarray]:
        self.t += 1
        out = {}
        for name, value in params.items():
            g = np.asarray(grads[name], dtype=np.float64)
            if name not in self.m:
                self.m[name] = np.zeros_like(g)
                self.v[name] = np.zeros_like(g)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1 ** self.t)
            v_hat = self.v[name] / (1 - self.beta2 ** self.t)
            out[name] = value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out


def split_masks(samples: SampleSet, splits: SplitIndices) -> dict[str, np.ndarray]:
    """Boolean sample masks by the split that owns each sample's bar."""
    bars = samples.bars
    return {
        "train": (bars >= splits.train.start) & (bars < splits.train.stop),
        "val": (bars >= splits.val.start) & (bars < splits.val.stop),
        "test": (bars >= splits.test.start) & (bars < splits.test.stop),
    }


def positive_class_weight(train_labels: np.ndarray) -> float:
    """negatives / positives on the train split; 1.0 when a class is absent."""
    pos = float(np.sum(train_labels == 1.0))
    neg = float(np.sum(train_labels == 0.0))
    if pos == 0.0 or neg == 0.0:
        return 1.0
    return neg / pos


def _mean_loss(states, labels, model, pos_weight) -> float:
    p = np.clip(predict_batch(states, model), 1e-7, 1.0 - 1e-7)
    return float(np.mean(
        -(pos_weight * labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))
    ))


def train(
    model: QasaModel,
    samples: SampleSet,
    splits: SplitIndices,
    config: TrainConfig,
) -> RunArtifact:
    """Gradient-train on the train split, select on validation loss.

    Test-split samples are never evaluated. Raises on an empty split or a
    non-finite loss.
    """
    masks = split_masks(samples, splits)
    train_set = samples.subset(masks["train"])
    val_set = samples.subset(masks["val"])
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValueError(
            f"empty split: {len(train_set)} train / {len(val_set)} val samples"
        )
    pos_weight = positive_class_weight(train_set.labels)
    rng = np.random.default_rng(config.seed)
    opt = Adam(config.learning_rate)

    params = {
        "thetas_q": np.asarray(model.vqc_q.thetas).copy(),
        "thetas_k": np.asarray(model.vqc_k.thetas).copy(),
        "thetas_v": np.asarray(model.vqc_v.thetas).copy(),
        "head_w": np.asarray(model.head_w).copy(),
        "head_b": np.float64(model.head_b),
    }

    def as_model(p) -> QasaModel:
        return model.with_params(
            p["thetas_q"], p["thetas_k"], p["thetas_v"], p["head_w"], float(p["head_b"])
        )

    losses: list[tuple[int, float, float]] = []
    best_val = math.inf
    best_params = {k: np.array(v, copy=True) for k, v in params.items()}
    best_epoch = 0
    stale = 0
    n_train = len(train_set)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        for start in range(0, n_train, config.batch_size):
            batch = order[start : start + config.batch_size]
            current = as_model(params)
            loss, grads = batch_loss_and_grads(
                train_set.states[batch], train_set.labels[batch], current, pos_weight
            )
            if not math.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch} (seed {config.seed})"
                )
            params = opt.step(params, grads)

        current = as_model(params)
        train_loss = _mean_loss(train_set.states, train_set.labels, current, pos_weight)
        val_loss = _mean_loss(val_set.states, val_set.labels, current, pos_weight)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise RuntimeError(f"non-finite epoch loss at epoch {epoch}")
        losses.append((epoch, train_loss, val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_params = {k: np.array(v, copy=True) for k, v in params.items()}
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    return RunArtifact(
        model=as_model(best_params),
        seed=config.seed,
        losses=losses,
        best_epoch=best_epoch,
        config=config.to_dict(),
    )


def summarize(per_run_metrics: list[dict]) -> dict:
    """mean and sample s.d. per metric across runs (s.d. 0 for a single run)."""
    keys = sorted({k for m in per_run_metrics for k in m})
    out = {}
    for key in keys:
        values = [float(m[key]) for m in per_run_metrics if key in m]
        arr = np.asarray(values)
        sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        out[key] = {"mean": float(arr.mean()), "sd": sd, "values": values}
    return out


def repeat_runs(
    model_factory: Callable[[int], QasaModel],
    samples: SampleSet,
    splits: SplitIndices,
    config: TrainConfig,
    evaluate: Callable[[QasaModel], dict] | None = None,
    workers: int = 1,
) -> tuple[list[RunArtifact], dict]:
    """Train n_repeats seeds (base_seed + 0..k-1) and summarize their metrics."""
    seeds = [config.seed + i for i in range(config.n_repeats)]

    def one(seed: int) -> RunArtifact:
        cfg = TrainConfig(
            epochs=config.epochs,
            learning_rate=config.learning_rate,
            batch_size=config.batch_size,
            seed=seed,
            n_repeats=config.n_repeats,
            patience=config.patience,
        )
        artifact = train(model_factory(seed), samples, splits, cfg)
        if evaluate is not None:
            artifact.metrics = evaluate(artifact.model)
        return artifact

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            artifacts = list(pool.map(one, seeds))
    else:
        artifacts = [one(seed) for seed in seeds]
    summary = {
        "seeds": seeds,
        "n_repeats": config.n_repeats,
        "metrics": summarize([a.metrics for a in artifacts]),
    }
    return artifacts, summary
