"""Rebalance labels: price deviation from a moving-average anchor past a threshold."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .indicators import sma


@dataclass(frozen=True)
class LabelConfig:
    ma_window: int = 20
    tau: float = 0.02
    mode: str = "upper"  # "upper" | "two-sided"

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.ma_window < 2:
            raise ValueError("ma_window must be >= 2")
        if self.mode not in ("upper", "two-sided"):
            raise ValueError(f"unknown label mode {self.mode!r}")


def label_series(prices: np.ndarray, config: LabelConfig) -> np.ndarray:
    """y_t = 1 iff P_t / MA(P_t) - 1 > tau, strict; NaN over the MA warm-up.

    The comparison is evaluated as P_t > MA_t * (1 + tau), which is the same
    strict inequality without the cancellation error of forming the ratio, so
    a deviation of exactly tau stays labeled 0. Two-sided mode also fires on
    P_t < MA_t * (1 - tau).
    """
    p = np.asarray(prices, dtype=np.float64)
    if len(p) < config.ma_window:
        raise ValueError(
            f"need at least {config.ma_window} prices, got {len(p)}"
        )
    anchor = sma(p, config.ma_window)
    hit = p > anchor * (1.0 + config.tau)
    if config.mode == "two-sided":
        hit |= p < anchor * (1.0 - config.tau)
    out = np.where(hit, 1.0, 0.0)
    out[: config.ma_window - 1] = np.nan
    return out
