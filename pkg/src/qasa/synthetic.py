"""Synthetic regime-switching OHLCV fixture with an injected MA-deviation signal.

The log-price follows geometric Brownian motion whose volatility flips
between a calm and a volatile regime; on top of that, pump phases inject
quiet, persistent positive drift for several bars, the pattern that pushes
price above its moving-average anchor. Pump phases also scale volume, so
both raw return windows and engineered features carry the signal. Everything
is deterministic per seed.

The companion oracle measures how learnable the injected signal is: a
momentum-threshold classifier fitted on the train split and scored on the
test split, restricted to the same lookback a detection model would see.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .indicators import sma
from .labeling import LabelConfig, label_series
from .marketdata import OhlcvSeries, SplitIndices, save_ohlcv

DAY_SECONDS = 86_400
_EPOCH_2024 = 1_704_067_200  # 2024-01-01T00:00:00Z


@dataclass(frozen=True)
class SyntheticConfig:
    n_bars: int = 300
    seed: int = 5
    start_price: float = 100.0
    base_drift: float = 0.0002
    calm_sigma: float = 0.005
    volatile_sigma: float = 0.016
    regime_flip_prob: float = 0.04
    pump_gap_min: int = 12   # idle bars between pump cycles
    pump_gap_max: int = 24
    pump_len_min: int = 8
    pump_len_max: int = 12
    pump_drift: float = 0.013
    pump_sigma: float = 0.003
    fade_len_min: int = 5    # noisy correction right after a pump
    fade_len_max: int = 8
    fade_drift: float = -0.010
    fade_sigma: float = 0.011
    base_volume: float = 1000.0


def generate_series(config: SyntheticConfig = SyntheticConfig()) -> tuple[OhlcvSeries, dict]:
    """Candle series plus the latent generator state (regimes, pump mask)."""
    rng = np.random.default_rng(config.seed)
    n = config.n_bars
    volatile = np.zeros(n, dtype=bool)
    pump = np.zeros(n, dtype=bool)
    log_p = np.empty(n)
    log_p[0] = np.log(config.start_price)

    is_volatile = False
    pump_left = 0
    fade_left = 0
    gap_left = int(rng.integers(config.pump_gap_min, config.pump_gap_max + 1))
    for t in range(1, n):
        if rng.random() < config.regime_flip_prob:
            is_volatile = not is_volatile
        if pump_left == 0 and fade_left == 0:
            if gap_left == 0:
                pump_left = int(rng.integers(config.pump_len_min, config.pump_len_max + 1))
                gap_left = int(rng.integers(config.pump_gap_min, config.pump_gap_max + 1))
            else:
                gap_left -= 1
        if pump_left > 0:
            drift, sigma = config.pump_drift, config.pump_sigma
            pump[t] = True
            pump_left -= 1
            if pump_left == 0:
                fade_left = int(rng.integers(config.fade_len_min, config.fade_len_max + 1))
        elif fade_left > 0:
            drift, sigma = config.fade_drift, config.fade_sigma
            fade_left -= 1
        else:
            drift = config.base_drift
            sigma = config.volatile_sigma if is_volatile else config.calm_sigma
        volatile[t] = is_volatile
        log_p[t] = log_p[t - 1] + drift + sigma * rng.standard_normal()

    close = np.exp(log_p)
    open_ = np.concatenate([[config.start_price], close[:-1]])
    sigma_path = np.where(pump, config.pump_sigma,
                          np.where(volatile, config.volatile_sigma, config.calm_sigma))
    wick_hi = np.abs(rng.standard_normal(n)) * sigma_path * 0.5
    wick_lo = np.abs(rng.standard_normal(n)) * sigma_path * 0.5
    high = np.maximum(open_, close) * (1.0 + wick_hi)
    low = np.minimum(open_, close) * (1.0 - wick_lo)
    volume = config.base_volume * np.exp(0.3 * rng.standard_normal(n)) * (1.0 + 2.0 * pump)

    timestamps = _EPOCH_2024 + DAY_SECONDS * np.arange(n, dtype=np.int64)
    series = OhlcvSeries(timestamps, open_, high, low, close, volume, DAY_SECONDS)
    latent = {"pump": pump, "volatile": volatile}
    return series, latent


def oracle_accuracy(
    series: OhlcvSeries,
    splits: SplitIndices,
    label_config: LabelConfig = LabelConfig(),
    lookback: int = 15,
) -> float:
    """Test accuracy of the best train-fitted deviation-threshold classifier.

    The classifier predicts 1 iff P_t / MA_lookback(P_t) - 1 exceeds a
    threshold chosen to maximize train accuracy. The lookback matches the
    price history visible to a window-W detection model (2W - 1 bars), so
    this bounds what such a model could achieve from its inputs.
    """
    labels = label_series(series.close, label_config)
    feats = np.full(len(series), np.nan)
    ratio = series.close / sma(series.close, lookback) - 1.0
    feats[lookback - 1 :] = ratio[lookback - 1 :]

    def usable(rng_: range) -> np.ndarray:
        idx = np.arange(rng_.start, rng_.stop)
        return idx[np.isfinite(labels[idx]) & np.isfinite(feats[idx])]

    train_idx = usable(splits.train)
    test_idx = usable(splits.test)
    if len(train_idx) == 0 or len(test_idx) == 0:
        raise ValueError("not enough usable bars for the oracle")
    candidates = np.unique(feats[train_idx])
    best_threshold, best_acc = candidates[0], -1.0
    for c in candidates:
        acc = np.mean((feats[train_idx] > c) == (labels[train_idx] == 1.0))
        if acc > best_acc:
            best_acc, best_threshold = acc, c
    return float(np.mean((feats[test_idx] > best_threshold) == (labels[test_idx] == 1.0)))


def write_fixture(path, config: SyntheticConfig = SyntheticConfig()) -> OhlcvSeries:
    """Generate and save the fixture CSV; returns the series."""
    series, _ = generate_series(config)
    save_ohlcv(series, path)
    return series
