"""Engineered bar features: moving averages, volatility, bands, volume proxies.

Every function is causal and returns an array aligned to its input, with NaN
over the warm-up prefix where the indicator is undefined. Recursive
indicators (EMA, EWMA variance, ATR) seed from the first observation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .marketdata import OhlcvSeries, log_returns


@dataclass(frozen=True)
class IndicatorConfig:
    n_ma: int = 20            # MA-ratio and rolling-volatility window
    k_m: int = 5              # momentum horizon
    n_bb: int = 20            # Bollinger window
    k_bb: float = 2.0         # Bollinger width in stds
    n_atr: int = 14           # ATR smoothing window
    n_v: int = 20             # volume and Amihud window
    n_lr: int = 60            # long-run volatility window
    lambda_ewma: float = 0.94  # EWMA variance decay
    n_rsi: int = 14
    macd: tuple[int, int, int] = (12, 26, 9)
    eps: float = 1e-12
    lag_set: tuple[int, ...] = (1, 2, 3, 5)
    interaction_pairs: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        for name in ("n_ma", "n_bb", "n_atr", "n_v", "n_lr", "n_rsi"):
            if getattr(self, name) < 2:
                raise ValueError(f"{name} must be >= 2")
        if not 0.0 < self.lambda_ewma < 1.0:
            raise ValueError("lambda_ewma must lie in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if any(lag < 1 for lag in self.lag_set):
            raise ValueError("lags must be >= 1")


@dataclass
class FeatureFrame:
    """Named per-bar feature columns plus the warm-up boundary valid_from."""

    columns: dict[str, np.ndarray]
    valid_from: int

    def __post_init__(self):
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"column lengths differ: {lengths}")
        self.n_bars = lengths.pop() if lengths else 0
        if self.valid_from >= self.n_bars:
            raise ValueError("warm-up consumes the whole series")
        for name, col in self.columns.items():
            if not np.all(np.isfinite(col[self.valid_from:])):
                raise ValueError(f"column {name!r} non-finite at or after valid_from")

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"feature frame has no column {name!r}")
        return self.columns[name]

    def names(self) -> list[str]:
        return list(self.columns)

    def to_csv(self, path: str | Path, timestamps: np.ndarray | None = None) -> None:
        """One header row, one row per bar at/after valid_from."""
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["bar_index"]
            if timestamps is not None:
                header.append("timestamp")
            header.extend(self.columns)
            writer.writerow(header)
            for t in range(self.valid_from, self.n_bars):
                row: list = [t]
                if timestamps is not None:
                    row.append(int(timestamps[t]))
                row.extend(repr(float(col[t])) for col in self.columns.values())
                writer.writerow(row)


def _nan_prefix(values: np.ndarray, offset: int, total: int) -> np.ndarray:
    out = np.full(total, np.nan)
    out[offset : offset + len(values)] = values
    return out


def sma(x: np.ndarray, n: int) -> np.ndarray:
    """Trailing arithmetic mean over n points, defined from index n-1."""
    x = np.asarray(x, dtype=np.float64)
    if n < 1:
        raise ValueError("window must be >= 1")
    if len(x) < n:
        raise ValueError(f"window {n} exceeds series length {len(x)}")
    means = sliding_window_view(x, n).mean(axis=1)
    return _nan_prefix(means, n - 1, len(x))


def ema(x: np.ndarray, n: int) -> np.ndarray:
    """EMA with alpha = 2/(n+1), seeded at the first observation."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        raise ValueError("empty series")
    if n < 1:
        raise ValueError("window must be >= 1")
    alpha = 2.0 / (n + 1.0)
    out = np.empty_like(x)
    out[0] = x[0]
    for t in range(1, len(x)):
        out[t] = alpha * x[t] + (1.0 - alpha) * out[t - 1]
    return out


def rolling_std(x: np.ndarray, n: int) -> np.ndarray:
    """Trailing sample standard deviation (divisor n-1)."""
    x = np.asarray(x, dtype=np.float64)
    if n < 2:
        raise ValueError("window must be >= 2")
    if len(x) < n:
        raise ValueError(f"window {n} exceeds series length {len(x)}")
    stds = sliding_window_view(x, n).std(axis=1, ddof=1)
    return _nan_prefix(stds, n - 1, len(x))


def rolling_volatility(returns: np.ndarray, n: int) -> np.ndarray:
    """Sample std of the trailing n returns."""
    return rolling_std(returns, n)


def ewma_volatility(returns: np.ndarray, lam: float) -> np.ndarray:
    """sqrt of the EWMA variance recursion, seeded at the first squared return."""
    if not 0.0 < lam < 1.0:
        raise ValueError("lambda must lie in (0, 1)")
    r = np.asarray(returns, dtype=np.float64)
    if len(r) == 0:
        raise ValueError("empty returns")
    var = np.empty_like(r)
    var[0] = r[0] ** 2
    for t in range(1, len(r)):
        var[t] = (1.0 - lam) * r[t] ** 2 + lam * var[t - 1]
    return np.sqrt(var)


def ma_ratio(prices: np.ndarray, n: int) -> np.ndarray:
    """P_t / MA_n(P_t) - 1."""
    return np.asarray(prices, dtype=np.float64) / sma(prices, n) - 1.0


def momentum(prices: np.ndarray, k: int) -> np.ndarray:
    """k-step log momentum ln(P_t / P_{t-k}), the sum of the last k log-returns."""
    p = np.asarray(prices, dtype=np.float64)
    if k < 1:
        raise ValueError("horizon must be >= 1")
    if len(p) < k + 1:
        raise ValueError(f"horizon {k} too long for {len(p)} prices")
    out = np.full(len(p), np.nan)
    out[k:] = np.log(p[k:] / p[:-k])
    return out


def bollinger(
    prices: np.ndarray, n_bb: int, k_bb: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(percent_b, z, upper, lower) bands around the rolling mean.

    Degenerate windows (zero std) map to percent_b = 0.5 and z = 0.
    """
    p = np.asarray(prices, dtype=np.float64)
    mu = sma(p, n_bb)
    s = rolling_std(p, n_bb)
    upper = mu + k_bb * s
    lower = mu - k_bb * s
    with np.errstate(invalid="ignore", divide="ignore"):
        percent_b = (p - lower) / (upper - lower)
        z = (p - mu) / (k_bb * s)
    flat = s == 0.0
    percent_b[flat] = 0.5
    z[flat] = 0.0
    return percent_b, z, upper, lower


def atr(series: OhlcvSeries, n_atr: int) -> tuple[np.ndarray, np.ndarray]:
    """(ATR, ATR/close). True range uses the previous close; first bar is H-L."""
    if len(series) < 2:
        raise ValueError("need at least two bars for ATR")
    h, l, c = series.high, series.low, series.close
    tr = h - l
    prev_c = c[:-1]
    tr = np.concatenate([
        tr[:1],
        np.maximum.reduce([h[1:] - l[1:], np.abs(h[1:] - prev_c), np.abs(l[1:] - prev_c)]),
    ])
    smoothed = ema(tr, n_atr)
    return smoothed, smoothed / c


def volume_features(
    series: OhlcvSeries, returns: np.ndarray, n_v: int, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """(volume ratio, signed volume ratio), bar-aligned.

    Volume ratio is V_t/MA_n(V_t) - 1. Signed volume is sgn(r_t) V_t with
    sgn(0) = 0, scaled by the trailing mean of its absolute value plus eps.
    """
    n_bars = len(series)
    if len(returns) != n_bars - 1:
        raise ValueError("returns must be one shorter than the series")
    if n_bars < n_v + 1:
        raise ValueError(f"window {n_v} too long for {n_bars} bars")
    vol_ratio = series.volume / sma(series.volume, n_v) - 1.0
    signed = np.sign(returns) * series.volume[1:]
    denom = sma(np.abs(signed), n_v) + eps
    signed_ratio = _nan_prefix(signed / denom, 1, n_bars)
    return vol_ratio, signed_ratio


def amihud(
    returns: np.ndarray, volumes: np.ndarray, n: int, eps: float
) -> np.ndarray:
    """Trailing mean of |r| / (V + eps) over n points."""
    r = np.asarray(returns, dtype=np.float64)
    v = np.asarray(volumes, dtype=np.float64)
    if r.shape != v.shape:
        raise ValueError(f"misaligned inputs: {r.shape} vs {v.shape}")
    return sma(np.abs(r) / (v + eps), n)


def rsi(prices: np.ndarray, n_rsi: int) -> np.ndarray:
    """Wilder RSI in [0, 100]; a flat window (no gains, no losses) maps to 50."""
    p = np.asarray(prices, dtype=np.float64)
    if len(p) < n_rsi + 1:
        raise ValueError(f"need {n_rsi + 1} prices, got {len(p)}")
    delta = np.diff(p)
    gains = np.maximum(delta, 0.0)
    losses = np.maximum(-delta, 0.0)
    out = np.full(len(p), np.nan)
    avg_gain = gains[:n_rsi].mean()
    avg_loss = losses[:n_rsi].mean()
    for t in range(n_rsi, len(p)):
        if t > n_rsi:
            avg_gain = (avg_gain * (n_rsi - 1) + gains[t - 1]) / n_rsi
            avg_loss = (avg_loss * (n_rsi - 1) + losses[t - 1]) / n_rsi
        if avg_loss == 0.0 and avg_gain == 0.0:
            out[t] = 50.0
        elif avg_loss == 0.0:
            out[t] = 100.0
        else:
            out[t] = 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    return out


def macd_histogram(
    prices: np.ndarray, fast: int = 12, slow: int = 26, signal: int = 9
) -> np.ndarray:
    """MACD histogram: (EMA_fast - EMA_slow) minus its EMA_signal smoothing."""
    p = np.asarray(prices, dtype=np.float64)
    if len(p) < slow + signal:
        raise ValueError(f"need {slow + signal} prices, got {len(p)}")
    line = ema(p, fast) - ema(p, slow)
    return line - ema(line, signal)


def _first_finite(col: np.ndarray) -> int:
    finite = np.flatnonzero(np.isfinite(col))
    return int(finite[0]) if finite.size else len(col)


def make_frame(columns: dict[str, np.ndarray]) -> FeatureFrame:
    """Assemble a frame; valid_from is the max warm-up over all columns."""
    valid_from = max(_first_finite(col) for col in columns.values())
    return FeatureFrame(dict(columns), valid_from)


def augment_lags_interactions(
    frame: FeatureFrame,
    lag_set: tuple[int, ...],
    pairs: tuple[tuple[str, str], ...],
) -> FeatureFrame:
    """Append lagged copies of every column and the requested products.

    valid_from advances by the largest lag. Pair entries may be column names
    or integer positions in frame order.
    """
    names = frame.names()
    cols = dict(frame.columns)
    max_lag = max(lag_set) if lag_set else 0
    if frame.valid_from + max_lag >= frame.n_bars:
        raise ValueError(f"lag {max_lag} exceeds usable history")
    for name in names:
        base = frame.columns[name]
        for lag in sorted(lag_set):
            shifted = np.full_like(base, np.nan)
            shifted[lag:] = base[:-lag]
            cols[f"{name}_lag{lag}"] = shifted
    for a, b in pairs:
        a = names[a] if isinstance(a, int) else a
        b = names[b] if isinstance(b, int) else b
        if a not in frame.columns or b not in frame.columns:
            raise KeyError(f"interaction pair ({a!r}, {b!r}) is not in the frame")
        cols[f"{a}_x_{b}"] = frame.columns[a] * frame.columns[b]
    return FeatureFrame(cols, frame.valid_from + max_lag)


def build_feature_frame(
    series: OhlcvSeries, config: IndicatorConfig, augment: bool = True
) -> FeatureFrame:
    """Compute the full engineered feature set for one candle series."""
    closes = series.close
    r = log_returns(series)
    r_bar = _nan_prefix(r, 1, len(series))  # bar-aligned returns

    percent_b, bb_z, _, _ = bollinger(closes, config.n_bb, config.k_bb)
    atr_abs, atr_rel = atr(series, config.n_atr)
    vol_ratio, signed_ratio = volume_features(series, r, config.n_v, config.eps)

    cols = {
        "log_return": r_bar,
        "momentum": momentum(closes, config.k_m),
        "ma_ratio": ma_ratio(closes, config.n_ma),
        "rolling_vol": _nan_prefix(rolling_volatility(r, config.n_ma), 1, len(series)),
        "ewma_vol": _nan_prefix(ewma_volatility(r, config.lambda_ewma), 1, len(series)),
        "longrun_vol": _nan_prefix(rolling_volatility(r, config.n_lr), 1, len(series)),
        "rsi": rsi(closes, config.n_rsi),
        "macd_hist": macd_histogram(closes, *config.macd),
        "volume_ratio": vol_ratio,
        "signed_volume_ratio": signed_ratio,
        "amihud": _nan_prefix(
            amihud(r, series.volume[1:], config.n_v, config.eps), 1, len(series)
        ),
        "bb_percent_b": percent_b,
        "bb_z": bb_z,
        "atr": atr_abs,
        "atr_rel": atr_rel,
    }
    frame = make_frame(cols)
    if augment:
        frame = augment_lags_interactions(frame, config.lag_set, config.interaction_pairs)
    return frame
