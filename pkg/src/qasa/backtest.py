"""Fee/cooldown-aware backtest of rebalance signals on an LP value proxy.

Default portfolio model: a constant-product LP position whose value scales
with sqrt(P_t / P_ref) between rebalances. A signal (prediction at or above
the decision threshold, cooldown elapsed) resets the anchor P_ref to the
current price and charges the fee on the rebalanced notional, taken as half
the portfolio value. A simpler flat-vs-long switch mode is available for
sensitivity runs: long while the previous bar's prediction was below the
threshold, flat otherwise, fee on the full notional at position changes.

Metrics: total return, annualized Sharpe, max drawdown, Calmar (annualized
return over |max drawdown|, compounding over periods_per_year / n_bars).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class BacktestConfig:
    fee_bps: float = 30.0
    cooldown_bars: int = 1
    decision_threshold: float = 0.5
    initial_value: float = 1.0
    mode: str = "lp"  # "lp" | "switch"
    periods_per_year: int = 252

    def __post_init__(self):
        if self.fee_bps < 0:
            raise ValueError("fee_bps must be non-negative")
        if self.cooldown_bars < 0:
            raise ValueError("cooldown_bars must be non-negative")
        if not 0.0 < self.decision_threshold < 1.0:
            raise ValueError("decision_threshold must lie in (0, 1)")
        if self.initial_value <= 0:
            raise ValueError("initial_value must be positive")
        if self.mode not in ("lp", "switch"):
            raise ValueError(f"unknown backtest mode {self.mode!r}")

    def to_dict(self) -> dict:
        return {
            "fee_bps": self.fee_bps,
            "cooldown_bars": self.cooldown_bars,
            "decision_threshold": self.decision_threshold,
            "initial_value": self.initial_value,
            "mode": self.mode,
            "periods_per_year": self.periods_per_year,
        }


class Trade(NamedTuple):
    bar: int
    fee_paid: float


@dataclass
class BacktestReport:
    equity: np.ndarray
    trades: list[Trade]
    total_return: float
    sharpe: float
    max_drawdown: float
    calmar: float  # inf when drawdown is zero and return positive
    flags: list[str] = field(default_factory=list)
    config: BacktestConfig = field(default_factory=BacktestConfig)

    def to_dict(self) -> dict:
        calmar = None if not math.isfinite(self.calmar) else self.calmar
        return {
            "total_return": self.total_return,
            "sharpe": self.sharpe,
            "max_drawdown": self.max_drawdown,
            "calmar": calmar,
            "n_trades": len(self.trades),
            "fees_paid": float(sum(t.fee_paid for t in self.trades)),
            "flags": list(self.flags),
            "config": self.config.to_dict(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    def save_equity_csv(self, path: str | Path, timestamps: np.ndarray | None = None) -> None:
        with Path(path).open("w") as fh:
            fh.write("bar_index,timestamp,equity\n")
            for i, v in enumerate(self.equity):
                ts = "" if timestamps is None else int(timestamps[i])
                fh.write(f"{i},{ts},{v!r}\n")


def total_return(equity: np.ndarray) -> float:
    """last / first - 1."""
    eq = np.asarray(equity, dtype=np.float64)
    if len(eq) == 0:
        raise ValueError("empty equity curve")
    return float(eq[-1] / eq[0] - 1.0)


def sharpe(equity: np.ndarray, periods_per_year: int = 252) -> float:
    """mean(bar returns) / sample std * sqrt(periods per year); 0 when std is 0."""
    eq = np.asarray(equity, dtype=np.float64)
    if len(eq) < 3:
        raise ValueError("need at least 3 bars for a Sharpe ratio")
    rets = eq[1:] / eq[:-1] - 1.0
    sd = rets.std(ddof=1)
    if sd == 0.0:
        return 0.0
    return float(rets.mean() / sd * math.sqrt(periods_per_year))


def max_drawdown(equity: np.ndarray) -> float:
    """Worst peak-to-trough decline: min(equity / running max - 1) <= 0."""
    eq = np.asarray(equity, dtype=np.float64)
    if len(eq) == 0:
        raise ValueError("empty equity curve")
    running_max = np.maximum.accumulate(eq)
    return float(np.min(eq / running_max - 1.0))


def calmar(
    total_ret: float,
    max_dd: float,
    n_bars: int,
    periods_per_year: int = 252,
) -> float:
    """Annualized return over |max drawdown|; inf-flagged when drawdown is 0."""
    if n_bars < 1:
        raise ValueError("n_bars must be positive")
    annualized = (1.0 + total_ret) ** (periods_per_year / n_bars) - 1.0
    if max_dd == 0.0:
        if annualized == 0.0:
            return 0.0
        return math.inf if annualized > 0 else -math.inf
    return annualized / abs(max_dd)


def _simulate_lp(prices, signals, cfg):
    n = len(prices)
    equity = np.empty(n)
    trades: list[Trade] = []
    fee_rate = cfg.fee_bps / 1e4
    v_anchor = cfg.initial_value
    p_ref = prices[0]
    last_trade: int | None = None
    for t in range(n):
        v = v_anchor * math.sqrt(prices[t] / p_ref)
        if signals[t] and (last_trade is None or t - last_trade >= cfg.cooldown_bars):
            fee = v * fee_rate * 0.5  # half the notional changes hands
            v -= fee
            trades.append(Trade(t, fee))
            p_ref = prices[t]
            v_anchor = v
            last_trade = t
        equity[t] = v
    return equity, trades


def _simulate_switch(prices, signals, cfg):
    n = len(prices)
    equity = np.empty(n)
    trades: list[Trade] = []
    fee_rate = cfg.fee_bps / 1e4
    v = cfg.initial_value
    position = 1  # long by default; a signal parks the portfolio flat
    last_trade: int | None = None
    for t in range(n):
        if t > 0 and position == 1:
            v *= prices[t] / prices[t - 1]
        target = 0 if signals[t] else 1
        if target != position and (last_trade is None or t - last_trade >= cfg.cooldown_bars):
            fee = v * fee_rate
            v -= fee
            trades.append(Trade(t, fee))
            position = target
            last_trade = t
        equity[t] = v
    return equity, trades


def simulate(
    prices: np.ndarray, predictions: np.ndarray, config: BacktestConfig
) -> BacktestReport:
    """Run the portfolio simulation and compute all metrics.

    predictions are probabilities aligned one-to-one with prices (the test
    split bars); a bar trades when its prediction >= decision_threshold and
    the cooldown since the previous trade has elapsed.
    """
    p = np.asarray(prices, dtype=np.float64)
    pred = np.asarray(predictions, dtype=np.float64)
    if p.shape != pred.shape:
        raise ValueError(f"prices and predictions misaligned: {p.shape} vs {pred.shape}")
    if len(p) == 0:
        raise ValueError("empty price window")
    if np.any(p <= 0):
        raise ValueError("prices must be positive")
    signals = pred >= config.decision_threshold
    if config.mode == "lp":
        equity, trades = _simulate_lp(p, signals, config)
    else:
        equity, trades = _simulate_switch(p, signals, config)

    flags: list[str] = []
    ret = total_return(equity)
    if len(equity) >= 3:
        sr = sharpe(equity, config.periods_per_year)
        rets = equity[1:] / equity[:-1] - 1.0
        if rets.std(ddof=1) == 0.0:
            flags.append("sharpe-degenerate-zero-variance")
    else:
        sr = 0.0
        flags.append("sharpe-degenerate-too-few-bars")
    dd = max_drawdown(equity)
    cal = calmar(ret, dd, len(equity), config.periods_per_year)
    if dd == 0.0:
        flags.append("calmar-degenerate-zero-drawdown")
    return BacktestReport(equity, trades, ret, sr, dd, cal, flags, config)
