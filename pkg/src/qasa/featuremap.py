"""Six-channel scalar aggregation, train-split min-max scaling, angle encoding.

The eight angle slots map onto six qubits: one RY per qubit, with extra RZ
rotations on the composite qubits (RSI/MACD and band-position/ATR). Scalers
are fitted on train-range rows only; values outside [min, max] saturate at
theta = 0 or 2*pi via the clip.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import qsim
from .indicators import FeatureFrame, IndicatorConfig

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Channel order doubles as the angle-slot order.
CHANNELS = (
    "momentum",      # RY qubit 0
    "ma_ratio",      # RY qubit 1
    "vol_regime",    # RY qubit 2
    "rsi_norm",      # RY qubit 3
    "macd_hist",     # RZ qubit 3
    "volume_ratio",  # RY qubit 4
    "bb_position",   # RY qubit 5
    "atr_rel",       # RZ qubit 5
)
N_CHANNELS = len(CHANNELS)


class SixScalars(NamedTuple):
    """One bar's channel values, in CHANNELS order."""

    momentum: float
    ma_ratio: float
    vol_regime: float
    rsi_norm: float
    macd_hist: float
    volume_ratio: float
    bb_position: float
    atr_rel: float


def six_scalar_channels(frame: FeatureFrame, config: IndicatorConfig) -> np.ndarray:
    """(n_bars, 8) channel matrix; rows before frame.valid_from stay NaN.

    The volatility-regime channel is ln(ewma_vol / longrun_vol); a zero
    long-run (or zero EWMA) volatility maps to 0 with a data-quality warning.
    Band position is clipped into [0, 1].
    """
    required = (
        "momentum", "ma_ratio", "ewma_vol", "longrun_vol", "rsi",
        "macd_hist", "volume_ratio", "bb_percent_b", "atr_rel",
    )
    for name in required:
        if name not in frame.columns:
            raise KeyError(f"feature frame is missing column {name!r}")

    ewma = frame.column("ewma_vol")
    longrun = frame.column("longrun_vol")
    degenerate = (longrun <= 0.0) | (ewma <= 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        vol_regime = np.log(ewma / longrun)
    vol_regime[degenerate] = 0.0
    n_degenerate = int(np.count_nonzero(degenerate[frame.valid_from:]))
    if n_degenerate:
        logger.warning(
            "volatility regime degenerate on %d bars (zero vol), mapped to 0",
            n_degenerate,
        )

    out = np.column_stack([
        frame.column("momentum"),
        frame.column("ma_ratio"),
        vol_regime,
        frame.column("rsi") / 100.0,
        frame.column("macd_hist"),
        frame.column("volume_ratio"),
        np.clip(frame.column("bb_percent_b"), 0.0, 1.0),
        frame.column("atr_rel"),
    ])
    out[: frame.valid_from, :] = np.nan
    return out


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-channel (min, max) fitted on the train split only."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64).copy()
        hi = np.asarray(self.hi, dtype=np.float64).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("scaler bounds must be 1-d and matched")
        if np.any(hi < lo):
            raise ValueError("scaler has max < min")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def degenerate(self) -> np.ndarray:
        return self.hi == self.lo

    def to_dict(self) -> dict:
        return {
            CHANNELS[i]: {"a": float(self.lo[i]), "b": float(self.hi[i])}
            for i in range(len(self.lo))
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MinMaxScaler":
        lo = np.array([d[name]["a"] for name in CHANNELS])
        hi = np.array([d[name]["b"] for name in CHANNELS])
        return cls(lo, hi)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "MinMaxScaler":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit_minmax(channels: np.ndarray, train_range: range) -> MinMaxScaler:
    """Per-channel (min, max) over the finite train-range rows."""
    rows = channels[train_range.start : train_range.stop]
    if rows.size == 0:
        raise ValueError("empty train range")
    finite = np.all(np.isfinite(rows), axis=1)
    if not np.any(finite):
        raise ValueError("no finite rows in train range (check warm-up boundary)")
    rows = rows[finite]
    scaler = MinMaxScaler(rows.min(axis=0), rows.max(axis=0))
    if np.any(scaler.degenerate):
        flat = [CHANNELS[i] for i in np.flatnonzero(scaler.degenerate)]
        logger.warning("degenerate (constant) train channels: %s", ", ".join(flat))
    return scaler


def encode_angles(scalars, scaler: MinMaxScaler) -> np.ndarray:
    """theta = 2*pi * clip((z - a)/(b - a), 0, 1) per channel.

    A degenerate channel (a == b on train) maps every value to pi, keeping
    the qubit neutral instead of pinned at |0>.
    """
    row = np.asarray(scalars, dtype=np.float64)
    span = scaler.hi - scaler.lo
    with np.errstate(invalid="ignore", divide="ignore"):
        mm = np.clip((row - scaler.lo) / span, 0.0, 1.0)
    mm = np.where(scaler.degenerate, 0.5, mm)
    return TWO_PI * mm


def encode_angles_batch(channels: np.ndarray, scaler: MinMaxScaler) -> np.ndarray:
    """Row-wise encode_angles over a (rows, 8) channel matrix."""
    span = scaler.hi - scaler.lo
    with np.errstate(invalid="ignore", divide="ignore"):
        mm = np.clip((channels - scaler.lo) / span, 0.0, 1.0)
    mm = np.where(scaler.degenerate, 0.5, mm)
    return TWO_PI * mm


def prepare_hybrid_state(angles) -> qsim.Statevector:
    """Encoded |psi> from |000000>: RY per qubit, then RZ on the composite qubits."""
    a = np.asarray(angles, dtype=np.float64)
    if a.shape != (N_CHANNELS,):
        raise ValueError(f"expected {N_CHANNELS} angles, got {a.shape}")
    state = qsim.zero_state(6)
    state = qsim.apply_ry(state, 0, a[0])
    state = qsim.apply_ry(state, 1, a[1])
    state = qsim.apply_ry(state, 2, a[2])
    state = qsim.apply_ry(state, 3, a[3])
    state = qsim.apply_rz(state, 3, a[4])
    state = qsim.apply_ry(state, 4, a[5])
    state = qsim.apply_ry(state, 5, a[6])
    state = qsim.apply_rz(state, 5, a[7])
    return state
