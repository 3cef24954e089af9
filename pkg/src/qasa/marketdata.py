"""OHLCV candle ingestion, validation, log-returns, and chronological splits.

CSV contract: header ``timestamp,open,high,low,close,volume``; timestamps are
epoch seconds or ISO-8601, auto-detected once per file. Timestamps are stored
as integer epoch seconds (UTC).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

CSV_HEADER = ["timestamp", "open", "high", "low", "close", "volume"]


class OhlcvError(ValueError):
    """Bad candle data: malformed rows, invariant violations, gaps."""


@dataclass(frozen=True)
class OhlcvBar:
    """One candle; prices strictly positive, volume non-negative."""

    timestamp: int  # epoch seconds, bar open time
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise OhlcvError(f"non-positive price at t={self.timestamp}")
        if self.volume < 0:
            raise OhlcvError(f"negative volume at t={self.timestamp}")
        if self.low > min(self.open, self.close) or self.high < max(self.open, self.close):
            raise OhlcvError(
                f"OHLC invariant violated at t={self.timestamp}: "
                f"low {self.low}, open {self.open}, close {self.close}, high {self.high}"
            )


@dataclass(frozen=True)
class OhlcvSeries:
    """Uniformly spaced candles, strictly increasing timestamps."""

    timestamps: np.ndarray  # int64 epoch seconds
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray
    volume: np.ndarray
    bar_interval: int  # seconds

    def __post_init__(self):
        for name in ("timestamps", "open", "high", "low", "close", "volume"):
            arr = np.asarray(getattr(self, name))
            arr = arr.astype(np.int64 if name == "timestamps" else np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        n = len(self.timestamps)
        if n == 0:
            raise OhlcvError("empty series")
        diffs = np.diff(self.timestamps)
        if np.any(diffs <= 0):
            bad = int(np.flatnonzero(diffs <= 0)[0]) + 1
            raise OhlcvError(f"timestamps not strictly increasing at row {bad}")
        if n > 1 and np.any(diffs != self.bar_interval):
            bad = int(np.flatnonzero(diffs != self.bar_interval)[0]) + 1
            raise OhlcvError(
                f"non-uniform spacing at row {bad}: got {int(diffs[bad - 1])}s, "
                f"expected {self.bar_interval}s (use forward_fill to patch gaps)"
            )

    def __len__(self) -> int:
        return len(self.timestamps)

    def bar(self, i: int) -> OhlcvBar:
        return OhlcvBar(
            int(self.timestamps[i]),
            float(self.open[i]),
            float(self.high[i]),
            float(self.low[i]),
            float(self.close[i]),
            float(self.volume[i]),
        )


@dataclass(frozen=True)
class SplitIndices:
    """Contiguous train/val/test ranges covering [0, n) in time order."""

    train: range
    val: range
    test: range

    def __post_init__(self):
        if not (
            self.train.start == 0
            and self.train.stop == self.val.start
            and self.val.stop == self.test.start
        ):
            raise ValueError("split ranges must be contiguous and ordered")

    @property
    def n_bars(self) -> int:
        return self.test.stop


def _parse_timestamp_iso(raw: str) -> int:
    ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return int(ts.timestamp())


def _detect_epoch_format(raw: str) -> bool:
    try:
        int(raw)
        return True
    except ValueError:
        return False


def load_ohlcv(
    path: str | Path,
    forward_fill: bool = False,
    bar_interval: int | None = None,
) -> OhlcvSeries:
    """Load and validate a candle CSV.

    Rows are sorted by timestamp; duplicates are rejected. The bar interval is
    inferred as the smallest timestamp gap unless given. Gaps are an error by
    default; with forward_fill=True they are patched by repeating the last
    close with zero volume.
    """
    path = Path(path)
    rows: list[OhlcvBar] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise OhlcvError(f"{path}: empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise OhlcvError(
                f"{path}: bad header {header!r}, expected {','.join(CSV_HEADER)}"
            )
        epoch_format: bool | None = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 6:
                raise OhlcvError(f"{path}:{lineno}: expected 6 fields, got {len(row)}")
            if epoch_format is None:
                epoch_format = _detect_epoch_format(row[0])
            try:
                ts = int(row[0]) if epoch_format else _parse_timestamp_iso(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise OhlcvError(f"{path}:{lineno}: malformed row ({exc})") from None
            try:
                rows.append(OhlcvBar(ts, *values))
            except OhlcvError as exc:
                raise OhlcvError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise OhlcvError(f"{path}: no data rows")
    rows.sort(key=lambda b: b.timestamp)
    ts = np.array([b.timestamp for b in rows], dtype=np.int64)
    dup = np.flatnonzero(np.diff(ts) == 0)
    if dup.size:
        raise OhlcvError(f"{path}: duplicate timestamp {int(ts[dup[0]])}")

    if bar_interval is None:
        if len(rows) < 2:
            raise OhlcvError(f"{path}: cannot infer bar interval from one row")
        bar_interval = int(np.diff(ts).min())

    cols = {
        name: np.array([getattr(b, name) for b in rows])
        for name in ("open", "high", "low", "close", "volume")
    }
    if forward_fill:
        ts, cols = _forward_fill(ts, cols, bar_interval, path)
    return OhlcvSeries(ts, cols["open"], cols["high"], cols["low"], cols["close"],
                       cols["volume"], bar_interval)


def _forward_fill(ts, cols, interval, path):
    diffs = np.diff(ts)
    if np.any(diffs % interval != 0):
        bad = int(np.flatnonzero(diffs % interval != 0)[0]) + 1
        raise OhlcvError(f"{path}: spacing at row {bad} is not a multiple of {interval}s")
    out_ts = [int(ts[0])]
    out = {k: [cols[k][0]] for k in cols}
    for i in range(1, len(ts)):
        prev_close = out["close"][-1]
        t = out_ts[-1] + interval
        while t < ts[i]:
            out_ts.append(t)
            for k in ("open", "high", "low", "close"):
                out[k].append(prev_close)
            out["volume"].append(0.0)
            t += interval
        out_ts.append(int(ts[i]))
        for k in cols:
            out[k].append(cols[k][i])
    return np.array(out_ts, dtype=np.int64), {k: np.array(v) for k, v in out.items()}


def save_ohlcv(series: OhlcvSeries, path: str | Path) -> None:
    """Write the series back out in the canonical CSV format (epoch seconds)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for i in range(len(series)):
            writer.writerow([
                int(series.timestamps[i]),
                repr(float(series.open[i])),
                repr(float(series.high[i])),
                repr(float(series.low[i])),
                repr(float(series.close[i])),
                repr(float(series.volume[i])),
            ])


def log_returns(series: OhlcvSeries | np.ndarray) -> np.ndarray:
    """r_t = ln(P_t) - ln(P_{t-1}) over closes; output is one shorter."""
    closes = series.close if isinstance(series, OhlcvSeries) else np.asarray(series, dtype=np.float64)
    if len(closes) < 2:
        raise ValueError("need at least two bars for returns")
    return np.diff(np.log(closes))


def chronological_split(
    series_len: int, fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
) -> SplitIndices:
    """Floor train and val sizes, remainder to test; no bar dropped."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions {fractions} do not sum to 1")
    if series_len < 20:
        raise ValueError(f"series of {series_len} bars is too short to split")
    n_train = int(np.floor(fractions[0] * series_len))
    n_val = int(np.floor(fractions[1] * series_len))
    n_test = series_len - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(
            f"split {n_train}/{n_val}/{n_test} of {series_len} bars has an empty range"
        )
    return SplitIndices(
        train=range(0, n_train),
        val=range(n_train, n_train + n_val),
        test=range(n_train + n_val, series_len),
    )
