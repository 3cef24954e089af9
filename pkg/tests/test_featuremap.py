"""Channel aggregation, train-only scaling, angle encoding, state preparation."""

import math

import numpy as np
import pytest

from qasa import featuremap as fm
from qasa import qsim, vqc
from qasa.indicators import IndicatorConfig, build_feature_frame
from tests.test_indicators import random_series


@pytest.fixture()
def frame_and_channels():
    rng = np.random.default_rng(31)
    series = random_series(rng, 220)
    cfg = IndicatorConfig()
    frame = build_feature_frame(series, cfg)
    return frame, fm.six_scalar_channels(frame, cfg)


def test_channels_shape_and_finiteness(frame_and_channels):
    frame, channels = frame_and_channels
    assert channels.shape == (frame.n_bars, 8)
    assert np.all(np.isnan(channels[: frame.valid_from]))
    assert np.all(np.isfinite(channels[frame.valid_from :]))
    rsi_norm = channels[frame.valid_from :, fm.CHANNELS.index("rsi_norm")]
    assert np.all((rsi_norm >= 0) & (rsi_norm <= 1))
    bb = channels[frame.valid_from :, fm.CHANNELS.index("bb_position")]
    assert np.all((bb >= 0) & (bb <= 1))


def test_vol_regime_zero_when_equal(frame_and_channels):
    frame, channels = frame_and_channels
    idx = fm.CHANNELS.index("vol_regime")
    ewma = frame.column("ewma_vol")[frame.valid_from :]
    longrun = frame.column("longrun_vol")[frame.valid_from :]
    want = np.log(ewma / longrun)
    np.testing.assert_allclose(channels[frame.valid_from :, idx], want, atol=1e-12)


def test_vol_regime_guard_on_zero_vol():
    frame, _ = None, None
    cfg = IndicatorConfig()
    n = 120
    cols = {
        "momentum": np.zeros(n), "ma_ratio": np.zeros(n),
        "ewma_vol": np.full(n, 0.0), "longrun_vol": np.full(n, 0.0),
        "rsi": np.full(n, 50.0), "macd_hist": np.zeros(n),
        "volume_ratio": np.zeros(n), "bb_percent_b": np.full(n, 0.5),
        "atr_rel": np.zeros(n),
    }
    from qasa.indicators import make_frame
    channels = fm.six_scalar_channels(make_frame(cols), cfg)
    assert np.all(channels[:, fm.CHANNELS.index("vol_regime")] == 0.0)


def test_channels_missing_column_raises():
    from qasa.indicators import make_frame
    frame = make_frame({"momentum": np.zeros(30)})
    with pytest.raises(KeyError, match="ma_ratio"):
        fm.six_scalar_channels(frame, IndicatorConfig())


def test_rsi_100_maps_to_one():
    assert 100.0 / 100.0 == 1.0  # the channel is RSI/100 by construction
    from qasa.indicators import make_frame
    n = 30
    cols = {
        "momentum": np.zeros(n), "ma_ratio": np.zeros(n),
        "ewma_vol": np.full(n, 0.1), "longrun_vol": np.full(n, 0.1),
        "rsi": np.full(n, 100.0), "macd_hist": np.zeros(n),
        "volume_ratio": np.zeros(n), "bb_percent_b": np.full(n, 0.5),
        "atr_rel": np.zeros(n),
    }
    channels = fm.six_scalar_channels(make_frame(cols), IndicatorConfig())
    assert np.all(channels[:, fm.CHANNELS.index("rsi_norm")] == 1.0)


def test_fit_minmax_examples():
    channels = np.tile(np.array([[1.0], [3.0]]), (1, 8))
    scaler = fm.fit_minmax(channels, range(0, 2))
    np.testing.assert_array_equal(scaler.lo, np.ones(8))
    np.testing.assert_array_equal(scaler.hi, np.full(8, 3.0))
    with pytest.raises(ValueError):
        fm.fit_minmax(channels, range(0, 0))


def test_fit_minmax_train_only_no_refit(frame_and_channels):
    frame, channels = frame_and_channels
    train = range(frame.valid_from, 150)
    scaler = fm.fit_minmax(channels, train)
    tampered = channels.copy()
    tampered[150:] += 100.0  # perturb val/test rows
    scaler2 = fm.fit_minmax(tampered, train)
    np.testing.assert_array_equal(scaler.lo, scaler2.lo)
    np.testing.assert_array_equal(scaler.hi, scaler2.hi)
    # angles on train rows are identical too
    a = fm.encode_angles_batch(channels[train.start : train.stop], scaler)
    b = fm.encode_angles_batch(tampered[train.start : train.stop], scaler2)
    np.testing.assert_array_equal(a, b)


def test_fit_minmax_idempotent(frame_and_channels):
    frame, channels = frame_and_channels
    train = range(frame.valid_from, 150)
    a = fm.fit_minmax(channels, train)
    b = fm.fit_minmax(channels, train)
    np.testing.assert_array_equal(a.lo, b.lo)
    np.testing.assert_array_equal(a.hi, b.hi)


def test_encode_angles_bounds_and_saturation():
    lo = np.zeros(8)
    hi = np.ones(8)
    scaler = fm.MinMaxScaler(lo, hi)
    assert np.all(fm.encode_angles(np.zeros(8), scaler) == 0.0)
    np.testing.assert_array_equal(fm.encode_angles(np.ones(8), scaler), np.full(8, 2 * math.pi))
    # far out of range saturates exactly
    np.testing.assert_array_equal(fm.encode_angles(np.full(8, -100.0), scaler), np.zeros(8))
    np.testing.assert_array_equal(
        fm.encode_angles(np.full(8, +100.0), scaler), np.full(8, 2 * math.pi)
    )
    mid = fm.encode_angles(np.full(8, 0.25), scaler)
    np.testing.assert_allclose(mid, math.pi / 2, atol=1e-15)


def test_encode_angles_monotone_in_each_channel():
    rng = np.random.default_rng(32)
    scaler = fm.MinMaxScaler(np.full(8, -1.0), np.ones(8))
    grid = np.linspace(-2, 2, 41)
    for c in range(8):
        rows = np.zeros((41, 8))
        rows[:, c] = grid
        angles = fm.encode_angles_batch(rows, scaler)[:, c]
        assert np.all(np.diff(angles) >= 0)
        assert angles[0] == 0.0 and angles[-1] == 2 * math.pi


def test_degenerate_channel_maps_to_pi():
    lo = np.zeros(8)
    hi = np.zeros(8)  # constant train channel
    scaler = fm.MinMaxScaler(lo, hi)
    np.testing.assert_array_equal(fm.encode_angles(np.full(8, 5.0), scaler), np.full(8, math.pi))
    assert np.all(scaler.degenerate)


def test_scaler_json_round_trip(tmp_path):
    scaler = fm.MinMaxScaler(np.arange(8.0), np.arange(8.0) + 2)
    path = tmp_path / "scaler.json"
    scaler.save(path)
    loaded = fm.MinMaxScaler.load(path)
    np.testing.assert_array_equal(loaded.lo, scaler.lo)
    np.testing.assert_array_equal(loaded.hi, scaler.hi)


def test_prepare_hybrid_state_identity_and_flip():
    state = fm.prepare_hybrid_state(np.zeros(8))
    want = np.zeros(64)
    want[0] = 1.0
    np.testing.assert_allclose(state.amplitudes, want, atol=1e-15)
    # qubit 0 flipped by a pi rotation on the momentum slot
    angles = np.zeros(8)
    angles[0] = math.pi
    flipped = fm.prepare_hybrid_state(angles)
    assert abs(qsim.expectation_z(flipped, 0) + 1.0) < 1e-12
    for q in range(1, 6):
        assert abs(qsim.expectation_z(flipped, q) - 1.0) < 1e-12


def test_prepare_hybrid_state_norm_many_random():
    rng = np.random.default_rng(33)
    for _ in range(300):
        angles = rng.uniform(0, 2 * math.pi, 8)
        state = fm.prepare_hybrid_state(angles)
        assert abs(np.linalg.norm(state.amplitudes) - 1.0) < 1e-12


def test_prepare_hybrid_state_matches_vqc_encoder():
    rng = np.random.default_rng(34)
    params = vqc.VqcParams(np.zeros((1, 6)), 6, 1, "angle")
    angles = rng.uniform(0, 2 * math.pi, (5, 8))
    batch = vqc.encode_batch(angles, params)
    for i in range(5):
        single = fm.prepare_hybrid_state(angles[i])
        np.testing.assert_allclose(batch[i], single.amplitudes, atol=1e-13)
