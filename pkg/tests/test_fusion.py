from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from motionkeys.core import ACCELEROMETER, GYROSCOPE, RecordingSession, TriaxialSeries
from motionkeys.fusion import (
    STRATEGIES,
    FusionConfig,
    align_accelerometer,
    constant_grid,
    fuse,
    fuse_session,
    resample_constant_rate,
    strategy_dim,
    strategy_name,
    with_strategy,
)


def _affine(ts, a=3.0, b=1.0, sensor=GYROSCOPE) -> TriaxialSeries:
    t = np.asarray(ts, dtype=np.float64)
    return TriaxialSeries(ts, a * t + b, -2.0 * t + 5.0, 0.5 * t, sensor)


@st.composite
def irregular_times(draw):
    steps = draw(st.lists(st.integers(1, 25), min_size=1, max_size=60))
    t0 = draw(st.integers(0, 10**12))
    return t0 + np.concatenate(([0], np.cumsum(steps)))


def test_two_point_example():
    s = TriaxialSeries([0, 4], [0.0, 4.0], [0.0, 4.0], [0.0, 4.0])
    out = resample_constant_rate(s, 2)
    np.testing.assert_array_equal(out.timestamps, [0, 2, 4])
    np.testing.assert_array_equal(out.x, [0.0, 2.0, 4.0])


@given(irregular_times(), st.integers(1, 7))
def test_resampling_exact_on_affine_signals(ts, interval):
    # offsets keep the products small enough for a 1e-9 absolute check
    rel = ts - ts[0]
    src = TriaxialSeries(ts, 3.0 * rel + 1.0, -2.0 * rel, 0.25 * rel + 7.0)
    out = resample_constant_rate(src, interval)
    g = (out.timestamps - ts[0]).astype(np.float64)
    assert np.max(np.abs(out.x - (3.0 * g + 1.0))) <= 1e-9
    assert np.max(np.abs(out.y - (-2.0 * g))) <= 1e-9
    assert np.max(np.abs(out.z - (0.25 * g + 7.0))) <= 1e-9
    assert np.all(np.diff(out.timestamps) == interval)
    assert len(out) == (ts[-1] - ts[0]) // interval + 1


@given(irregular_times(), st.integers(1, 7))
def test_measured_points_on_grid_are_kept(ts, interval):
    rng = np.random.default_rng(int(ts.size))
    src = TriaxialSeries(ts, *rng.normal(size=(3, ts.size)))
    out = resample_constant_rate(src, interval)
    on_grid = np.isin(ts, out.timestamps)
    idx = np.searchsorted(out.timestamps, ts[on_grid])
    np.testing.assert_array_equal(out.x[idx], src.x[on_grid])


def test_resample_identity_on_uniform_series(rng):
    ts = 1000 + 2 * np.arange(30)
    src = TriaxialSeries(ts, *rng.normal(size=(3, 30)))
    assert resample_constant_rate(src, 2) == src


def test_floor_division_drops_short_tail():
    s = TriaxialSeries([0, 5], [0.0, 5.0], [0.0] * 2, [0.0] * 2)
    np.testing.assert_array_equal(resample_constant_rate(s, 2).timestamps, [0, 2, 4])
    np.testing.assert_array_equal(constant_grid(10, 17, 3), [10, 13, 16])


def test_resample_needs_two_points():
    with pytest.raises(ValueError):
        resample_constant_rate(TriaxialSeries([5], [1.0], [1.0], [1.0]), 2)


def test_union_then_filter_form_agrees_with_direct_interpolation(rng):
    # Insert grid times into the measured set, fill them by interpolating
    # between measured neighbours, then keep only grid tuples.
    ts = np.cumsum(rng.integers(3, 17, size=40)) + 500
    src = TriaxialSeries(ts, *rng.normal(size=(3, ts.size)))
    grid = constant_grid(ts[0], ts[-1], 2)
    union = np.union1d(ts, grid)
    filled = {}
    for t in union:
        j = np.searchsorted(ts, t)
        if j < ts.size and ts[j] == t:
            filled[int(t)] = src.x[j]
        else:
            t0, t1 = ts[j - 1], ts[j]
            filled[int(t)] = src.x[j - 1] + (src.x[j] - src.x[j - 1]) * (t - t0) / (t1 - t0)
    expected = np.array([filled[int(t)] for t in grid])
    np.testing.assert_allclose(resample_constant_rate(src, 2).x, expected, rtol=0, atol=1e-12)


def test_align_accelerometer_affine_and_endpoints():
    accel = _affine([10, 73, 135, 198], sensor=ACCELEROMETER)
    grid = np.arange(0, 220, 2)
    out = align_accelerometer(accel, grid)
    inside = (grid >= 10) & (grid <= 198)
    np.testing.assert_allclose(out.x[inside], 3.0 * grid[inside] + 1.0, atol=1e-9)
    assert np.all(out.x[grid < 10] == accel.x[0])
    assert np.all(out.x[grid > 198] == accel.x[-1])
    assert out.sensor == ACCELEROMETER


def test_align_identity_and_disjoint():
    accel = _affine([0, 2, 4, 6], sensor=ACCELEROMETER)
    assert align_accelerometer(accel, accel.timestamps) == accel
    with pytest.raises(ValueError):
        align_accelerometer(accel, np.array([100, 102]))


def _pair(g, a):
    ts = [0, 2]
    gyro = TriaxialSeries(ts, *([v, v] for v in g))
    accel = TriaxialSeries(ts, *([v, v] for v in a), sensor=ACCELEROMETER)
    return gyro, accel


def test_fuse_examples():
    gyro, accel = _pair((1.0, 2.0, 3.0), (4.0, 5.0, 6.0))
    np.testing.assert_array_equal(fuse(gyro, accel).frames[0], [1, 2, 3, 4, 5, 6])
    np.testing.assert_array_equal(fuse(gyro, accel, FusionConfig(strategy="Gmean")).frames[0], [2.0])
    np.testing.assert_array_equal(fuse(gyro, accel, FusionConfig(strategy="GmeanAmean")).frames[0], [2.0, 5.0])
    assert strategy_dim("G3Amean") == 4


def test_strategy_table():
    assert set(STRATEGIES) == {"G3", "A3", "Gmean", "Amean", "GmeanAmean", "GmeanA3", "G3Amean", "G3A3"}
    assert {strategy_dim(s) for s in STRATEGIES} == {1, 2, 3, 4, 6}
    assert strategy_name("g3a3") == "G3A3"
    with pytest.raises(ValueError):
        strategy_name("G2")


def test_fuse_rejects_grid_mismatch():
    gyro, _ = _pair((1.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    accel = TriaxialSeries([0, 3], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], ACCELEROMETER)
    with pytest.raises(ValueError):
        fuse(gyro, accel)


def test_g3a3_prefix_is_g3_and_reslicing_agrees(rng):
    ts = np.cumsum(rng.integers(8, 12, size=50))
    ta = np.cumsum(rng.integers(55, 70, size=9))
    s = RecordingSession(
        "x",
        TriaxialSeries(ts, *rng.normal(size=(3, ts.size))),
        TriaxialSeries(ta, *rng.normal(size=(3, ta.size)), ACCELEROMETER),
    )
    full = fuse_session(s)
    g3 = fuse_session(s, FusionConfig(strategy="G3"))
    np.testing.assert_array_equal(full.frames[:, :3], g3.frames)
    for name in STRATEGIES:
        direct = fuse_session(s, FusionConfig(strategy=name))
        np.testing.assert_array_equal(with_strategy(full, name).frames, direct.frames)


def test_config_validation():
    with pytest.raises(ValueError):
        FusionConfig(interval_ms=0)
    with pytest.raises(ValueError):
        FusionConfig(strategy="nope")
