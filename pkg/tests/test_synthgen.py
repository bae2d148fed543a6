from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from motionkeys.core import ACCELEROMETER, GYROSCOPE, KEYPAD_ALPHABET
from motionkeys.synthgen import (
    GRAVITY,
    SynthConfig,
    generate_pair,
    generate_session,
    key_template,
    raised_cosine,
    toy_config,
    zero_area_pulse,
)


def test_default_session_shape():
    s = generate_session(SynthConfig(seed=0))
    assert len(s.labels) == 240
    assert sorted({e.label for e in s.labels}) == sorted(KEYPAD_ALPHABET)
    gyro_dt = np.diff(s.gyroscope.timestamps)
    accel_dt = np.diff(s.accelerometer.timestamps)
    assert 9.5 < gyro_dt.mean() < 10.5 and 60 < accel_dt.mean() < 65
    assert gyro_dt.max() <= 12 and gyro_dt.min() >= 8


def test_seeded_determinism():
    a, b = generate_session(SynthConfig(seed=4)), generate_session(SynthConfig(seed=4))
    assert a == b
    assert a != generate_session(SynthConfig(seed=5))


def test_labels_sit_on_gyro_samples():
    s = generate_session(SynthConfig(seed=1))
    assert set(e.t for e in s.labels) <= set(s.gyroscope.timestamps.tolist())


def test_noiseless_mean_is_unit_bump_at_labels():
    s = generate_session(SynthConfig(seed=2).without_noise())
    g = s.gyroscope
    mean = (g.x + g.y + g.z) / 3
    idx = np.searchsorted(g.timestamps, [e.t for e in s.labels])
    np.testing.assert_allclose(np.abs(mean[idx]), 1.0, atol=1e-12)
    assert np.max(np.abs(mean)) == pytest.approx(1.0, abs=1e-12)
    a = s.accelerometer
    assert np.median(a.z) == pytest.approx(GRAVITY, abs=1e-9)


def test_noise_level_matches_snr():
    s = generate_session(SynthConfig(seed=3, snr=4.0))
    quiet = s.gyroscope.x[: 80]  # the first keystroke is a second in
    assert np.std(quiet) == pytest.approx(0.25, rel=0.25)


def test_pulse_shapes():
    assert raised_cosine(0.0, 100.0) == 1.0 and raised_cosine(50.0, 100.0) == 0.0
    assert zero_area_pulse(0.0, 100.0) == 1.0
    assert np.all(zero_area_pulse(np.array([-100.0, 100.0, 150.0]), 100.0) == 0.0)
    area, _ = quad(lambda t: float(zero_area_pulse(t, 100.0)), -100, 100, points=[-50, 0, 50])
    assert abs(area) < 1e-10


@given(st.floats(-400, 400))
def test_response_zero_outside_support(tau):
    tpl = key_template("5")
    for sensor in (GYROSCOPE, ACCELEROMETER):
        if abs(tau) >= tpl.support(sensor):
            assert np.all(tpl.response(sensor, np.array([tau])) == 0.0)


def test_templates_are_distinct_and_balanced():
    tpls = {k: key_template(k) for k in KEYPAD_ALPHABET}
    signs = [np.sign(t.gyro_primary.mean()) for t in tpls.values()]
    assert sum(signs) == 0
    for t in tpls.values():
        assert t.gyro_secondary.sum() == pytest.approx(0.0, abs=1e-12)
        assert abs(t.gyro_primary.mean()) == pytest.approx(1.0)
    patterns = np.array([t.gyro_primary for t in tpls.values()])
    dists = np.linalg.norm(patterns[:, None] - patterns[None], axis=2)
    assert np.min(dists[~np.eye(12, dtype=bool)]) > 0.5
    assert key_template("x").gyro_primary.shape == (3,)


def test_families_correlated_but_different():
    base, other = key_template("7", 0), key_template("7", 1)
    assert not np.allclose(base.accel_primary, other.accel_primary)
    assert np.dot(base.accel_primary, other.accel_primary) > 0
    assert base.gyro_primary.mean() == pytest.approx(other.gyro_primary.mean())


def test_pair_and_toy():
    a, b = generate_pair(SynthConfig(seed=0, instances_per_key=2), 1)
    assert a.session_id != b.session_id and len(a.labels) == len(b.labels) == 24
    with pytest.raises(ValueError):
        generate_pair(SynthConfig(), 0)
    toy = generate_session(toy_config())
    assert len(toy.labels) == 120 and {e.label for e in toy.labels} == {"1", "3", "*", "#"}


@pytest.mark.parametrize(
    "kw",
    [
        {"alphabet": ()},
        {"alphabet": ("1", "1")},
        {"instances_per_key": 0},
        {"snr": 0.0},
        {"jitter": 1.0},
        {"gap_ms": 150.0},
        {"family": -1},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)


def test_noiseless_flag():
    assert SynthConfig(snr=math.inf, jitter=0.0).noiseless
    assert not SynthConfig().noiseless
