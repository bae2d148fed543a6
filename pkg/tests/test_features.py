from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from motionkeys.core import KEYPAD_ALPHABET, LabelCodebook
from motionkeys.features import (
    SEGMENT,
    STATISTICAL,
    FeatureMatrix,
    Scaler,
    build_segment_features,
    build_statistical_features,
    decode_label,
    encode_label,
    statistical_vector,
    unlabeled_rows,
)
from motionkeys.segmentation import Segment

CB = LabelCodebook(KEYPAD_ALPHABET)


def _segments(n: int, dim: int = 6, seed: int = 0, frames: int = 50) -> list[Segment]:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        axes = rng.normal(size=(frames, 6))
        out.append(Segment(25, 1000 + i, axes[:, :dim].copy(), axes, KEYPAD_ALPHABET[i % 12]))
    return out


def test_statistical_vector_example():
    v = statistical_vector([1.0, 2.0, 3.0])
    assert v[0] == 1.0 and v[1] == 3.0
    assert v[2] == pytest.approx(math.sqrt(14 / 3), rel=1e-12)
    assert v[5] == pytest.approx(0.0, abs=1e-12)
    assert v[7] == pytest.approx(2 / 3, rel=1e-12)
    assert v[4] == pytest.approx(3 / math.sqrt(14 / 3), rel=1e-12)
    assert v.shape == (8,)


def test_statistical_vector_constant():
    v = statistical_vector([4.0] * 5)
    np.testing.assert_array_equal(v[[0, 1, 5, 6, 7]], [4.0, 4.0, 0.0, 0.0, 0.0])


def test_statistical_vector_too_short():
    with pytest.raises(ValueError):
        statistical_vector([1.0])


values = arrays(np.float64, st.integers(3, 60), elements=st.floats(-50, 50, allow_nan=False))


@given(values)
def test_moments_match_scipy(v):
    s = statistical_vector(v)
    if np.var(v) > 1e-12:
        assert s[5] == pytest.approx(stats.skew(v, bias=True), rel=1e-7, abs=1e-9)
        assert s[6] == pytest.approx(stats.kurtosis(v, fisher=False, bias=True), rel=1e-7, abs=1e-9)
    assert s[7] == pytest.approx(np.var(v), rel=1e-12, abs=1e-12)


@given(values, st.sampled_from([0.5, 2.0, 8.0]))
def test_scaling_behaviour(v, c):
    if np.var(v) < 1e-6:
        return
    a, b = statistical_vector(v), statistical_vector(c * v)
    np.testing.assert_allclose(b[[0, 1, 2]], c * a[[0, 1, 2]], rtol=1e-12)
    np.testing.assert_allclose(b[[4, 5, 6]], a[[4, 5, 6]], rtol=1e-9, atol=1e-9)
    assert b[3] == a[3]
    assert b[7] == pytest.approx(c * c * a[7], rel=1e-12)


def test_statistical_features_shape_and_range():
    fm = build_statistical_features(_segments(240), CB)
    assert fm.rows.shape == (240, 48) and fm.kind == STATISTICAL
    varying = fm.rows.max(axis=0) > fm.rows.min(axis=0)
    np.testing.assert_array_equal(fm.rows.min(axis=0)[varying], -1.0)
    np.testing.assert_array_equal(fm.rows.max(axis=0)[varying], 1.0)
    assert fm.scaler is not None
    np.testing.assert_array_equal(fm.targets.sum(axis=1), 1.0)


def test_statistical_features_reject_unlabelled():
    segs = _segments(3)
    segs[1] = segs[1].with_label(None)
    with pytest.raises(ValueError):
        build_statistical_features(segs, CB)


@pytest.mark.parametrize("dim,width", [(6, 300), (1, 50), (3, 150)])
def test_segment_rows_are_time_major(dim, width):
    segs = _segments(5, dim)
    fm = build_segment_features(segs, CB)
    assert fm.rows.shape == (5, width) and fm.kind == SEGMENT
    np.testing.assert_array_equal(fm.sequences()[2], segs[2].frames)
    np.testing.assert_array_equal(fm.sequences().reshape(5, -1), fm.rows)
    np.testing.assert_array_equal(unlabeled_rows(segs, SEGMENT), fm.rows)


def test_segment_features_reject_mixed_lengths():
    segs = _segments(2) + _segments(1, frames=40)
    with pytest.raises(ValueError):
        build_segment_features(segs, CB)


def test_label_encoding():
    assert encode_label("1", CB).tolist() == [1.0] + [0.0] * 11
    assert int(np.argmax(encode_label("#", CB))) == 11
    for s in KEYPAD_ALPHABET:
        assert decode_label(encode_label(s, CB), CB) == s
    with pytest.raises(KeyError):
        encode_label("A", CB)


def test_shuffle_keeps_rows_and_targets_aligned():
    fm = build_segment_features(_segments(24), CB)
    perm = np.random.default_rng(3).permutation(24)
    sub = fm.subset(perm)
    for i, j in enumerate(perm):
        np.testing.assert_array_equal(sub.rows[i], fm.rows[j])
        assert sub.labels[i] == fm.labels[j]


def test_scaler_is_fitted_on_training_rows_only():
    train = FeatureMatrix(np.array([[0.0, 10.0], [2.0, 20.0]]), np.eye(2), LabelCodebook("ab"), STATISTICAL)
    scaled = train.normalized()
    test = np.array([[4.0, 15.0]])
    np.testing.assert_array_equal(scaled.scaler.transform(test), [[3.0, 0.0]])


def test_channel_scaler_shares_map_across_frames():
    rows = np.array([[0.0, 100.0, 1.0, 300.0], [2.0, 200.0, 0.5, 100.0]])
    sc = Scaler.fit(rows, channels=2)
    np.testing.assert_array_equal(sc.low, [0.0, 100.0])
    np.testing.assert_array_equal(sc.high, [2.0, 300.0])
    np.testing.assert_array_equal(sc.transform(rows), [[-1.0, -1.0, 0.0, 1.0], [1.0, 0.0, -0.5, -1.0]])
