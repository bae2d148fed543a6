from __future__ import annotations

import pytest

from motionkeys.core import KEYPAD_ALPHABET, LabelCodebook, LabelEvent, RecordingSession
from motionkeys.experiments import (
    PipelineConfig,
    codebook_for,
    infer,
    inference_config,
    run_experiment,
    scheme_name,
    segment_session,
    session_features,
    train_final_model,
)
from motionkeys.synthgen import SynthConfig, generate_pair, generate_session, toy_config


@pytest.fixture(scope="module")
def toy():
    return generate_session(toy_config(seed=3))


def test_scheme_names():
    assert scheme_name(" P-H ") == "p-h"
    with pytest.raises(ValueError):
        scheme_name("q-t")


def test_codebook_keypad_order_first():
    s = generate_session(SynthConfig(alphabet=("#", "x", "1"), instances_per_key=1))
    assert codebook_for([s]).alphabet == ("1", "#", "x")
    with pytest.raises(ValueError):
        codebook_for([RecordingSession("e", s.gyroscope, s.accelerometer)])


def test_stage_trace(toy):
    trace = []
    segment_session(toy, "r-t", trace=trace)
    assert trace == ["gyroscope:calibrate", "accelerometer:calibrate", "fuse:G3A3", "segment:labels"]
    trace = []
    segment_session(toy, "p-h", trace=trace)
    assert trace == [
        "gyroscope:calibrate", "accelerometer:calibrate",
        "gyroscope:median", "gyroscope:butterworth-lowpass", "gyroscope:kalman",
        "accelerometer:median", "accelerometer:butterworth-highpass", "accelerometer:kalman",
        "gyroscope:normalize", "accelerometer:normalize",
        "fuse:G3A3", "segment:peaks", "segment:match",
    ]


def test_timestamp_schemes_keep_every_label(toy):
    assert len(segment_session(toy, "p-t")) == len(toy.labels)
    assert len(segment_session(toy, "r-t")) == len(toy.labels)


def test_heuristic_matches_most_labels(toy):
    segs = segment_session(toy, "p-h")
    assert len(segs) >= 0.9 * len(toy.labels)
    assert all(s.label in {"1", "3", "*", "#"} for s in segs)
    assert len(segment_session(toy, "p-h", labelled=False)) >= len(segs)


def test_features_shapes(toy):
    stat = session_features([toy], "p-t", "statistical")
    seg = session_features([toy], "p-t", "segment")
    assert stat.dim == 48 and seg.sequence_shape == (50, 6)
    assert len(stat) == len(seg) == 120


def test_cv_is_reproducible(toy):
    a = run_experiment("p-t", "fnn-sigmoid", [toy], epochs=20, folds=3, n_hidden=8)
    b = run_experiment("p-t", "fnn-sigmoid", [toy], epochs=20, folds=3, n_hidden=8)
    assert a.fold_f1 == b.fold_f1 and a.metadata["mode"] == "cv" and a.metadata["epochs"] == 20
    assert a.f1_mean > 0.5


def test_transfer_defaults_to_200_epochs():
    a, b = generate_pair(SynthConfig(instances_per_key=2).without_noise(), 1)
    r = run_experiment("p-t", "fnn-sigmoid", [a], [b], n_hidden=4)
    assert r.metadata["mode"] == "transfer" and r.metadata["epochs"] == 200
    assert len(r.loss_traces[0]) == 200


def test_final_model_and_inference(toy):
    model, trace = train_final_model("p-h", "fnn-tanh", [toy], epochs=30, n_hidden=8)
    assert model.metadata["scheme"] == "p-h" and len(trace) == 30
    cfg = inference_config(model, PipelineConfig())
    assert cfg.half_window == 25 and cfg.fusion.strategy == "G3A3"
    preds = infer(model, toy)
    assert len(preds) >= 100
    assert all(0.0 <= p.reliability <= 1.0 for p in preds)
    with pytest.raises(ValueError):
        infer(model, toy, scheme="r-h")


def test_unknown_model(toy):
    with pytest.raises(ValueError):
        run_experiment("p-t", "svm", [toy])


def test_labels_only_from_keypad_default():
    assert LabelCodebook().alphabet == KEYPAD_ALPHABET
    assert LabelEvent(1, "5").label == "5"
