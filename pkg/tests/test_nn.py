from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from motionkeys.core import LabelCodebook
from motionkeys.features import FeatureMatrix, Scaler
from motionkeys.nn import (
    KINDS,
    ModelFormatError,
    NetworkModel,
    RpropMinus,
    Topology,
    init_weights,
    load_model,
    save_model,
    train,
)
from motionkeys.nn.activations import sigmoid, softmax, softmax_backward, softmax_jacobian

CB3 = LabelCodebook("abc")


def small_model(kind: str, seed: int = 3) -> NetworkModel:
    n, h = (4, 5) if kind.startswith("rnn") else (6, 7)
    feature = "segment" if kind.startswith("rnn") else "statistical"
    seq = (5, n) if kind.startswith("rnn") else None
    model = NetworkModel.create(Topology(kind, n, h, len(CB3)), CB3, feature, seed=seed, sequence_shape=seq)
    # larger weights exercise the nonlinearities more than the default init
    rng = np.random.default_rng(seed)
    for w in model.weights.values():
        w[...] = rng.uniform(-0.8, 0.8, size=w.shape)
    return model


def fd_gradient(model, x, t, eps=1e-5):
    grads = {}
    for name, w in model.weights.items():
        g = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            old = w[idx]
            w[idx] = old + eps
            up = model.loss(x, t)
            w[idx] = old - eps
            down = model.loss(x, t)
            w[idx] = old
            g[idx] = (up - down) / (2 * eps)
        grads[name] = g
    return grads


@pytest.mark.parametrize("kind", KINDS)
def test_gradients_match_finite_differences(kind):
    model = small_model(kind)
    assert model.n_weights() <= 300
    rng = np.random.default_rng(7)
    x = rng.normal(size=(5, 4)) if model.topology.recurrent else rng.normal(size=6)
    t = np.array([0.0, 1.0, 0.0])
    _, analytic = model.loss_and_gradients(x, t)
    numeric = fd_gradient(model, x, t)
    for name in model.weights:
        a, n = analytic[name], numeric[name]
        rel = np.linalg.norm(a - n) / max(np.linalg.norm(a) + np.linalg.norm(n), 1e-12)
        assert rel < 1e-4, (name, rel)


def test_softmax_jacobian_matches_backward():
    y = softmax(np.array([0.3, -1.2, 2.0, 0.1]))
    g = np.array([1.0, -2.0, 0.5, 0.0])
    np.testing.assert_allclose(softmax_jacobian(y).T @ g, softmax_backward(y, g), atol=1e-15)
    assert softmax(np.array([1000.0, 1000.0]))[0] == 0.5
    assert sigmoid(-1000.0) == 0.0 and sigmoid(0.0) == 0.5


def test_topology_parse_and_shapes():
    t = Topology.parse("rnn-lstm-peephole:6-128-12")
    assert str(t) == "rnn-lstm-peephole:6-128-12"
    assert t.weight_shapes()["peephole"] == (3, 128)
    with pytest.raises(ValueError):
        Topology.parse("mlp:1-2-3")
    with pytest.raises(ValueError):
        Topology("fnn-tanh", 0, 1, 1)


def test_init_weights_seeded_and_bounded():
    t = Topology("rnn-lstm", 6, 16, 12)
    a, b = init_weights(t, 5), init_weights(t, 5)
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
        assert np.all(np.abs(a[name]) <= 0.1)
    assert not np.array_equal(a["input_gates"], init_weights(t, 6)["input_gates"])


def test_rprop_step_rules():
    opt = RpropMinus()
    w = {"w": np.zeros(4)}
    opt.update(w, {"w": np.array([1.0, -1.0, 0.0, 1.0])})
    np.testing.assert_allclose(w["w"], [-0.1, 0.1, 0.0, -0.1])
    opt.update(w, {"w": np.array([1.0, -1.0, 0.0, -1.0])})
    # agreeing signs grow to 0.12, the flipped one shrinks to 0.05
    np.testing.assert_allclose(opt.steps["w"], [0.12, 0.12, 0.1, 0.05])
    np.testing.assert_allclose(w["w"], [-0.22, 0.22, 0.0, 0.0 - 0.1 + 0.05])
    # after a flip the next step is neither grown nor shrunk
    opt.update(w, {"w": np.array([1.0, -1.0, 0.0, -1.0])})
    assert opt.steps["w"][3] == pytest.approx(0.05)


def test_rprop_step_bounds():
    opt = RpropMinus()
    w = {"w": np.zeros(1)}
    for _ in range(200):
        opt.update(w, {"w": np.ones(1)})
    assert opt.steps["w"][0] == 50.0
    sign = 1.0
    for _ in range(200):
        sign = -sign
        opt.update(w, {"w": np.array([sign])})
    assert opt.steps["w"][0] >= 1e-6


def xor_data() -> FeatureMatrix:
    cb = LabelCodebook("01")
    x = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([cb.encode(s) for s in "0110"])
    return FeatureMatrix(x, y, cb, "statistical")


def test_xor_converges_deterministically():
    data = xor_data()
    runs = []
    for _ in range(2):
        model = NetworkModel.create("fnn-sigmoid:2-8-2", data.codebook, "statistical", seed=0)
        model, trace = train(model, data, 500, seed=0, batch=True)
        runs.append((trace, model))
    assert runs[0][0] == runs[1][0]
    model = runs[0][1]
    mse = np.mean([model.loss(x, t) for x, t in zip(data.rows, data.targets)])
    assert mse < 0.01
    assert [model.predict(x)[0] for x in data.rows] == list("0110")


def test_train_rejects_mismatched_data():
    data = xor_data()
    model = NetworkModel.create("fnn-tanh:2-4-2", data.codebook, "segment")
    with pytest.raises(ValueError):
        train(model, data, 1)


@pytest.mark.parametrize("kind", KINDS)
def test_persistence_bit_identical(tmp_path, kind):
    model = small_model(kind)
    n = model.topology.n_input * (5 if model.topology.recurrent else 1)
    model.scaler = Scaler(np.full(4, -2.0), np.full(4, 3.0), 4) if model.topology.recurrent else None
    model.metadata = {"scheme": "p-h", "strategy": "G3A3"}
    save_model(model, tmp_path / "m.xml")
    loaded = load_model(tmp_path / "m.xml")
    assert loaded.topology == model.topology and loaded.metadata == model.metadata
    rng = np.random.default_rng(11)
    for _ in range(100):
        x = rng.normal(size=n) * rng.uniform(0.01, 100)
        assert np.array_equal(model.predict_proba(x), loaded.predict_proba(x))


@given(st.floats(-1e300, 1e300, allow_nan=False))
def test_weight_text_is_exact(v):
    from motionkeys.nn.persistence import _decode, _encode

    assert _decode(_encode(np.array([v])), 1, "w")[0] == v


def test_load_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.xml"
    p.write_text("<network format='other'/>")
    with pytest.raises(ModelFormatError):
        load_model(p)
    p.write_text("not xml")
    with pytest.raises(ModelFormatError):
        load_model(p)
    model = small_model("fnn-tanh")
    save_model(model, p)
    p.write_text(p.read_text().replace('rows="7"', 'rows="8"', 1))
    with pytest.raises(ModelFormatError):
        load_model(p)


def test_zero_peephole_matches_plain_lstm():
    cb = LabelCodebook("abcd")
    plain = NetworkModel.create("rnn-lstm:3-6-4", cb, "segment", seed=2)
    weights = {k: v.copy() for k, v in plain.weights.items()}
    weights["peephole"] = np.zeros((3, 6))
    peep = NetworkModel(Topology.parse("rnn-lstm-peephole:3-6-4"), weights, cb, "segment")
    x = np.random.default_rng(0).normal(size=(9, 3))
    assert np.array_equal(plain.forward(x), peep.forward(x))


@pytest.mark.parametrize("kind", KINDS)
def test_outputs_are_distributions(kind):
    model = small_model(kind)
    x = np.random.default_rng(1).normal(size=20 if model.topology.recurrent else 6)
    p = model.predict_proba(x)
    assert np.all(p >= 0) and abs(p.sum() - 1.0) <= 1e-12
    label, q = model.predict(x)
    assert label == CB3.symbol(int(np.argmax(3.0 * q)))
