"""Training loop: online (per-example) or full-batch Rprop-."""

from __future__ import annotations

import logging

import numpy as np

from ..features import FeatureMatrix
from .network import NetworkModel, Topology, init_weights
from .rprop import RpropMinus

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


def _inputs(model: NetworkModel, fm: FeatureMatrix) -> np.ndarray:
    if model.topology.recurrent:
        if fm.sequence_shape is None:
            raise ValueError("LSTM models need segment (sequence) features")
        return fm.sequences()
    if fm.dim != model.topology.n_input:
        raise ValueError(f"feature rows have {fm.dim} values, network expects {model.topology.n_input}")
    return fm.rows


def train(
    model: NetworkModel,
    data: FeatureMatrix,
    epochs: int,
    seed: int = 0,
    shuffle: bool = True,
    reinit: bool = True,
    optimizer: RpropMinus | None = None,
    batch: bool = True,
) -> tuple[NetworkModel, list[float]]:
    """Train ``model`` with Rprop-.

    By default the gradients of all examples are averaged and a single step
    is taken per epoch, the classic Rprop formulation in which example order
    is irrelevant. With ``batch=False`` the update is online: one Rprop- step
    per example, examples reshuffled every epoch from a generator derived
    from ``seed``. Sign-based steps taken per example tend to cancel, so the
    online mode converges far less reliably.

    With ``reinit`` the weights are redrawn from ``seed`` first. Returns the
    trained model (same object) and the mean per-example loss of every epoch.
    In batch mode the loss is measured before that epoch's update.
    """
    if data.kind != model.feature_kind:
        raise ValueError(f"model expects {model.feature_kind} features, got {data.kind}")
    if data.codebook != model.codebook:
        raise ValueError("feature codebook differs from the model codebook")
    if reinit:
        model.weights = init_weights(model.topology, seed)
    xs = _inputs(model, data)
    targets = data.targets
    optimizer = optimizer or RpropMinus()
    order_rng = np.random.Generator(np.random.PCG64([seed, 1]))
    trace = []
    for epoch in range(epochs):
        order = order_rng.permutation(len(data)) if shuffle and not batch else np.arange(len(data))
        total = 0.0
        acc = None
        for i in order:
            loss, grads = model.loss_and_gradients(xs[i], targets[i])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, example {i}")
            total += loss
            if not batch:
                optimizer.update(model.weights, grads)
            elif acc is None:
                acc = grads
            else:
                for name, g in grads.items():
                    acc[name] += g
        if acc is not None:
            optimizer.update(model.weights, {k: v / len(data) for k, v in acc.items()})
        trace.append(total / max(len(data), 1))
        log.debug("epoch %d loss %.6f", epoch, trace[-1])
    return model, trace


def make_model(kind: str, data: FeatureMatrix, n_hidden: int, seed: int = 0) -> NetworkModel:
    """Fresh model sized for ``data``."""
    n_input = data.sequence_shape[1] if kind.startswith("rnn") else data.dim
    topology = Topology(kind, n_input, n_hidden, len(data.codebook))
    return NetworkModel(topology, init_weights(topology, seed), data.codebook, data.kind, data.sequence_shape)


def predict_rows(model: NetworkModel, rows: np.ndarray) -> np.ndarray:
    """Output distributions for already-scaled feature rows, shape (n, K)."""
    if len(rows) == 0:
        return np.zeros((0, model.topology.n_output))
    return np.array([model.predict_proba(r) for r in rows])
