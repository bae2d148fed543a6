"""Bias-free networks: input -> hidden -> softmax.

The input layer is linear (identity) and fully connected to the hidden layer,
which is fully connected to a softmax output. Hidden layers are sigmoid,
tanh, LSTM with forget gate, or LSTM with diagonal peephole connections.

Weights live in a dict of arrays so optimizers and serializers can treat
every architecture the same way:

* feed-forward: ``input_hidden`` (H, n), ``hidden_output`` (K, H)
* LSTM: ``input_gates`` (4H, n), ``recurrent_gates`` (4H, H),
  ``hidden_output`` (K, H), plus ``peephole`` (3, H) for the peephole
  variant. Gate blocks are ordered input, forget, output, cell input.
"""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..core import LabelCodebook
from ..features import Scaler
from .activations import HIDDEN, softmax, softmax_backward

FNN_KINDS = ("fnn-sigmoid", "fnn-tanh")
LSTM_KINDS = ("rnn-lstm", "rnn-lstm-peephole")
KINDS = FNN_KINDS + LSTM_KINDS

_TOPOLOGY_RE = re.compile(r"^([a-z-]+):(\d+)-(\d+)-(\d+)$")


@dataclass(frozen=True)
class Topology:
    kind: str
    n_input: int
    n_hidden: int
    n_output: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown network kind {self.kind!r}")
        if min(self.n_input, self.n_hidden, self.n_output) < 1:
            raise ValueError("layer sizes must be positive")

    @classmethod
    def parse(cls, text: str) -> Topology:
        """Parse ``"kind:n-h-k"``, e.g. ``"rnn-lstm:6-128-12"``."""
        m = _TOPOLOGY_RE.match(text.strip())
        if not m:
            raise ValueError(f"malformed topology {text!r}")
        return cls(m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4)))

    def __str__(self) -> str:
        return f"{self.kind}:{self.n_input}-{self.n_hidden}-{self.n_output}"

    @property
    def recurrent(self) -> bool:
        return self.kind in LSTM_KINDS

    @property
    def peephole(self) -> bool:
        return self.kind == "rnn-lstm-peephole"

    def weight_shapes(self) -> dict[str, tuple[int, int]]:
        n, h, k = self.n_input, self.n_hidden, self.n_output
        if not self.recurrent:
            return {"input_hidden": (h, n), "hidden_output": (k, h)}
        shapes = {"input_gates": (4 * h, n), "recurrent_gates": (4 * h, h)}
        if self.peephole:
            shapes["peephole"] = (3, h)
        shapes["hidden_output"] = (k, h)
        return shapes


def init_weights(topology: Topology, seed: int, scale: float = 0.1) -> dict[str, np.ndarray]:
    """Uniform [-scale, scale] weights from a PCG64 stream seeded by ``seed``.

    Arrays are drawn in ``weight_shapes()`` order, so a given seed yields the
    same weights on every platform.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    return {name: rng.uniform(-scale, scale, size=shape) for name, shape in topology.weight_shapes().items()}


@dataclass
class NetworkModel:
    topology: Topology
    weights: dict[str, np.ndarray]
    codebook: LabelCodebook
    feature_kind: str
    sequence_shape: tuple[int, int] | None = None
    scaler: Scaler | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.topology.n_output != len(self.codebook):
            raise ValueError("softmax size differs from the codebook size")
        shapes = self.topology.weight_shapes()
        if set(shapes) != set(self.weights):
            raise ValueError(f"expected weights {sorted(shapes)}, got {sorted(self.weights)}")
        for name, shape in shapes.items():
            w = np.asarray(self.weights[name], dtype=np.float64)
            if w.shape != shape:
                raise ValueError(f"weight {name} has shape {w.shape}, expected {shape}")
            if not np.all(np.isfinite(w)):
                raise ValueError(f"weight {name} contains non-finite values")
            self.weights[name] = np.ascontiguousarray(w)

    @classmethod
    def create(cls, topology, codebook, feature_kind, seed=0, sequence_shape=None, **kw) -> NetworkModel:
        if isinstance(topology, str):
            topology = Topology.parse(topology)
        return cls(topology, init_weights(topology, seed), codebook, feature_kind, sequence_shape, **kw)

    def copy(self) -> NetworkModel:
        return NetworkModel(
            self.topology,
            {k: v.copy() for k, v in self.weights.items()},
            self.codebook,
            self.feature_kind,
            self.sequence_shape,
            self.scaler,
            dict(self.metadata),
        )

    def n_weights(self) -> int:
        return sum(w.size for w in self.weights.values())

    # -- forward / backward ---------------------------------------------

    def _as_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.topology.recurrent:
            x = x.reshape(-1, self.topology.n_input)
        elif x.shape != (self.topology.n_input,):
            x = x.reshape(-1)
            if x.size != self.topology.n_input:
                raise ValueError(f"input has {x.size} values, network expects {self.topology.n_input}")
        return x

    def forward(self, x) -> np.ndarray:
        """Softmax output; (K,) for feed-forward, (T, K) per frame for LSTM."""
        return self._forward(self._as_input(x))[0]

    def _forward(self, x):
        w = self.weights
        if not self.topology.recurrent:
            act, _ = HIDDEN[self.topology.kind.split("-")[1]]
            h = act(w["input_hidden"] @ x)
            return softmax(w["hidden_output"] @ h), (h,)
        if x.shape[1] != self.topology.n_input:
            raise ValueError(f"frames have {x.shape[1]} channels, network expects {self.topology.n_input}")
        ax = np.ascontiguousarray(x @ w["input_gates"].T)
        peep = w["peephole"] if self.topology.peephole else _zero_peephole(self.topology.n_hidden)
        gates, c, y = kernels.lstm_forward(ax, w["recurrent_gates"], peep, self.topology.peephole)
        return softmax(y @ w["hidden_output"].T, axis=1), (gates, c, y, peep)

    def loss_and_gradients(self, x, target) -> tuple[float, dict[str, np.ndarray]]:
        """Mean squared error and its gradient for every weight.

        For LSTMs the target applies to every frame and the loss is the mean
        over frames; gradients flow back through the whole sequence.
        """
        x = self._as_input(x)
        target = np.asarray(target, dtype=np.float64)
        out, cache = self._forward(x)
        k = self.topology.n_output
        w = self.weights
        if not self.topology.recurrent:
            (h,) = cache
            diff = out - target
            loss = float(np.mean(diff * diff))
            dlogit = softmax_backward(out, 2.0 * diff / k)
            _, grad_of = HIDDEN[self.topology.kind.split("-")[1]]
            dpre = (w["hidden_output"].T @ dlogit) * grad_of(h)
            return loss, {
                "input_hidden": np.outer(dpre, x),
                "hidden_output": np.outer(dlogit, h),
            }
        gates, c, y, peep = cache
        steps = out.shape[0]
        diff = out - target
        loss = float(np.mean(diff * diff))
        dlogit = softmax_backward(out, 2.0 * diff / (k * steps))
        dy = np.ascontiguousarray(dlogit @ w["hidden_output"])
        da, dpeep = kernels.lstm_backward(dy, gates, c, w["recurrent_gates"], peep, self.topology.peephole)
        grads = {
            "input_gates": da.T @ x,
            "recurrent_gates": da[1:].T @ y[:-1],
            "hidden_output": dlogit.T @ y,
        }
        if self.topology.peephole:
            grads["peephole"] = dpeep
        return loss, grads

    def loss(self, x, target) -> float:
        out = self.forward(x)
        return float(np.mean((out - np.asarray(target)) ** 2))

    # -- inference --------------------------------------------------------

    def predict_proba(self, x) -> np.ndarray:
        """Output distribution for one example.

        LSTM per-frame outputs are summed over the sequence and renormalized.
        """
        out = self.forward(x)
        if self.topology.recurrent:
            total = out.sum(axis=0)
            return total / total.sum()
        return out

    def predict(self, x) -> tuple[str, np.ndarray]:
        p = self.predict_proba(x)
        return self.codebook.symbol(int(np.argmax(p))), p

    def prepare(self, rows) -> np.ndarray:
        """Apply the stored input scaler (if any) to raw feature rows."""
        rows = np.asarray(rows, dtype=np.float64)
        return self.scaler.transform(rows) if self.scaler is not None else rows


@functools.lru_cache(maxsize=8)
def _zero_peephole(n_hidden: int) -> np.ndarray:
    z = np.zeros((3, n_hidden))
    z.setflags(write=False)
    return z
