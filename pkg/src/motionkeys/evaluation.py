"""Classification metrics and k-fold cross-validation.

F1 is micro-averaged over classes, which for single-label predictions is
the fraction of segments classified correctly. Reliability scores one
output distribution by its entropy: ``R = 1 - S / ln n`` is 1 for a one-hot
output and 0 for a uniform one.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import LabelCodebook
from .features import FeatureMatrix
from .nn.network import NetworkModel
from .nn.training import make_model, predict_rows, train

log = logging.getLogger(__name__)

DEFAULT_FOLDS = 5
DEFAULT_EPOCHS = 100
TRANSFER_EPOCHS = 200
DEFAULT_HIDDEN = 128


class ConfusionMatrix:
    """Counts with rows = true label and columns = predicted label."""

    def __init__(self, codebook: LabelCodebook, counts=None):
        self.codebook = codebook
        k = len(codebook)
        self.counts = np.zeros((k, k), dtype=np.int64) if counts is None else np.array(counts, dtype=np.int64)
        if self.counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_indices(cls, codebook: LabelCodebook, true, predicted) -> ConfusionMatrix:
        m = cls(codebook)
        np.add.at(m.counts, (np.asarray(true, dtype=np.int64), np.asarray(predicted, dtype=np.int64)), 1)
        return m

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        if other.codebook != self.codebook:
            raise ValueError("codebooks differ")
        return ConfusionMatrix(self.codebook, self.counts + other.counts)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ConfusionMatrix)
            and other.codebook == self.codebook
            and np.array_equal(other.counts, self.counts)
        )

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def true_positives(self) -> np.ndarray:
        return np.diag(self.counts).copy()

    def false_positives(self) -> np.ndarray:
        return self.counts.sum(axis=0) - np.diag(self.counts)

    def false_negatives(self) -> np.ndarray:
        return self.counts.sum(axis=1) - np.diag(self.counts)

    def accuracy(self) -> float:
        if self.total == 0:
            raise ValueError("empty confusion matrix")
        return float(np.trace(self.counts) / self.total)

    def to_text(self) -> str:
        syms = self.codebook.alphabet
        width = max(5, max(len(s) for s in syms) + 1, len(str(self.counts.max(initial=0))) + 1)
        head = " " * width + "".join(s.rjust(width) for s in syms)
        lines = [head]
        for sym, row in zip(syms, self.counts):
            lines.append(sym.rjust(width) + "".join(str(int(v)).rjust(width) for v in row))
        return "\n".join(lines)

    def to_list(self) -> list[list[int]]:
        return self.counts.tolist()


def f1_score(matrix: ConfusionMatrix) -> float:
    """Micro-averaged F1 from pooled TP, FP and FN."""
    if matrix.total == 0:
        raise ValueError("empty confusion matrix")
    tp = int(matrix.true_positives().sum())
    fp = int(matrix.false_positives().sum())
    fn = int(matrix.false_negatives().sum())
    # 2PR/(P+R) reduces to 2TP/(2TP+FP+FN); dividing integers once keeps it exact
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if tp else 0.0


def reliability(distribution, atol: float = 1e-9) -> float:
    """``1 - S / ln n`` with ``S`` the natural-log entropy of ``distribution``."""
    y = np.asarray(distribution, dtype=np.float64)
    if y.ndim != 1 or y.size < 2:
        raise ValueError("need a distribution over at least two outcomes")
    if np.any(y < 0) or not np.all(np.isfinite(y)) or abs(y.sum() - 1.0) > atol:
        raise ValueError("not a probability distribution")
    nz = y[y > 0]
    entropy = float(-np.sum(nz * np.log(nz)))
    return float(min(1.0, max(0.0, 1.0 - entropy / math.log(y.size))))


def kfold_split(n: int, k: int = DEFAULT_FOLDS, seed: int = 0) -> list[np.ndarray]:
    """Shuffle ``range(n)`` with ``seed`` and cut it into ``k`` near-equal folds."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if n < k:
        raise ValueError(f"cannot split {n} examples into {k} folds")
    perm = np.random.Generator(np.random.PCG64([seed, 2])).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def fold_seed(seed: int, fold: int) -> int:
    """Independent initialization seed for one fold."""
    return int(np.random.SeedSequence([seed, fold]).generate_state(1, dtype=np.uint64)[0] >> 1)


@dataclass(frozen=True)
class ModelSpec:
    """What to train: network kind, hidden width, and update mode."""

    kind: str
    n_hidden: int = DEFAULT_HIDDEN
    batch: bool = True


@dataclass
class EvaluationReport:
    f1_mean: float
    f1_std: float
    reliability_mean: float
    reliability_std: float
    fold_f1: list[float]
    fold_reliability: list[float]
    confusion: ConfusionMatrix
    loss_traces: list[list[float]] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_folds(cls, f1s, rels, confusion, traces, metadata=None) -> EvaluationReport:
        f1s = [float(v) for v in f1s]
        rels = [float(v) for v in rels]
        return cls(
            float(np.mean(f1s)), float(np.std(f1s)),
            float(np.mean(rels)), float(np.std(rels)),
            f1s, rels, confusion, [list(map(float, t)) for t in traces], dict(metadata or {}),
        )

    def to_dict(self) -> dict:
        return {
            "f1_mean": self.f1_mean,
            "f1_std": self.f1_std,
            "reliability_mean": self.reliability_mean,
            "reliability_std": self.reliability_std,
            "fold_f1": self.fold_f1,
            "fold_reliability": self.fold_reliability,
            "labels": list(self.confusion.codebook.alphabet),
            "confusion": self.confusion.to_list(),
            "loss_traces": self.loss_traces,
            "metadata": self.metadata,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> EvaluationReport:
        cb = LabelCodebook(d["labels"])
        return cls(
            d["f1_mean"], d["f1_std"], d["reliability_mean"], d["reliability_std"],
            list(d["fold_f1"]), list(d["fold_reliability"]), ConfusionMatrix(cb, d["confusion"]),
            [list(t) for t in d.get("loss_traces", [])], dict(d.get("metadata", {})),
        )

    def loss_csv(self) -> str:
        """Loss traces as CSV: one row per epoch, one column per fold."""
        if not self.loss_traces:
            return "epoch\n"
        head = "epoch," + ",".join(f"fold{i}" for i in range(len(self.loss_traces)))
        n = max(len(t) for t in self.loss_traces)
        rows = [head]
        for e in range(n):
            rows.append(f"{e}," + ",".join(repr(t[e]) if e < len(t) else "" for t in self.loss_traces))
        return "\n".join(rows) + "\n"


def evaluate_model(model: NetworkModel, data: FeatureMatrix) -> tuple[ConfusionMatrix, float]:
    """Confusion matrix and mean reliability of ``model`` on already-scaled ``data``."""
    if len(data) == 0:
        raise ValueError("nothing to evaluate")
    xs = data.sequences() if model.topology.recurrent else data.rows
    probs = predict_rows(model, xs)
    true = np.argmax(data.targets, axis=1)
    pred = np.argmax(probs, axis=1)
    rel = float(np.mean([reliability(p) for p in probs]))
    return ConfusionMatrix.from_indices(data.codebook, true, pred), rel


def fit_model(spec: ModelSpec, data: FeatureMatrix, epochs: int, seed: int) -> tuple[NetworkModel, list[float]]:
    """Fit a scaler on ``data``, then train a fresh model on the scaled rows."""
    scaled = data.normalized()
    model = make_model(spec.kind, scaled, spec.n_hidden, seed)
    model.scaler = scaled.scaler
    model, trace = train(model, scaled, epochs, seed=seed, batch=spec.batch)
    return model, trace


def cross_validate(
    spec: ModelSpec,
    data: FeatureMatrix,
    k: int = DEFAULT_FOLDS,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
    metadata: dict | None = None,
) -> EvaluationReport:
    """Train on k-1 folds and evaluate on the remaining one, k times.

    Evaluation folds are scaled with the map fitted on their training folds.
    """
    folds = kfold_split(len(data), k, seed)
    f1s, rels, traces = [], [], []
    total = ConfusionMatrix(data.codebook)
    for i, test_idx in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        model, trace = fit_model(spec, data.subset(train_idx), epochs, fold_seed(seed, i))
        test = data.subset(test_idx).normalized(model.scaler)
        cm, rel = evaluate_model(model, test)
        f1s.append(f1_score(cm))
        rels.append(rel)
        traces.append(trace)
        total = total + cm
        log.info("fold %d/%d: f1=%.4f reliability=%.4f", i + 1, k, f1s[-1], rel)
    meta = {"kind": spec.kind, "hidden": spec.n_hidden, "folds": k, "epochs": epochs, "seed": seed}
    meta.update(metadata or {})
    return EvaluationReport.from_folds(f1s, rels, total, traces, meta)


def train_and_evaluate(
    spec: ModelSpec,
    train_data: FeatureMatrix,
    eval_data: FeatureMatrix,
    epochs: int = TRANSFER_EPOCHS,
    seed: int = 0,
    metadata: dict | None = None,
) -> tuple[EvaluationReport, NetworkModel]:
    """Train once on ``train_data`` and score on ``eval_data``."""
    if train_data.codebook != eval_data.codebook:
        raise ValueError("training and evaluation codebooks differ")
    model, trace = fit_model(spec, train_data, epochs, seed)
    cm, rel = evaluate_model(model, eval_data.normalized(model.scaler))
    meta = {"kind": spec.kind, "hidden": spec.n_hidden, "folds": 1, "epochs": epochs, "seed": seed}
    meta.update(metadata or {})
    return EvaluationReport.from_folds([f1_score(cm)], [rel], cm, [trace], meta), model
