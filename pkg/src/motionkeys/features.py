"""Classifier inputs built from labelled segments.

Two feature kinds exist:

``statistical``
    Eight statistics per axis for the three gyroscope and three
    accelerometer axes, 48 values per segment.
``segment``
    The segment's fused frames themselves, flattened time-major for
    feed-forward nets; sequence models read them back as (frames, dim).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import LabelCodebook
from .segmentation import PEAK_THRESHOLD, Segment, detect_peaks, papr

STATISTICAL = "statistical"
SEGMENT = "segment"
FEATURE_KINDS = (STATISTICAL, SEGMENT)

STAT_NAMES = ("min", "max", "rms", "peaks", "crest", "skewness", "kurtosis", "variance")


def statistical_vector(values, threshold: float = PEAK_THRESHOLD) -> np.ndarray:
    """``min, max, RMS, peak count, crest factor, skewness, kurtosis, variance``.

    Moments are population moments. Skewness and kurtosis are 0 when the
    variance is 0; peak count and crest factor are 0 for an all-zero input.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("need at least two values")
    r = float(np.sqrt(np.mean(v * v)))
    var = float(np.var(v))
    if r > 0:
        n_peaks = float(detect_peaks(papr(v), threshold).size)
        crest = float(np.max(np.abs(v)) / r)
    else:
        n_peaks = crest = 0.0
    sd = np.sqrt(var)
    if sd > 0:
        # standardize first: sd ** 3 can underflow for tiny spreads
        z = (v - v.mean()) / sd
        skew = float(np.mean(z ** 3))
        kurt = float(np.mean(z ** 4))
    else:
        skew = kurt = 0.0
    return np.array([v.min(), v.max(), r, n_peaks, crest, skew, kurt, var])


@dataclass
class Scaler:
    """Per-column affine map onto [-1, 1] fitted on training data.

    With ``channels`` set, columns are grouped by ``index % channels`` so
    flattened time-major frames share one map per channel. Columns that are
    constant in the training data map to 0.
    """

    low: np.ndarray
    high: np.ndarray
    channels: int | None = None

    @classmethod
    def fit(cls, rows: np.ndarray, channels: int | None = None) -> Scaler:
        rows = np.asarray(rows, dtype=np.float64)
        if channels:
            per = rows.reshape(-1, channels)
            return cls(per.min(axis=0), per.max(axis=0), channels)
        return cls(rows.min(axis=0), rows.max(axis=0), None)

    def transform(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        shape = rows.shape
        if self.channels:
            rows = rows.reshape(-1, self.channels)
        span = self.high - self.low
        safe = np.where(span > 0, span, 1.0)
        out = np.where(span > 0, 2.0 * (rows - self.low) / safe - 1.0, 0.0)
        return out.reshape(shape)


@dataclass
class FeatureMatrix:
    rows: np.ndarray
    targets: np.ndarray
    codebook: LabelCodebook
    kind: str
    sequence_shape: tuple[int, int] | None = None
    scaler: Scaler | None = field(default=None, repr=False)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.rows.shape[0] != self.targets.shape[0]:
            raise ValueError("rows and targets differ in length")
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")

    def __len__(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @property
    def labels(self) -> list[str]:
        return [self.codebook.decode(t) for t in self.targets]

    def subset(self, index) -> FeatureMatrix:
        return FeatureMatrix(
            self.rows[index], self.targets[index], self.codebook, self.kind, self.sequence_shape, self.scaler
        )

    def sequences(self) -> np.ndarray:
        """Rows viewed as (n, frames, dim)."""
        if self.sequence_shape is None:
            raise ValueError("feature rows are not sequences")
        return self.rows.reshape(len(self), *self.sequence_shape)

    def fit_scaler(self) -> Scaler:
        channels = self.sequence_shape[1] if self.kind == SEGMENT and self.sequence_shape else None
        return Scaler.fit(self.rows, channels)

    def normalized(self, scaler: Scaler | None = None) -> FeatureMatrix:
        """Copy with rows mapped through ``scaler`` (fitted here if None)."""
        scaler = scaler or self.fit_scaler()
        return FeatureMatrix(
            scaler.transform(self.rows), self.targets, self.codebook, self.kind, self.sequence_shape, scaler
        )


def encode_label(symbol: str, codebook: LabelCodebook) -> np.ndarray:
    return codebook.encode(symbol)


def decode_label(vector, codebook: LabelCodebook) -> str:
    return codebook.decode(vector)


def _targets(segments: Sequence[Segment], codebook: LabelCodebook) -> np.ndarray:
    if not segments:
        return np.zeros((0, len(codebook)))
    for s in segments:
        if s.label is None:
            raise ValueError(f"segment at t={s.t} has no label")
    return np.array([codebook.encode(s.label) for s in segments])


def statistical_rows(segments: Sequence[Segment], threshold: float = PEAK_THRESHOLD) -> np.ndarray:
    """48 statistics per segment, gyroscope axes first."""
    return np.array(
        [np.concatenate([statistical_vector(s.sensor_axes[:, j], threshold) for j in range(6)]) for s in segments]
    ).reshape(len(segments), 48)


def build_statistical_features(
    segments: Sequence[Segment],
    codebook: LabelCodebook,
    scaler: Scaler | None = None,
    normalize: bool = True,
    threshold: float = PEAK_THRESHOLD,
) -> FeatureMatrix:
    """48-dim statistical rows, column-normalized to [-1, 1].

    The column map is fitted on these rows unless ``scaler`` is supplied,
    and is kept on the result for reuse at inference.
    """
    targets = _targets(segments, codebook)
    fm = FeatureMatrix(statistical_rows(segments, threshold), targets, codebook, STATISTICAL)
    return fm.normalized(scaler) if normalize else fm


def build_segment_features(
    segments: Sequence[Segment],
    codebook: LabelCodebook,
    scaler: Scaler | None = None,
    normalize: bool = False,
) -> FeatureMatrix:
    """Flattened frame windows; ``sequences()`` recovers (frames, dim)."""
    targets = _targets(segments, codebook)
    if not segments:
        raise ValueError("no segments")
    shapes = {s.frames.shape for s in segments}
    if len(shapes) != 1:
        raise ValueError(f"inconsistent segment shapes {sorted(shapes)}")
    (shape,) = shapes
    rows = np.array([s.frames.reshape(-1) for s in segments])
    fm = FeatureMatrix(rows, targets, codebook, SEGMENT, tuple(shape))
    return fm.normalized(scaler) if (normalize or scaler is not None) else fm


def unlabeled_rows(segments: Sequence[Segment], kind: str, threshold: float = PEAK_THRESHOLD) -> np.ndarray:
    """Feature rows for segments without labels (inference)."""
    if kind == STATISTICAL:
        return statistical_rows(segments, threshold)
    return np.array([s.frames.reshape(-1) for s in segments])
