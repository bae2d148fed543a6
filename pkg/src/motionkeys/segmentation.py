"""Cut a fused frame sequence into fixed-size keystroke windows.

Windows are either centred on label timestamps or on peaks of the
gyroscope's peak-to-average power ratio. A window covers grid indices
``[c - half, c + half)``; windows that would cross either end of the
sequence are skipped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LabelEvent, TriaxialSeries
from .fusion import FusedFrameSequence

log = logging.getLogger(__name__)

HALF_WINDOW = 25
PEAK_THRESHOLD = 0.4
MATCH_TOLERANCE_MS = 60.0


@dataclass(frozen=True, eq=False)
class Segment:
    center: int
    t: int
    frames: np.ndarray
    sensor_axes: np.ndarray
    label: str | None = None

    def __len__(self) -> int:
        return self.frames.shape[0]

    def with_label(self, label: str | None) -> Segment:
        return Segment(self.center, self.t, self.frames, self.sensor_axes, label)


def _window(seq: FusedFrameSequence, center: int, half: int, label=None) -> Segment | None:
    lo, hi = center - half, center + half
    if lo < 0 or hi > len(seq):
        return None
    return Segment(
        center=center,
        t=int(seq.timestamps[center]),
        frames=seq.frames[lo:hi],
        sensor_axes=seq.sensor_axes[lo:hi],
        label=label,
    )


def segment_by_labels(
    seq: FusedFrameSequence,
    labels: Sequence[LabelEvent],
    half_window: int = HALF_WINDOW,
) -> list[Segment]:
    """One window per label, centred on the grid index nearest its time."""
    if len(seq) == 0:
        raise ValueError("empty frame sequence")
    out = []
    skipped = 0
    for lab in labels:
        seg = _window(seq, seq.index_of(lab.t), half_window, lab.label)
        if seg is None:
            skipped += 1
        else:
            out.append(seg)
    if skipped:
        log.warning("skipped %d label(s) whose window leaves the sequence", skipped)
    return out


def mean_gyro_signal(gyro) -> np.ndarray:
    """Per-sample average of the three gyroscope axes.

    Accepts a :class:`TriaxialSeries` or an (n, 3) array.
    """
    if isinstance(gyro, TriaxialSeries):
        gyro = gyro.values
    gyro = np.asarray(gyro, dtype=np.float64)
    return (gyro[:, 0] + gyro[:, 1] + gyro[:, 2]) / 3.0


def rms(values) -> float:
    values = np.asarray(values, dtype=np.float64)
    peak = float(np.max(np.abs(values), initial=0.0))
    if peak == 0.0:
        return 0.0
    # dividing by the peak first keeps tiny signals from squaring to zero
    u = values / peak
    return peak * float(np.sqrt(np.mean(u * u)))


def papr(signal) -> np.ndarray:
    """Peak-to-average power ratio ``(v / rms(v)) ** 2`` per sample."""
    signal = np.asarray(signal, dtype=np.float64)
    peak = float(np.max(np.abs(signal), initial=0.0))
    if peak == 0.0:
        raise ValueError("PAPR undefined for an all-zero signal")
    u = signal / peak
    return (u / rms(u)) ** 2


def detect_peaks(ratios, threshold: float = PEAK_THRESHOLD) -> np.ndarray:
    """Interior indices strictly above both neighbours and ``threshold``."""
    r = np.asarray(ratios, dtype=np.float64)
    if r.size < 3:
        return np.array([], dtype=np.int64)
    mid = r[1:-1]
    hit = (mid > r[:-2]) & (mid > r[2:]) & (mid > threshold)
    return np.flatnonzero(hit) + 1


def segment_by_peaks(
    seq: FusedFrameSequence,
    gyro=None,
    half_window: int = HALF_WINDOW,
    threshold: float = PEAK_THRESHOLD,
) -> list[Segment]:
    """Unlabelled windows centred on gyroscope PAPR peaks.

    ``gyro`` defaults to the gyroscope axes carried by ``seq``; when given it
    must be on the same grid.
    """
    if gyro is None:
        gyro = seq.gyroscope
    mean = mean_gyro_signal(gyro)
    if mean.shape[0] != len(seq):
        raise ValueError("gyroscope and frame sequence lengths differ")
    if not np.any(mean):
        return []
    peaks = detect_peaks(papr(mean), threshold)
    return [s for s in (_window(seq, int(c), half_window) for c in peaks) if s is not None]


def estimate_peak_lag(segments: Sequence[Segment], labels: Sequence[LabelEvent], search_ms: float = 300.0) -> float:
    """Median offset from each label to its nearest peak, in ms.

    Filtering stages delay peaks by a roughly constant amount; this estimates
    that delay from a labelled recording. Labels without a peak within
    ``search_ms`` are ignored; returns 0 when nothing is in range.
    """
    if not segments or not labels:
        return 0.0
    centers = np.sort(np.array([s.t for s in segments], dtype=np.float64))
    offsets = []
    for lab in labels:
        i = np.searchsorted(centers, lab.t)
        cand = centers[max(i - 1, 0):i + 1] - lab.t
        best = cand[np.argmin(np.abs(cand))]
        if abs(best) <= search_ms:
            offsets.append(best)
    return float(np.median(offsets)) if offsets else 0.0


def match_labels_to_peaks(
    segments: Sequence[Segment],
    labels: Sequence[LabelEvent],
    tolerance_ms: float = MATCH_TOLERANCE_MS,
    lag_ms: float = 0.0,
) -> list[Segment]:
    """Attach labels to peak segments, greedily nearest-first.

    A segment at time ``t`` is compared with label times shifted by
    ``lag_ms``. Each label is used at most once; segments left without a
    label within ``tolerance_ms`` are dropped. Output keeps segment order.
    """
    pairs = []
    for si, seg in enumerate(segments):
        for li, lab in enumerate(labels):
            d = abs(seg.t - (lab.t + lag_ms))
            if d <= tolerance_ms:
                pairs.append((d, si, li))
    pairs.sort()
    seg_label: dict[int, str] = {}
    used: set[int] = set()
    for _, si, li in pairs:
        if si in seg_label or li in used:
            continue
        seg_label[si] = labels[li].label
        used.add(li)
    return [seg.with_label(seg_label[i]) for i, seg in enumerate(segments) if i in seg_label]
