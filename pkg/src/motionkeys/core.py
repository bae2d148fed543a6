"""Domain types shared across the package and session persistence.

A recording session is stored as one directory per session holding three CSV
files::

    <session-id>/gyroscope.csv       t,x,y,z
    <session-id>/accelerometer.csv   t,x,y,z
    <session-id>/labels.csv          t,label

Timestamps are integer milliseconds since the Unix epoch. Reals are written
with Python's shortest round-trip representation so that reading a written
session gives back exactly the same values.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

GYROSCOPE = "gyroscope"
ACCELEROMETER = "accelerometer"
SENSOR_KINDS = (GYROSCOPE, ACCELEROMETER)

# Keypad reading order, bottom row as *, 0, #.
KEYPAD_ALPHABET = ("1", "2", "3", "4", "5", "6", "7", "8", "9", "*", "0", "#")

SENSOR_HEADER = ["t", "x", "y", "z"]
LABEL_HEADER = ["t", "label"]


class SessionFormatError(ValueError):
    """A stored session file is missing or malformed."""

    def __init__(self, path: os.PathLike | str, line: int | None, message: str):
        self.path = Path(path)
        self.line = line
        where = f"{self.path}" if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class SensorEvent:
    t: int
    x: float
    y: float
    z: float
    sensor: str = GYROSCOPE

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite reading at t={self.t}")
        if self.sensor not in SENSOR_KINDS:
            raise ValueError(f"unknown sensor kind {self.sensor!r}")


@dataclass(frozen=True)
class LabelEvent:
    t: int
    label: str

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"negative timestamp {self.t}")


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TriaxialSeries:
    """A three-axis time series for one sensor.

    Arrays are copied on construction and made read-only.
    """

    timestamps: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    sensor: str = GYROSCOPE

    def __post_init__(self):
        ts = _frozen(self.timestamps, np.int64)
        axes = [_frozen(v, np.float64) for v in (self.x, self.y, self.z)]
        if ts.ndim != 1 or any(a.shape != ts.shape for a in axes):
            raise ValueError("timestamps and axes must be 1-D and of equal length")
        if ts.size > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if self.sensor not in SENSOR_KINDS:
            raise ValueError(f"unknown sensor kind {self.sensor!r}")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "x", axes[0])
        object.__setattr__(self, "y", axes[1])
        object.__setattr__(self, "z", axes[2])

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TriaxialSeries):
            return NotImplemented
        return (
            self.sensor == other.sensor
            and np.array_equal(self.timestamps, other.timestamps)
            and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))
        )

    @property
    def axes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.x, self.y, self.z

    @property
    def values(self) -> np.ndarray:
        """(n, 3) array of x, y, z columns."""
        return np.column_stack(self.axes)

    def with_axes(self, x, y, z) -> TriaxialSeries:
        return TriaxialSeries(self.timestamps, x, y, z, self.sensor)

    def map_axes(self, fn) -> TriaxialSeries:
        """Apply ``fn`` to each axis array independently."""
        return self.with_axes(*(fn(a) for a in self.axes))

    @classmethod
    def from_events(cls, events: Sequence[SensorEvent], sensor: str | None = None) -> TriaxialSeries:
        if sensor is None:
            sensor = events[0].sensor if events else GYROSCOPE
        return cls(
            [e.t for e in events],
            [e.x for e in events],
            [e.y for e in events],
            [e.z for e in events],
            sensor,
        )

    def to_events(self) -> list[SensorEvent]:
        return [
            SensorEvent(int(t), float(x), float(y), float(z), self.sensor)
            for t, x, y, z in zip(self.timestamps, self.x, self.y, self.z)
        ]

    @classmethod
    def empty(cls, sensor: str) -> TriaxialSeries:
        return cls([], [], [], [], sensor)


@dataclass(frozen=True)
class RecordingSession:
    session_id: str
    gyroscope: TriaxialSeries
    accelerometer: TriaxialSeries
    labels: tuple[LabelEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.gyroscope.sensor != GYROSCOPE or self.accelerometer.sensor != ACCELEROMETER:
            raise ValueError("sensor series are attached to the wrong slots")
        ts = self.gyroscope.timestamps
        if ts.size and self.labels:
            lo, hi = int(ts[0]), int(ts[-1])
            outside = sum(1 for lab in self.labels if not lo <= lab.t <= hi)
            if outside:
                log.warning(
                    "session %s: %d label(s) outside the gyroscope time range [%d, %d]",
                    self.session_id, outside, lo, hi,
                )

    def replace(self, **changes) -> RecordingSession:
        fields = dict(
            session_id=self.session_id,
            gyroscope=self.gyroscope,
            accelerometer=self.accelerometer,
            labels=self.labels,
        )
        fields.update(changes)
        return RecordingSession(**fields)


class LabelCodebook:
    """Bijection between key symbols and output indices."""

    def __init__(self, alphabet: Iterable[str] = KEYPAD_ALPHABET):
        self.alphabet = tuple(alphabet)
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("duplicate symbols in alphabet")
        if not self.alphabet:
            raise ValueError("empty alphabet")
        self._index = {s: i for i, s in enumerate(self.alphabet)}

    def __len__(self) -> int:
        return len(self.alphabet)

    def __contains__(self, symbol) -> bool:
        return symbol in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelCodebook) and self.alphabet == other.alphabet

    def __repr__(self) -> str:
        return f"LabelCodebook({list(self.alphabet)!r})"

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise KeyError(f"symbol {symbol!r} is not in the codebook") from None

    def symbol(self, index: int) -> str:
        return self.alphabet[index]

    def encode(self, symbol: str) -> np.ndarray:
        vec = np.zeros(len(self.alphabet))
        vec[self.index(symbol)] = 1.0
        return vec

    def decode(self, vector) -> str:
        return self.alphabet[int(np.argmax(vector))]


def sort_events(events: Iterable) -> list:
    """Stable ascending sort by timestamp ``t``."""
    return sorted(events, key=lambda e: e.t)


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {v!r} cannot be stored")
    return repr(float(v))


def _write_series(path: Path, series: TriaxialSeries) -> None:
    order = np.argsort(series.timestamps, kind="stable")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SENSOR_HEADER)
        for i in order:
            w.writerow([int(series.timestamps[i]), _fmt(series.x[i]), _fmt(series.y[i]), _fmt(series.z[i])])


def write_session(session: RecordingSession, directory: os.PathLike | str) -> Path:
    """Write the three CSV files of ``session`` into ``directory``."""
    directory = Path(directory)
    for s in (session.gyroscope, session.accelerometer):
        if not all(np.all(np.isfinite(a)) for a in s.axes):
            raise ValueError(f"{s.sensor} series contains non-finite values")
    try:
        directory.mkdir(parents=True, exist_ok=True)
        _write_series(directory / "gyroscope.csv", session.gyroscope)
        _write_series(directory / "accelerometer.csv", session.accelerometer)
        with open(directory / "labels.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LABEL_HEADER)
            for lab in sort_events(session.labels):
                w.writerow([lab.t, lab.label])
    except OSError as exc:
        raise OSError(f"cannot write session to {directory}: {exc}") from exc
    return directory


def _rows(path: Path, header: list[str]):
    if not path.is_file():
        raise SessionFormatError(path, None, "file not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first != header:
            raise SessionFormatError(path, 1, f"expected header {','.join(header)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SessionFormatError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            yield lineno, row


def _parse_int(path, lineno, text) -> int:
    try:
        value = int(text)
    except ValueError:
        raise SessionFormatError(path, lineno, f"timestamp {text!r} is not an integer") from None
    if value < 0:
        raise SessionFormatError(path, lineno, "negative timestamp")
    return value


def _read_series(path: Path, sensor: str) -> TriaxialSeries:
    ts, xs, ys, zs = [], [], [], []
    for lineno, row in _rows(path, SENSOR_HEADER):
        ts.append(_parse_int(path, lineno, row[0]))
        try:
            vals = [float(v) for v in row[1:]]
        except ValueError:
            raise SessionFormatError(path, lineno, "non-numeric axis value") from None
        if not all(math.isfinite(v) for v in vals):
            raise SessionFormatError(path, lineno, "non-finite axis value")
        xs.append(vals[0])
        ys.append(vals[1])
        zs.append(vals[2])
    order = np.argsort(np.asarray(ts, dtype=np.int64), kind="stable")
    try:
        return TriaxialSeries(
            np.asarray(ts, dtype=np.int64)[order],
            np.asarray(xs)[order],
            np.asarray(ys)[order],
            np.asarray(zs)[order],
            sensor,
        )
    except ValueError as exc:
        raise SessionFormatError(path, None, str(exc)) from None


def read_session(directory: os.PathLike | str, session_id: str | None = None) -> RecordingSession:
    """Load a session written by :func:`write_session`."""
    directory = Path(directory)
    gyro = _read_series(directory / "gyroscope.csv", GYROSCOPE)
    accel = _read_series(directory / "accelerometer.csv", ACCELEROMETER)
    path = directory / "labels.csv"
    labels = [LabelEvent(_parse_int(path, lineno, row[0]), row[1]) for lineno, row in _rows(path, LABEL_HEADER)]
    return RecordingSession(
        session_id or directory.name,
        gyro,
        accel,
        tuple(sort_events(labels)),
    )
