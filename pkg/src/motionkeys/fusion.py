"""Constant-rate resampling and gyroscope/accelerometer fusion.

Both sensors are brought onto one grid of constant spacing (2 ms by default)
by linear interpolation, then each grid frame is turned into a vector whose
layout is picked by a fusion strategy:

=============  ===========================  ====
strategy       frame vector                 dim
=============  ===========================  ====
G3             gx, gy, gz                   3
A3             ax, ay, az                   3
Gmean          mean(g)                      1
Amean          mean(a)                      1
GmeanAmean     mean(g), mean(a)             2
GmeanA3        mean(g), ax, ay, az          4
G3Amean        gx, gy, gz, mean(a)          4
G3A3           gx, gy, gz, ax, ay, az       6
=============  ===========================  ====
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import RecordingSession, TriaxialSeries

STRATEGIES = {
    "G3": ("gx", "gy", "gz"),
    "A3": ("ax", "ay", "az"),
    "Gmean": ("gmean",),
    "Amean": ("amean",),
    "GmeanAmean": ("gmean", "amean"),
    "GmeanA3": ("gmean", "ax", "ay", "az"),
    "G3Amean": ("gx", "gy", "gz", "amean"),
    "G3A3": ("gx", "gy", "gz", "ax", "ay", "az"),
}


def strategy_name(name: str) -> str:
    """Resolve a case-insensitive strategy identifier (``g3a3`` -> ``G3A3``)."""
    for key in STRATEGIES:
        if key.lower() == name.lower():
            return key
    raise ValueError(f"unknown fusion strategy {name!r}; choose from {', '.join(STRATEGIES)}")


def strategy_dim(name: str) -> int:
    return len(STRATEGIES[strategy_name(name)])


@dataclass(frozen=True)
class FusionConfig:
    interval_ms: int = 2
    strategy: str = "G3A3"

    def __post_init__(self):
        if int(self.interval_ms) != self.interval_ms or self.interval_ms < 1:
            raise ValueError("interval_ms must be an integer >= 1")
        object.__setattr__(self, "strategy", strategy_name(self.strategy))


@dataclass(frozen=True, eq=False)
class FusedFrameSequence:
    """Frames on a constant grid.

    ``frames`` is (k, dim) laid out per ``strategy``. ``sensor_axes`` keeps
    all six aligned axes (gx, gy, gz, ax, ay, az) so downstream code can get
    at either sensor regardless of the chosen strategy.
    """

    timestamps: np.ndarray
    frames: np.ndarray
    strategy: str
    sensor_axes: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        if ts.size > 1:
            steps = np.diff(ts)
            if np.any(steps != steps[0]):
                raise ValueError("frame timestamps are not evenly spaced")
        if self.frames.shape[0] != ts.size or self.sensor_axes.shape != (ts.size, 6):
            raise ValueError("frame arrays do not match the timestamp grid")
        object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def interval_ms(self) -> int:
        return int(self.timestamps[1] - self.timestamps[0]) if len(self) > 1 else 0

    @property
    def gyroscope(self) -> np.ndarray:
        return self.sensor_axes[:, :3]

    @property
    def accelerometer(self) -> np.ndarray:
        return self.sensor_axes[:, 3:]

    def index_of(self, t: float) -> int:
        """Grid index nearest to time ``t`` (may fall outside the grid)."""
        if len(self) < 2:
            return int(round(t - self.timestamps[0]))
        return int(np.floor((t - self.timestamps[0]) / self.interval_ms + 0.5))


def constant_grid(t0: int, tn: int, interval_ms: int) -> np.ndarray:
    """``t0, t0 + a, ...`` with ``floor((tn - t0) / a) + 1`` points."""
    k = (int(tn) - int(t0)) // int(interval_ms) + 1
    return int(t0) + int(interval_ms) * np.arange(k, dtype=np.int64)


def _interp(series: TriaxialSeries, grid: np.ndarray) -> TriaxialSeries:
    t = series.timestamps.astype(np.float64)
    g = grid.astype(np.float64)
    # np.interp holds the end values outside the sample span
    return TriaxialSeries(grid, *(np.interp(g, t, a) for a in series.axes), sensor=series.sensor)


def resample_constant_rate(series: TriaxialSeries, interval_ms: int = 2) -> TriaxialSeries:
    """Linearly interpolate ``series`` onto a grid of constant spacing.

    The grid starts at the first timestamp; values at measured times are
    kept as is.
    """
    if len(series) < 2:
        raise ValueError("resampling needs at least two points")
    if interval_ms < 1:
        raise ValueError("interval_ms must be >= 1")
    grid = constant_grid(series.timestamps[0], series.timestamps[-1], interval_ms)
    return _interp(series, grid)


def align_accelerometer(accel: TriaxialSeries, grid) -> TriaxialSeries:
    """Interpolate ``accel`` at the gyroscope grid timestamps.

    Grid points outside the accelerometer span take the nearest end value.
    """
    grid = np.asarray(grid, dtype=np.int64)
    if len(accel) == 0 or grid.size == 0:
        raise ValueError("empty input")
    if grid[-1] < accel.timestamps[0] or grid[0] > accel.timestamps[-1]:
        raise ValueError("accelerometer and grid time ranges are disjoint")
    if len(accel) == 1:
        return TriaxialSeries(grid, *(np.full(grid.size, a[0]) for a in accel.axes), sensor=accel.sensor)
    return _interp(accel, grid)


def _channels(gyro: np.ndarray, accel: np.ndarray) -> dict[str, np.ndarray]:
    return {
        "gx": gyro[:, 0], "gy": gyro[:, 1], "gz": gyro[:, 2],
        "ax": accel[:, 0], "ay": accel[:, 1], "az": accel[:, 2],
        "gmean": gyro.mean(axis=1), "amean": accel.mean(axis=1),
    }


def fuse(gyro: TriaxialSeries, accel: TriaxialSeries, config: FusionConfig | None = None) -> FusedFrameSequence:
    """Assemble per-frame vectors from two series sharing one grid."""
    config = config or FusionConfig()
    if not np.array_equal(gyro.timestamps, accel.timestamps):
        raise ValueError("gyroscope and accelerometer are not on the same grid")
    g, a = gyro.values, accel.values
    ch = _channels(g, a)
    frames = np.column_stack([ch[c] for c in STRATEGIES[config.strategy]])
    return FusedFrameSequence(gyro.timestamps, frames, config.strategy, np.hstack([g, a]))


def fuse_session(session: RecordingSession, config: FusionConfig | None = None) -> FusedFrameSequence:
    """Resample the gyroscope, align the accelerometer onto it and fuse."""
    config = config or FusionConfig()
    gyro = resample_constant_rate(session.gyroscope, config.interval_ms)
    accel = align_accelerometer(session.accelerometer, gyro.timestamps)
    return fuse(gyro, accel, config)


def strategy_frames(sensor_axes, strategy: str) -> np.ndarray:
    """Frames of ``strategy`` from (k, 6) gyroscope-then-accelerometer axes."""
    axes = np.asarray(sensor_axes, dtype=np.float64)
    ch = _channels(axes[:, :3], axes[:, 3:])
    return np.column_stack([ch[c] for c in STRATEGIES[strategy_name(strategy)]])


def with_strategy(seq: FusedFrameSequence, strategy: str) -> FusedFrameSequence:
    """Re-slice an existing fused sequence under another strategy."""
    strategy = strategy_name(strategy)
    return FusedFrameSequence(seq.timestamps, strategy_frames(seq.sensor_axes, strategy), strategy, seq.sensor_axes)
