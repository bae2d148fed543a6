"""Signal cleaning: calibration, moving median, Butterworth, Kalman, scaling.

All stages work on one axis at a time and preserve sequence length.
:func:`preprocess_pipeline` chains them for a whole session in the order
calibrate, median, Butterworth, Kalman, normalize.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import kernels
from .core import RecordingSession, TriaxialSeries

LOWPASS = "lowpass"
HIGHPASS = "highpass"


@dataclass(frozen=True)
class PreprocessConfig:
    median_window_gyro: int = 9
    median_window_accel: int = 5
    gyro_delay_us: float = 10_000
    accel_delay_us: float = 62_500
    gyro_lowpass_hz: float = 8.0
    accel_highpass_hz: float = 0.3
    butterworth_order: int = 2
    kalman_q: float = 1e-3
    kalman_r: float = 1e-1

    def __post_init__(self):
        for name in ("median_window_gyro", "median_window_accel"):
            w = getattr(self, name)
            if w < 1 or w % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 1, got {w}")
        if self.butterworth_order < 1:
            raise ValueError("butterworth_order must be >= 1")
        for cutoff, delay, name in (
            (self.gyro_lowpass_hz, self.gyro_delay_us, "gyro_lowpass_hz"),
            (self.accel_highpass_hz, self.accel_delay_us, "accel_highpass_hz"),
        ):
            nyquist = sampling_frequency(delay) / 2
            if not 0 < cutoff < nyquist:
                raise ValueError(f"{name}={cutoff} must lie in (0, {nyquist})")
        if self.kalman_q <= 0 or self.kalman_r <= 0:
            raise ValueError("Kalman variances must be positive")

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _as_array(values) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=np.float64)


def calibrate(series: TriaxialSeries) -> TriaxialSeries:
    """Subtract each axis' mean from that axis."""
    if len(series) == 0:
        raise ValueError("cannot calibrate an empty series")
    return series.map_axes(lambda v: v - v.mean())


def median_filter(values, window: int) -> np.ndarray:
    """Moving median of odd ``window`` size; edges are replicated."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"median window must be odd and >= 1, got {window}")
    values = _as_array(values)
    if window == 1 or values.size == 0:
        return values.copy()
    return kernels.median_filter(values, window)


def sampling_frequency(delay_us: float) -> float:
    """Sampling frequency in Hz for a sampling delay in microseconds."""
    if delay_us <= 0:
        raise ValueError("sampling delay must be positive")
    return 1.0 / (delay_us * 1e-6)


def butterworth_coefficients(kind: str, cutoff: float, sample_rate: float, order: int = 2):
    """Digital Butterworth ``(b, a)`` by the bilinear transform.

    The analog prototype is pre-warped so the -3 dB point lands exactly on
    ``cutoff``. ``a[0]`` is 1.
    """
    if kind not in (LOWPASS, HIGHPASS):
        raise ValueError(f"unknown filter kind {kind!r}")
    if order < 1:
        raise ValueError("order must be >= 1")
    if not 0 < cutoff < sample_rate / 2:
        raise ValueError(f"cutoff {cutoff} Hz outside (0, {sample_rate / 2}) Hz")
    fs2 = 2.0 * sample_rate
    warped = fs2 * np.tan(np.pi * cutoff / sample_rate)
    k = np.arange(1, order + 1)
    proto = np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    if kind == LOWPASS:
        poles = warped * proto
        zeros = np.array([])
        gain = warped ** order
    else:
        poles = warped / proto
        zeros = np.zeros(order)
        gain = 1.0
    # s -> z; zeros at infinity go to z = -1
    z_zeros = (fs2 + zeros) / (fs2 - zeros)
    z_poles = (fs2 + poles) / (fs2 - poles)
    gain = gain * np.real(np.prod(fs2 - zeros) / np.prod(fs2 - poles))
    z_zeros = np.append(z_zeros, -np.ones(order - zeros.size))
    b = gain * np.real(np.poly(z_zeros))
    a = np.real(np.poly(z_poles))
    return np.ascontiguousarray(b), np.ascontiguousarray(a)


def butterworth(values, kind: str, cutoff: float, sample_rate: float, order: int = 2) -> np.ndarray:
    """Causal Butterworth filter, applied once forward from a zero state."""
    values = _as_array(values)
    if values.size <= 3 * order:
        raise ValueError(f"sequence of length {values.size} too short for order {order}")
    b, a = butterworth_coefficients(kind, cutoff, sample_rate, order)
    return kernels.iir_filter(b, a, values)


def kalman_smooth(values, q: float, r: float) -> np.ndarray:
    """Scalar constant-state Kalman filter.

    Predict adds ``q`` to the variance; update uses gain ``p / (p + r)``.
    The estimate starts at the first measurement with variance ``r``.
    """
    if q <= 0 or r <= 0:
        raise ValueError("Kalman variances must be positive")
    values = _as_array(values)
    if values.size == 0:
        raise ValueError("cannot smooth an empty sequence")
    return kernels.kalman_smooth(values, float(q), float(r))


def normalize(values) -> np.ndarray:
    """Affine map of [min, max] onto [-1, 1]; constant input gives zeros."""
    values = _as_array(values)
    if values.size == 0:
        raise ValueError("cannot normalize an empty sequence")
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    out = 2.0 * (values - lo) / (hi - lo) - 1.0
    # pin the endpoints against rounding
    out[values == lo] = -1.0
    out[values == hi] = 1.0
    return out


def _clean_series(series, window, kind, cutoff, delay_us, config, trace, tag):
    fs = sampling_frequency(delay_us)
    out = series.map_axes(lambda v: median_filter(v, window))
    trace.append(f"{tag}:median")
    out = out.map_axes(lambda v: butterworth(v, kind, cutoff, fs, config.butterworth_order))
    trace.append(f"{tag}:butterworth-{kind}")
    out = out.map_axes(lambda v: kalman_smooth(v, config.kalman_q, config.kalman_r))
    trace.append(f"{tag}:kalman")
    return out


def rescale_session(session: RecordingSession, trace: list[str] | None = None) -> RecordingSession:
    """Map every axis of both sensors onto [-1, 1]."""
    trace = [] if trace is None else trace
    gyro = session.gyroscope.map_axes(normalize)
    accel = session.accelerometer.map_axes(normalize)
    trace += ["gyroscope:normalize", "accelerometer:normalize"]
    return session.replace(gyroscope=gyro, accelerometer=accel)


def preprocess_pipeline(
    session: RecordingSession,
    config: PreprocessConfig | None = None,
    raw: bool = False,
    trace: list[str] | None = None,
    rescale: bool = True,
) -> RecordingSession:
    """Clean both sensor streams of ``session``.

    With ``raw=True`` only calibration is applied. ``rescale=False`` stops
    before the final [-1, 1] normalization, which keeps the zero baseline
    left by calibration. Stage names are appended to ``trace`` when given.
    """
    config = config or PreprocessConfig()
    trace = [] if trace is None else trace
    gyro = calibrate(session.gyroscope)
    accel = calibrate(session.accelerometer)
    trace += ["gyroscope:calibrate", "accelerometer:calibrate"]
    if not raw:
        gyro = _clean_series(
            gyro, config.median_window_gyro, LOWPASS, config.gyro_lowpass_hz,
            config.gyro_delay_us, config, trace, "gyroscope",
        )
        accel = _clean_series(
            accel, config.median_window_accel, HIGHPASS, config.accel_highpass_hz,
            config.accel_delay_us, config, trace, "accelerometer",
        )
    out = session.replace(gyroscope=gyro, accelerometer=accel)
    if not raw and rescale:
        out = rescale_session(out, trace)
    return out
