"""Deterministic synthetic keystroke sessions.

Each key owns a motion template: on every sensor axis the response to a
keystroke is a sum of two raised-cosine bumps,

    s_a(tau) = c_a * b_D(tau) + e_a * b_D2(tau - delta)

with a primary bump of width ``D`` centred on the keystroke and a secondary
bump of width ``D2`` offset by ``delta``. On the gyroscope the primary
amplitudes average to a fixed amplitude and the secondary ones sum to zero,
so the mean of the three axes is the same single bump for every key,
centred exactly on the label time. Key identity lives in how that energy is
spread across axes: each key's deviation from the mean is a point on a
circle in the zero-sum plane, with same-direction keys spaced evenly round
it. Accelerometer amplitudes, ``D2`` and ``delta`` are drawn per key.

The accelerometer runs at a sixth of the gyroscope rate, so a 100 ms bump
would fall between its samples. Its timing (widths and offset) is stretched
to span at least ``ACCEL_MIN_SAMPLES`` sampling intervals; the slower arm
translation a wrist sensor sees is broader than the tap itself anyway. The
hand starts and ends each keystroke at rest, so accelerometer bumps are
zero-area pulses: a positive lobe flanked by two half-height negative ones,

    psi_D(tau) = b_D(tau) - b_D(tau - D/2) / 2 - b_D(tau + D/2) / 2

which integrates to zero and leaves no velocity change behind.

Template families model different keypads. Family 0 is the base set;
family ``f`` rotates every key's amplitude vectors by a fixed rotation and
stretches its timing, both drawn from ``f``, so templates of two families
are correlated but not equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import ACCELEROMETER, GYROSCOPE, KEYPAD_ALPHABET, LabelEvent, RecordingSession, TriaxialSeries

GRAVITY = 9.81
EPOCH_BASE_MS = 1_480_000_000_000
GYRO_DELAY_MS = 10.0
ACCEL_DELAY_MS = 62.5
GYRO_AMPLITUDE = 1.0
ACCEL_AMPLITUDE = 1.0
ACCEL_MIN_SAMPLES = 8
# Radius of the per-axis gyroscope deviation patterns around the mean bump.
GYRO_SPREAD = 1.3
MARGIN_MS = 1000


@dataclass(frozen=True)
class SynthConfig:
    """Generator parameters.

    ``snr`` is the template peak amplitude divided by the per-axis noise
    standard deviation; ``math.inf`` disables noise. ``jitter`` is the
    largest relative deviation of a sampling delay from its nominal value.
    """

    seed: int = 0
    alphabet: tuple[str, ...] = KEYPAD_ALPHABET
    instances_per_key: int = 20
    gap_ms: float = 600.0
    gap_spread_ms: float = 100.0
    duration_ms: float = 100.0
    snr: float = 6.0
    jitter: float = 0.2
    family: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        if not self.alphabet or len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet must be non-empty with distinct symbols")
        if self.instances_per_key < 1:
            raise ValueError("instances_per_key must be >= 1")
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter must lie in [0, 1)")
        if self.duration_ms <= 0:
            raise ValueError("duration_ms must be positive")
        if self.gap_spread_ms < 0 or self.gap_ms - self.gap_spread_ms < 2 * self.duration_ms:
            raise ValueError("keystrokes would overlap: gap_ms - gap_spread_ms must be >= 2 * duration_ms")
        if self.family < 0:
            raise ValueError("family must be >= 0")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr) and self.jitter == 0

    def without_noise(self) -> SynthConfig:
        return replace(self, snr=math.inf, jitter=0.0)


@dataclass(frozen=True)
class KeyTemplate:
    """Per-axis bump parameters for one key; rows are x, y, z."""

    gyro_primary: np.ndarray
    gyro_secondary: np.ndarray
    accel_primary: np.ndarray
    accel_secondary: np.ndarray
    width: float
    secondary_width: float
    offset: float
    accel_stretch: float = 1.0

    def _timing(self, sensor: str) -> tuple[float, float, float]:
        k = 1.0 if sensor == GYROSCOPE else self.accel_stretch
        return self.width * k, self.secondary_width * k, self.offset * k

    def response(self, sensor: str, tau: np.ndarray) -> np.ndarray:
        """(len(tau), 3) response at offsets ``tau`` (ms) from the centre."""
        w1, w2, off = self._timing(sensor)
        if sensor == GYROSCOPE:
            c, e, pulse = self.gyro_primary, self.gyro_secondary, raised_cosine
        else:
            c, e, pulse = self.accel_primary, self.accel_secondary, zero_area_pulse
        return np.outer(pulse(tau, w1), c) + np.outer(pulse(tau - off, w2), e)

    def support(self, sensor: str = GYROSCOPE) -> float:
        """Half-width (ms) outside which the response of ``sensor`` is zero."""
        w1, w2, off = self._timing(sensor)
        if sensor == GYROSCOPE:
            return max(w1 / 2, abs(off) + w2 / 2)
        return max(w1, abs(off) + w2)


def raised_cosine(tau, width: float) -> np.ndarray:
    """``0.5 * (1 + cos(2 pi tau / width))`` on ``|tau| < width / 2``, else 0."""
    tau = np.asarray(tau, dtype=np.float64)
    out = 0.5 * (1.0 + np.cos(2.0 * np.pi * tau / width))
    return np.where(np.abs(tau) < width / 2, out, 0.0)


def zero_area_pulse(tau, width: float) -> np.ndarray:
    """Raised cosine minus two half-height copies shifted by ``width / 2``.

    Peaks at 1 for ``tau = 0``, is zero outside ``|tau| < width`` and has zero
    integral.
    """
    tau = np.asarray(tau, dtype=np.float64)
    side = raised_cosine(tau - width / 2, width) + raised_cosine(tau + width / 2, width)
    return raised_cosine(tau, width) - 0.5 * side


def _key_rng(symbol: str, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([stream, *symbol.encode()])))


_KEYPAD_POSITION = {k: divmod(i, 3) for i, k in enumerate(KEYPAD_ALPHABET)}


def _keypad_roll(row: int, col: int) -> float:
    if col == 1:
        return 1.0 if row % 2 == 0 else -1.0
    return 1.0 if col == 0 else -1.0


# Keypad keys sharing a roll direction, in keypad order.
_ROLL_GROUPS = {
    sign: tuple(k for k in KEYPAD_ALPHABET if _keypad_roll(*_KEYPAD_POSITION[k]) == sign) for sign in (1.0, -1.0)
}

# Orthonormal basis of the zero-sum plane {v : v.sum() == 0} in R^3.
_PLANE = np.array([[1.0, -1.0, 0.0], [1.0, 1.0, -2.0]]) / np.array([[math.sqrt(2.0)], [math.sqrt(6.0)]])


def _roll_sign(symbol: str, rng: np.random.Generator) -> float:
    """Direction of the dominant wrist roll for a key.

    Left-column keypad keys roll one way and right-column keys the other;
    the middle column alternates by row. Balanced directions keep every
    gyroscope axis centred, which matters once signals are rescaled to
    [-1, 1]. Symbols off the keypad draw a direction from their own stream.
    """
    draw = rng.choice((-1.0, 1.0))
    pos = _KEYPAD_POSITION.get(symbol)
    return float(draw) if pos is None else _keypad_roll(*pos)


def _pattern_angles(symbol: str, rng: np.random.Generator) -> tuple[float, float]:
    """Angles in the zero-sum plane of the primary and secondary axis patterns.

    Keys that roll the same way sit evenly around the circle, so no two of
    them share an axis pattern; the secondary pattern sits half a step
    further round. Other symbols draw both angles.
    """
    draws = rng.uniform(0.0, 2.0 * math.pi, 2)
    pos = _KEYPAD_POSITION.get(symbol)
    if pos is None:
        return float(draws[0]), float(draws[1])
    group = _ROLL_GROUPS[_keypad_roll(*pos)]
    step = 2.0 * math.pi / len(group)
    theta = step * group.index(symbol)
    return theta, theta + step / 2


def _in_plane(theta: float, radius: float) -> np.ndarray:
    return radius * (math.cos(theta) * _PLANE[0] + math.sin(theta) * _PLANE[1])


def _zero_sum(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def _rotation(rng: np.random.Generator, low_deg: float, high_deg: float) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    theta = np.deg2rad(rng.uniform(low_deg, high_deg))
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(theta) * k + (1 - math.cos(theta)) * (k @ k)


def key_template(symbol: str, family: int = 0, duration_ms: float = 100.0) -> KeyTemplate:
    """The template of ``symbol`` in ``family``; independent of the session seed."""
    rng = _key_rng(symbol, 0)
    mean = GYRO_AMPLITUDE * _roll_sign(symbol, rng)
    theta_c, theta_e = _pattern_angles(symbol, rng)
    gyro_c = mean * (1.0 + _in_plane(theta_c, GYRO_SPREAD))
    gyro_e = GYRO_AMPLITUDE * _in_plane(theta_e, GYRO_SPREAD)
    accel_c = ACCEL_AMPLITUDE * rng.uniform(-1.0, 1.0, 3)
    accel_e = ACCEL_AMPLITUDE * rng.uniform(-1.0, 1.0, 3)
    width2 = duration_ms * rng.uniform(0.6, 1.0)
    offset = duration_ms * rng.uniform(-0.3, 0.3)
    if family:
        frng = np.random.Generator(np.random.PCG64([family, 0xFA]))
        rot = _rotation(frng, 15.0, 30.0)
        stretch = 1.0 + frng.uniform(0.1, 0.2)
        # The rotation can move gyroscope energy onto the mean; re-centre so
        # the mean stays a single bump of the base amplitude.
        gyro_c = mean + _zero_sum(rot @ (gyro_c - mean))
        gyro_e = _zero_sum(rot @ gyro_e)
        accel_c = rot @ accel_c
        accel_e = rot @ accel_e
        width2 = min(width2 * stretch, duration_ms)
        offset = offset * stretch
    stretch_a = max(1.0, ACCEL_MIN_SAMPLES * ACCEL_DELAY_MS / duration_ms)
    return KeyTemplate(gyro_c, gyro_e, accel_c, accel_e, duration_ms, width2, offset, stretch_a)


def _sample_times(rng, start: int, end: int, delay: float, jitter: float) -> np.ndarray:
    n = int((end - start) / (delay * (1 - jitter))) + 2
    steps = delay * (1.0 + jitter * rng.uniform(-1.0, 1.0, n)) if jitter else np.full(n, delay)
    t = start + np.concatenate(([0.0], np.cumsum(steps)))
    ts = np.round(t).astype(np.int64)
    # Rounding merges neighbours only when a delay drops below 1 ms.
    return np.unique(ts[ts <= end])


def _render(times, centers, templates, sensor) -> np.ndarray:
    out = np.zeros((times.size, 3))
    for c, tpl in zip(centers, templates):
        half = tpl.support(sensor)
        lo = np.searchsorted(times, c - half, side="left")
        hi = np.searchsorted(times, c + half, side="right")
        out[lo:hi] += tpl.response(sensor, (times[lo:hi] - c).astype(np.float64))
    return out


def generate_session(config: SynthConfig | None = None, session_id: str | None = None) -> RecordingSession:
    """A full recording session with ground-truth labels at template centres."""
    config = config or SynthConfig()
    rng = np.random.Generator(np.random.PCG64([config.seed, config.family]))
    keys = [k for k in config.alphabet for _ in range(config.instances_per_key)]
    order = rng.permutation(len(keys))
    keys = [keys[i] for i in order]
    gaps = config.gap_ms + config.gap_spread_ms * rng.uniform(-1.0, 1.0, len(keys))
    gaps[0] = MARGIN_MS

    start = EPOCH_BASE_MS + int(rng.integers(0, 10_000))
    nominal = start + np.cumsum(gaps)
    end = int(nominal[-1] + MARGIN_MS)
    gyro_t = _sample_times(rng, start, end, GYRO_DELAY_MS, config.jitter)
    accel_t = _sample_times(rng, start, end, ACCEL_DELAY_MS, config.jitter)

    # Centre every keystroke on a gyroscope sample so the gyroscope peak is
    # observed exactly rather than between two samples.
    idx = np.clip(np.searchsorted(gyro_t, nominal), 1, gyro_t.size - 1)
    left_closer = (nominal - gyro_t[idx - 1]) <= (gyro_t[idx] - nominal)
    centers = np.where(left_closer, gyro_t[idx - 1], gyro_t[idx])

    cache = {k: key_template(k, config.family, config.duration_ms) for k in config.alphabet}
    templates = [cache[k] for k in keys]
    gyro = _render(gyro_t, centers, templates, GYROSCOPE)
    accel = _render(accel_t, centers, templates, ACCELEROMETER)
    if not math.isinf(config.snr):
        gyro += rng.normal(0.0, GYRO_AMPLITUDE / config.snr, gyro.shape)
        accel += rng.normal(0.0, ACCEL_AMPLITUDE / config.snr, accel.shape)
    accel[:, 2] += GRAVITY

    labels = tuple(LabelEvent(int(c), k) for c, k in zip(centers, keys))
    sid = session_id or f"synth-f{config.family}-s{config.seed}"
    return RecordingSession(
        sid,
        TriaxialSeries(gyro_t, *gyro.T, GYROSCOPE),
        TriaxialSeries(accel_t, *accel.T, ACCELEROMETER),
        labels,
    )


def generate_pair(config: SynthConfig, second_family: int) -> tuple[RecordingSession, RecordingSession]:
    """Sessions from ``config.family`` and ``second_family``.

    The second session uses an independent seed stream so the two do not
    share noise or key order.
    """
    if second_family == config.family:
        raise ValueError("the two template families must differ")
    a = generate_session(config)
    b = generate_session(replace(config, family=second_family))
    return a, b


def toy_config(seed: int = 0, **kw) -> SynthConfig:
    """Small four-key set: 30 keystrokes each of 1, 3, * and #."""
    return SynthConfig(seed=seed, alphabet=("1", "3", "*", "#"), instances_per_key=30, **kw)
