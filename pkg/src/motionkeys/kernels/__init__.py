"""Hot loops, compiled when possible.

The Cython extension ``_ckernels`` is used if it was built; otherwise the
numpy implementations in ``_pykernels`` are used. Setting the environment
variable ``MOTIONKEYS_PURE_PYTHON=1`` forces the fallback.

``BACKEND`` names the active implementation (``"cython"`` or ``"python"``).
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

python = _pykernels

try:
    from . import _ckernels as cython
except ImportError:  # extension not built
    cython = None

if cython is not None and not os.environ.get("MOTIONKEYS_PURE_PYTHON"):
    _active = cython
    BACKEND = "cython"
else:
    _active = _pykernels
    BACKEND = "python"


def _c(a) -> np.ndarray:
    return np.ascontiguousarray(a, dtype=np.float64)


def iir_filter(b, a, x) -> np.ndarray:
    """Direct-form II transposed IIR filter from a zero initial state."""
    return _active.iir_filter(_c(b), _c(a), _c(x))


def kalman_smooth(x, q: float, r: float) -> np.ndarray:
    """Scalar random-walk Kalman filter."""
    return _active.kalman_smooth(_c(x), float(q), float(r))


def median_filter(x, w: int) -> np.ndarray:
    """Centred moving median of odd width ``w`` with edge replication."""
    return _active.median_filter(_c(x), int(w))


def lstm_forward(ax, wy, peep, peephole: bool):
    """LSTM forward pass from precomputed input projections ``ax`` (T, 4H)."""
    return _active.lstm_forward(_c(ax), _c(wy), _c(peep), bool(peephole))


def lstm_backward(dy, gates, c, wy, peep, peephole: bool):
    """BPTT for :func:`lstm_forward`; returns gate pre-activation and peephole gradients."""
    return _active.lstm_backward(_c(dy), _c(gates), _c(c), _c(wy), _c(peep), bool(peephole))


__all__ = [
    "BACKEND",
    "cython",
    "python",
    "iir_filter",
    "kalman_smooth",
    "median_filter",
    "lstm_forward",
    "lstm_backward",
]
