"""Rprop- (resilient propagation without weight backtracking)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ETA_PLUS = 1.2
ETA_MINUS = 0.5
DELTA_INIT = 0.1
DELTA_MAX = 50.0
DELTA_MIN = 1e-6


@dataclass
class RpropMinus:
    """Per-weight step sizes driven by gradient sign agreement.

    For each weight: if the gradient sign matches the stored previous sign
    the step grows by ``eta_plus`` (capped at ``delta_max``); if it flips the
    step shrinks by ``eta_minus`` (floored at ``delta_min``) and the stored
    sign is reset to 0 so the next step is neither grown nor shrunk. The
    weight then moves by ``-sign(grad) * step``. A zero gradient leaves the
    weight and its step untouched.
    """

    eta_plus: float = ETA_PLUS
    eta_minus: float = ETA_MINUS
    delta_init: float = DELTA_INIT
    delta_max: float = DELTA_MAX
    delta_min: float = DELTA_MIN
    steps: dict[str, np.ndarray] = field(default_factory=dict)
    prev_sign: dict[str, np.ndarray] = field(default_factory=dict)

    def _state(self, name, shape):
        if name not in self.steps:
            self.steps[name] = np.full(shape, self.delta_init)
            self.prev_sign[name] = np.zeros(shape)
        return self.steps[name], self.prev_sign[name]

    def update(self, weights: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Apply one update to ``weights`` in place."""
        for name, g in grads.items():
            step, prev = self._state(name, g.shape)
            sign = np.sign(g)
            agree = sign * prev
            grow = agree > 0
            shrink = agree < 0
            step[grow] = np.minimum(step[grow] * self.eta_plus, self.delta_max)
            step[shrink] = np.maximum(step[shrink] * self.eta_minus, self.delta_min)
            weights[name] -= sign * step
            sign[shrink] = 0.0
            self.prev_sign[name] = sign
