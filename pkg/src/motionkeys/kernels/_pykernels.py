"""Pure numpy/scipy versions of the compiled kernels.

Same signatures and semantics as ``_ckernels``; used when the extension is
not built or when ``MOTIONKEYS_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def iir_filter(b: np.ndarray, a: np.ndarray, x: np.ndarray) -> np.ndarray:
    return lfilter(b, a, x)


def kalman_smooth(x: np.ndarray, q: float, r: float) -> np.ndarray:
    n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    est = float(x[0])
    var = r
    out[0] = est
    for i in range(1, n):
        var = var + q
        gain = var / (var + r)
        est = est + gain * (float(x[i]) - est)
        var = (1.0 - gain) * var
        out[i] = est
    return out


def median_filter(x: np.ndarray, w: int) -> np.ndarray:
    half = (w - 1) // 2
    padded = np.pad(np.asarray(x, dtype=np.float64), half, mode="edge")
    return np.median(sliding_window_view(padded, w), axis=1)


def lstm_forward(ax, wy, peep, peephole):
    T, four_h = ax.shape
    h = four_h // 4
    gates = np.empty((T, four_h))
    c = np.empty((T, h))
    y = np.empty((T, h))
    cprev = np.zeros(h)
    yprev = None
    for t in range(T):
        pre = ax[t].copy()
        if yprev is not None:
            pre += wy @ yprev
        ai, af, ao, az = pre[:h], pre[h:2 * h], pre[2 * h:3 * h], pre[3 * h:]
        if peephole:
            ai = ai + peep[0] * cprev
            af = af + peep[1] * cprev
        ig = _sigmoid(ai)
        fg = _sigmoid(af)
        zg = np.tanh(az)
        ct = fg * cprev + ig * zg
        if peephole:
            ao = ao + peep[2] * ct
        og = _sigmoid(ao)
        gates[t] = np.concatenate([ig, fg, og, zg])
        c[t] = ct
        y[t] = og * np.tanh(ct)
        cprev = ct
        yprev = y[t]
    return gates, c, y


def lstm_backward(dy_ext, gates, c, wy, peep, peephole):
    T, four_h = gates.shape
    h = four_h // 4
    da = np.zeros((T, four_h))
    dpeep = np.zeros((3, h))
    dh_rec = np.zeros(h)
    dc_next = np.zeros(h)
    for t in range(T - 1, -1, -1):
        dy = dy_ext[t] + dh_rec
        ig, fg, og, zg = (gates[t, k * h:(k + 1) * h] for k in range(4))
        ct = c[t]
        cprev = c[t - 1] if t > 0 else np.zeros(h)
        tc = np.tanh(ct)
        dao = dy * tc * og * (1.0 - og)
        dc = dc_next + dy * og * (1.0 - tc * tc)
        if peephole:
            dc = dc + dao * peep[2]
            dpeep[2] += dao * ct
        dai = dc * zg * ig * (1.0 - ig)
        daf = dc * cprev * fg * (1.0 - fg)
        daz = dc * ig * (1.0 - zg * zg)
        dcprev = dc * fg
        if peephole:
            dcprev = dcprev + dai * peep[0] + daf * peep[1]
            dpeep[0] += dai * cprev
            dpeep[1] += daf * cprev
        dc_next = dcprev
        da[t] = np.concatenate([dai, daf, dao, daz])
        if t > 0:
            dh_rec = wy.T @ da[t]
    return da, dpeep
