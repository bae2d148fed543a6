# cython: language_level=3
"""Compiled inner loops.

Every function here has a numpy twin in ``_pykernels`` with the same
signature; ``motionkeys.kernels`` picks one at import.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport tanh
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()


cdef inline double _sigmoid(double x) noexcept nogil:
    return 0.5 * (1.0 + tanh(0.5 * x))


def iir_filter(const double[::1] b, const double[::1] a, const double[::1] x):
    """Direct-form II transposed IIR filter with zero initial state.

    ``a[0]`` must be 1.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t order = b.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef double xi, yi
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef double[::1] z = np.zeros(order + 1, dtype=np.float64)
    with nogil:
        for i in range(n):
            xi = x[i]
            yi = b[0] * xi + z[0]
            for k in range(order - 1):
                z[k] = b[k + 1] * xi + z[k + 1] - a[k + 1] * yi
            if order > 0:
                z[order - 1] = b[order] * xi - a[order] * yi
            y[i] = yi
    return out


def kalman_smooth(const double[::1] x, double q, double r):
    """Scalar random-walk Kalman filter; see ``preprocess.kalman_smooth``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double est, var, gain
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    if n == 0:
        return out
    with nogil:
        est = x[0]
        var = r
        y[0] = est
        for i in range(1, n):
            var = var + q
            gain = var / (var + r)
            est = est + gain * (x[i] - est)
            var = (1.0 - gain) * var
            y[i] = est
    return out


def median_filter(const double[::1] x, Py_ssize_t w):
    """Moving median over a window of odd size ``w`` with edge replication."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t half = (w - 1) // 2
    cdef Py_ssize_t i, j, k, src
    cdef double v
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef double[::1] buf = np.empty(w, dtype=np.float64)
    with nogil:
        for i in range(n):
            # insertion sort of the (replicated) window
            for j in range(w):
                src = i - half + j
                if src < 0:
                    src = 0
                elif src >= n:
                    src = n - 1
                v = x[src]
                k = j
                while k > 0 and buf[k - 1] > v:
                    buf[k] = buf[k - 1]
                    k -= 1
                buf[k] = v
            y[i] = buf[half]
    return out


def lstm_forward(const double[:, ::1] ax, const double[:, ::1] wy,
                 const double[:, ::1] peep, bint peephole):
    """Run the LSTM recurrence over a sequence.

    Args:
        ax: (T, 4H) input projections, gate order [i, f, o, z].
        wy: (4H, H) recurrent weights.
        peep: (3, H) diagonal peephole weights for [i, f, o]; ignored unless
            ``peephole``.

    Returns:
        gates (T, 4H) post-activation, cell states (T, H), outputs (T, H).
    """
    cdef Py_ssize_t T = ax.shape[0]
    cdef int four_h = <int>ax.shape[1]
    cdef int h = four_h // 4
    cdef Py_ssize_t t, j
    cdef double cprev, ai, af, ao, az, ig, fg, og, zg, cj
    cdef double one = 1.0
    cdef int inc = 1
    cdef char trans = b'T'

    gates_arr = np.empty((T, four_h), dtype=np.float64)
    c_arr = np.empty((T, h), dtype=np.float64)
    y_arr = np.empty((T, h), dtype=np.float64)
    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] c = c_arr
    cdef double[:, ::1] y = y_arr
    cdef double[::1] pre = np.empty(four_h, dtype=np.float64)

    with nogil:
        for t in range(T):
            memcpy(&pre[0], &ax[t, 0], four_h * sizeof(double))
            if t > 0:
                # pre += wy @ y[t-1]; row-major wy is column-major wy.T
                dgemv(&trans, &h, &four_h, &one, <double*>&wy[0, 0], &h,
                      &y[t - 1, 0], &inc, &one, &pre[0], &inc)
            for j in range(h):
                cprev = c[t - 1, j] if t > 0 else 0.0
                ai = pre[j]
                af = pre[h + j]
                ao = pre[2 * h + j]
                az = pre[3 * h + j]
                if peephole:
                    ai = ai + peep[0, j] * cprev
                    af = af + peep[1, j] * cprev
                ig = _sigmoid(ai)
                fg = _sigmoid(af)
                zg = tanh(az)
                cj = fg * cprev + ig * zg
                if peephole:
                    ao = ao + peep[2, j] * cj
                og = _sigmoid(ao)
                gates[t, j] = ig
                gates[t, h + j] = fg
                gates[t, 2 * h + j] = og
                gates[t, 3 * h + j] = zg
                c[t, j] = cj
                y[t, j] = og * tanh(cj)
    return gates_arr, c_arr, y_arr


def lstm_backward(const double[:, ::1] dy_ext, const double[:, ::1] gates,
                  const double[:, ::1] c, const double[:, ::1] wy,
                  const double[:, ::1] peep, bint peephole):
    """Backpropagate through time.

    Args:
        dy_ext: (T, H) loss gradient w.r.t. each output arriving from the
            layer above.
        gates, c: as returned by ``lstm_forward``.

    Returns:
        dA (T, 4H) gradients w.r.t. gate pre-activations and dpeep (3, H).
    """
    cdef Py_ssize_t T = gates.shape[0]
    cdef int four_h = <int>gates.shape[1]
    cdef int h = four_h // 4
    cdef Py_ssize_t t, j
    cdef double dyj, ig, fg, og, zg, cj, cprev, tc, dao, dc, dai, daf, daz, dcprev
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef int inc = 1
    cdef char trans = b'N'

    da_arr = np.zeros((T, four_h), dtype=np.float64)
    dpeep_arr = np.zeros((3, h), dtype=np.float64)
    cdef double[:, ::1] da = da_arr
    cdef double[:, ::1] dpeep = dpeep_arr
    cdef double[::1] dh_rec = np.zeros(h, dtype=np.float64)
    cdef double[::1] dc_next = np.zeros(h, dtype=np.float64)

    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(h):
                dyj = dy_ext[t, j] + dh_rec[j]
                ig = gates[t, j]
                fg = gates[t, h + j]
                og = gates[t, 2 * h + j]
                zg = gates[t, 3 * h + j]
                cj = c[t, j]
                cprev = c[t - 1, j] if t > 0 else 0.0
                tc = tanh(cj)
                dao = dyj * tc * og * (1.0 - og)
                dc = dc_next[j] + dyj * og * (1.0 - tc * tc)
                if peephole:
                    dc = dc + dao * peep[2, j]
                    dpeep[2, j] += dao * cj
                dai = dc * zg * ig * (1.0 - ig)
                daf = dc * cprev * fg * (1.0 - fg)
                daz = dc * ig * (1.0 - zg * zg)
                dcprev = dc * fg
                if peephole:
                    dcprev = dcprev + dai * peep[0, j] + daf * peep[1, j]
                    dpeep[0, j] += dai * cprev
                    dpeep[1, j] += daf * cprev
                dc_next[j] = dcprev
                da[t, j] = dai
                da[t, h + j] = daf
                da[t, 2 * h + j] = dao
                da[t, 3 * h + j] = daz
            if t > 0:
                # dh_rec = wy.T @ da[t]
                dgemv(&trans, &h, &four_h, &one, <double*>&wy[0, 0], &h,
                      &da[t, 0], &inc, &zero, &dh_rec[0], &inc)
    return da_arr, dpeep_arr
