"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--n 100000]

Prints one line per kernel with the best-of-N wall time for each backend,
the speed-up, and the largest absolute difference between their outputs.
"""

from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from motionkeys import kernels
from motionkeys.preprocess import LOWPASS, butterworth_coefficients


def cases(n: int, rng: np.random.Generator):
    x = np.cumsum(rng.normal(size=n))
    b, a = butterworth_coefficients(LOWPASS, 8.0, 100.0, 2)
    steps, hidden = 50, 128
    ax = rng.normal(scale=0.3, size=(steps, 4 * hidden))
    wy = rng.uniform(-0.1, 0.1, size=(4 * hidden, hidden))
    peep = rng.uniform(-0.1, 0.1, size=(3, hidden))
    gates, c, _ = kernels.python.lstm_forward(ax, wy, peep, True)
    dy = rng.normal(size=(steps, hidden))
    return {
        "iir_filter": lambda k: k.iir_filter(b, a, x),
        "kalman_smooth": lambda k: k.kalman_smooth(x, 1e-3, 1e-1),
        "median_filter(w=9)": lambda k: k.median_filter(x, 9),
        "lstm_forward(50x128)": lambda k: k.lstm_forward(ax, wy, peep, True),
        "lstm_backward(50x128)": lambda k: k.lstm_backward(dy, gates, c, wy, peep, True),
    }


def _flat(out) -> np.ndarray:
    if isinstance(out, tuple):
        return np.concatenate([np.ravel(o) for o in out])
    return np.ravel(out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--n", type=int, default=100_000, help="signal length for the DSP kernels")
    args = parser.parse_args(argv)

    if kernels.cython is None:
        print("compiled extension not built; nothing to compare", file=sys.stderr)
        return 1
    backends = {"python": kernels.python, "cython": kernels.cython}
    print(f"{'kernel':<24}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}{'max |diff|':>14}")
    for name, fn in cases(args.n, np.random.default_rng(0)).items():
        best = {}
        for label, mod in backends.items():
            number = 1 if label == "python" and "median" in name else 3
            t = timeit.repeat(lambda: fn(mod), number=number, repeat=args.repeat)
            best[label] = min(t) / number * 1e3
        diff = np.max(np.abs(_flat(fn(kernels.python)) - _flat(fn(kernels.cython))))
        speed = best["python"] / best["cython"]
        print(f"{name:<24}{best['python']:>12.3f}{best['cython']:>12.3f}{speed:>9.1f}x{diff:>14.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
