"""Deliberately naive implementation of the measurement pipeline.

Plain Python loops and ``math.fsum``, no vectorization and no streaming. It
exists to cross-check :mod:`nkpa_twin.correlator`; it is far too slow for
production-size records.
"""

from __future__ import annotations

import math


def translate(samples):
    xs, ps = [], []
    for k in range(len(samples) // 2):
        sign = 1 if k % 2 == 0 else -1
        xs.append(float(samples[2 * k]) * sign)
        ps.append(-float(samples[2 * k + 1]) * sign)
    return xs, ps


def fir_valid(taps, data):
    # np.convolve flips the kernel; taps here are symmetric anyway, but keep it exact
    m = len(taps)
    out = []
    for i in range(len(data) - m + 1):
        out.append(math.fsum(taps[m - 1 - j] * data[i + j] for j in range(m)))
    return out


def power(samples, taps=None):
    x, p = translate(samples)
    if taps is not None:
        x, p = fir_valid(taps, x), fir_valid(taps, p)
    return [x[i] * x[i] + p[i] * p[i] for i in range(len(x))]


def lagged_mean(nx, ny, lag):
    """Mean of ``nx[t + lag] * ny[t]`` over every valid ``t``."""
    n = len(nx)
    terms = [nx[t + lag] * ny[t] for t in range(n) if 0 <= t + lag < n]
    return math.fsum(terms) / len(terms)


def g2_curves(on_a, on_b, off_a, off_b, max_lag, taps=None, estimator="rederived"):
    """Return ``{"ab": [...], "aa": [...], "bb": [...]}`` for lags ``-max_lag..max_lag``."""
    na, nb = power(on_a, taps), power(on_b, taps)
    fa, fb = power(off_a, taps), power(off_b, taps)
    on_ma, on_mb = math.fsum(na) / len(na), math.fsum(nb) / len(nb)
    off_ma, off_mb = math.fsum(fa) / len(fa), math.fsum(fb) / len(fb)
    sa, sb = on_ma - off_ma, on_mb - off_mb
    out = {"ab": [], "aa": [], "bb": []}
    for lag in range(-max_lag, max_lag + 1):
        cross = (
            lagged_mean(na, nb, lag) - on_ma * off_mb - off_ma * on_mb + off_ma * off_mb
        ) / (sa * sb)
        out["ab"].append(cross)
        for key, on_n, off_n, on_m, off_m, sig in (
            ("aa", na, fa, on_ma, off_ma, sa),
            ("bb", nb, fb, on_mb, off_mb, sb),
        ):
            last = on_m if estimator == "paper" else sig
            num = (
                lagged_mean(on_n, on_n, lag)
                - 2.0 * sig * off_m
                - lagged_mean(off_n, off_n, lag)
                - 2.0 * off_m * last
            )
            out[key].append(num / (sig * sig))
    return out
