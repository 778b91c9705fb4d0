"""Loops over path nodes that are too slow as numpy array expressions.

Each function has a plain-numpy reference in the test suite. Random numbers
are always drawn by the caller from a numpy Generator, so compiled and
uncompiled runs produce the same bits.
"""
from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def band_fraction(a, b, lo, hi):
    """Fraction of the straight segment ``a -> b`` strictly inside ``(lo, hi)``."""
    low = min(a, b)
    high = max(a, b)
    if high == low:
        return 1.0 if lo < a < hi else 0.0
    inside = min(high, hi) - max(low, lo)
    return inside / (high - low) if inside > 0.0 else 0.0


@njit(cache=True)
def band_table(t, x, level, eps, stops):
    """Band occupation ``|{s <= stop: |x(s) - level| < eps}|`` of the interpolant.

    ``stops`` must be sorted ascending; the result has shape
    ``(eps.size, stops.size)``. Stops beyond the last node get the full total.
    """
    n = t.size
    m = eps.size
    out = np.zeros((m, stops.size))
    acc = np.zeros(m)
    s = 0
    for i in range(n - 1):
        t0 = t[i]
        t1 = t[i + 1]
        while s < stops.size and stops[s] <= t1:
            part = stops[s] - t0
            if part > 0.0:
                end = x[i] + (x[i + 1] - x[i]) * (part / (t1 - t0))
                for e in range(m):
                    out[e, s] = acc[e] + part * band_fraction(x[i], end, level - eps[e], level + eps[e])
            else:
                for e in range(m):
                    out[e, s] = acc[e]
            s += 1
        if s == stops.size:
            return out
        d = t1 - t0
        for e in range(m):
            acc[e] += d * band_fraction(x[i], x[i + 1], level - eps[e], level + eps[e])
    while s < stops.size:
        for e in range(m):
            out[e, s] = acc[e]
        s += 1
    return out


@njit(cache=True)
def bridge_fill(t, x, pick, counts, pos, normals, out_t, out_x):
    """Write Brownian-bridge interior points for the steps listed in ``pick``.

    Step ``pick[q]`` is cut into ``counts[q]`` equal pieces; its interior
    points go to ``out_*[pos[i] + 1 : pos[i] + counts[q]]``. ``normals``
    supplies ``counts[q]`` standard normals per step, consumed in order.
    """
    j = 0
    for q in range(pick.size):
        i = pick[q]
        k = counts[q]
        span = t[i + 1] - t[i]
        sd = math.sqrt(span / k)
        base = pos[i]
        acc = 0.0
        for r in range(1, k + 1):
            acc += sd * normals[j + r - 1]
            if r < k:
                out_x[base + r] = acc
        a = x[i]
        b = x[i + 1]
        for r in range(1, k):
            f = r / k
            out_x[base + r] = a + (b - a) * f + out_x[base + r] - f * acc
            out_t[base + r] = t[i] + span * f
        j += k
