"""Numerical integration used by the kernels and by the closed-form checks.

Two tools live here:

* :func:`adaptive_quad`, a globally adaptive Gauss-Kronrod (7/15) integrator
  with mandatory breakpoints. It is the reference route against which the
  closed forms in :mod:`lastpassage.analytic_core` are compared.
* :func:`gauss_legendre_panels`, a fixed composite Gauss-Legendre rule whose
  nodes can be broadcast against arrays of parameters. The semigroup code uses
  it to evaluate thousands of Gaussian-weighted integrals at once.
"""
from __future__ import annotations

import heapq
from functools import lru_cache
from typing import Callable, Iterable, Optional

import numpy as np

# Kronrod 15-point nodes on [-1, 1]; the odd-indexed ones are the Gauss 7 nodes.
_XK = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
])


def _gk15(f, a, b):
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    y = np.asarray(f(centre + half * _XK), dtype=float)
    if y.shape != _XK.shape:
        y = np.broadcast_to(y, _XK.shape)
    if not np.all(np.isfinite(y)):
        raise FloatingPointError(f"integrand is not finite on [{a}, {b}]")
    kronrod = half * np.dot(_WK, y)
    gauss = half * np.dot(_WG, y[1::2])
    return kronrod, abs(kronrod - gauss)


def adaptive_quad(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    breakpoints: Optional[Iterable[float]] = None,
    abs_tol: float = 1e-10,
    rel_tol: float = 0.0,
    max_panels: int = 4000,
) -> tuple[float, float]:
    """Integrate a vectorised ``f`` over ``[a, b]``.

    The interval is first cut at every breakpoint strictly inside it, then the
    panel with the largest error estimate is bisected until the summed estimate
    drops below ``max(abs_tol, rel_tol * |result|)``.

    Returns ``(value, error_estimate)``.
    """
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValueError("adaptive_quad needs finite limits; truncate first")
    if a == b:
        return 0.0, 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    cuts = [a]
    for p in sorted(set(breakpoints or ())):
        if a < p < b:
            cuts.append(float(p))
    cuts.append(b)

    heap = []
    total = 0.0
    err = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, e = _gk15(f, lo, hi)
        heapq.heappush(heap, (-e, lo, hi, val))
        total += val
        err += e
    n_panels = len(heap)
    while err > max(abs_tol, rel_tol * abs(total)) and n_panels < max_panels:
        neg_e, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            heapq.heappush(heap, (neg_e, lo, hi, val))
            break
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        total += v1 + v2 - val
        err += e1 + e2 + neg_e
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        n_panels += 1
    # Re-sum from the panels to shed the running-sum round-off.
    total = float(np.sum([item[3] for item in heap]))
    err = float(np.sum([-item[0] for item in heap]))
    return sign * total, err


@lru_cache(maxsize=32)
def _legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gauss_legendre_panels(lo, hi, panels: int = 8, order: int = 20):
    """Nodes and weights of a composite Gauss-Legendre rule on ``[lo, hi]``.

    ``lo`` and ``hi`` may be arrays of the same shape ``S``. The result has
    shape ``S + (panels * order,)`` so an integrand evaluated on the nodes can be
    reduced with ``np.sum(values * weights, axis=-1)``. Degenerate intervals get
    zero weights.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    x, w = _legendre(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    # Reference nodes on [0, 1] for the whole composite rule.
    left = edges[:-1, None]
    width = (edges[1:] - edges[:-1])[:, None]
    ref_nodes = (left + 0.5 * width * (x[None, :] + 1.0)).ravel()
    ref_weights = (0.5 * width * w[None, :]).ravel()
    span = (hi - lo)[..., None]
    nodes = lo[..., None] + span * ref_nodes
    weights = np.where(span > 0.0, span, 0.0) * ref_weights
    return nodes, weights
