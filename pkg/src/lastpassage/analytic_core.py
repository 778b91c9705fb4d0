"""Closed-form laws and integrals for Brownian motion with drift stopped at its
last passage time.

Throughout, ``B^lam_t = B_t + lam*t`` with ``lam > 0`` and ``sigma`` is the last
time ``B^lam`` visits the level ``z > 0``. Every function here is a pure function
of ``(lam, z)`` and scalar or array arguments; numpy broadcasting applies unless
a docstring says otherwise.

The recurring product ``exp(a) * Phi(-b)`` overflows in naive form once
``a`` exceeds ~709 even though the product is tiny, so all such terms go through
:func:`scaled_gauss_tail`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ModelParams:
    """Drift ``lam`` and level ``z`` of the stopped process.

    ``lambda`` is a reserved word in Python, hence ``lam``.
    """

    lam: float
    z: float

    def __post_init__(self):
        for name in ("lam", "z"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value)):
                raise DomainError(f"{name} must be a finite real, got {value!r}")
            if value <= 0:
                raise DomainError(f"{name} must be positive, got {value!r}")
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "z", float(self.z))

    @classmethod
    def for_kernels(cls, lam: float, z: float) -> "ModelParams":
        """Parameters for kernel, semigroup and PDE work, where any real ``z`` is allowed.

        The positivity of ``z`` only matters for laws that start the process at
        0 below the level; the kernels are written for an arbitrary start.
        """
        if not (math.isfinite(lam) and lam > 0):
            raise DomainError(f"lam must be positive, got {lam!r}")
        if not math.isfinite(z):
            raise DomainError(f"z must be finite, got {z!r}")
        obj = object.__new__(cls)
        object.__setattr__(obj, "lam", float(lam))
        object.__setattr__(obj, "z", float(z))
        return obj


@dataclass(frozen=True)
class GaussParams:
    """Variance ``t``, evaluation point ``x`` and mean ``m`` of a normal density."""

    t: float
    x: float
    m: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise DomainError(f"variance t must be positive, got {self.t!r}")


# ---------------------------------------------------------------------------
# scalar primitives

def _density(t, x, m):
    t = np.asarray(t, dtype=float)
    return np.exp(-((x - m) ** 2) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def gauss_pdf(g: GaussParams) -> float:
    """Normal density with variance ``g.t`` and mean ``g.m`` at ``g.x``."""
    return float(_density(g.t, g.x, g.m))


def gauss_density(t, x, m=0.0):
    """Array version of :func:`gauss_pdf`; ``t`` must be positive."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("variance must be positive")
    return _density(t, x, m)


def normal_cdf(x):
    """Standard normal distribution function (saturates cleanly at +-inf)."""
    out = special.ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def scaled_gauss_tail(a, b):
    """``exp(a) * Phi(-b)`` without intermediate overflow.

    For ``b >= 0`` the tail is written through the scaled complementary error
    function, ``Phi(-b) = erfcx(b/sqrt2) * exp(-b^2/2) / 2``, so the exponentials
    are combined before evaluation. For ``b < 0``, ``Phi(-b)`` lies in
    ``[1/2, 1]`` and the plain product is already safe.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape, dtype=float)
    pos = b >= 0
    with np.errstate(over="ignore", invalid="ignore"):
        bp = b[pos]
        out[pos] = 0.5 * np.exp(a[pos] - 0.5 * bp * bp) * special.erfcx(bp / _SQRT2)
        # erfcx overflows to inf only for b -> +inf where the answer is 0
        out[pos & ~np.isfinite(out)] = 0.0
        out[~pos] = np.exp(a[~pos]) * special.ndtr(-b[~pos])
    return float(out) if out.ndim == 0 else out


def alpha(params: ModelParams, x):
    """``|z - x| - (z - x)``: zero at and below the level, ``2(x - z)`` above."""
    d = params.z - np.asarray(x, dtype=float)
    out = np.abs(d) - d
    return float(out) if np.ndim(out) == 0 else out


def gamma(params: ModelParams, x):
    """``|z - x| + (z - x)``: ``2(z - x)`` below the level, zero at and above."""
    d = params.z - np.asarray(x, dtype=float)
    out = np.abs(d) + d
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# law of the last passage time

def sigma_pdf(params: ModelParams, r):
    """Density of the last passage time, ``lam * p(r, z, lam*r)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("sigma_pdf is defined for r > 0")
    out = params.lam * _density(r, params.z, params.lam * r)
    return float(out) if out.ndim == 0 else out


def _cdf_and_survival(params, t):
    lam, z = params.lam, params.z
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rt = np.sqrt(t)
        zr = np.where(t > 0, z / np.where(t > 0, rt, 1.0), np.inf)
        lr = lam * rt
        reflected = scaled_gauss_tail(2.0 * lam * z, lr + zr)
        cdf = special.ndtr(lr - zr) - reflected
        surv = special.ndtr(zr - lr) + reflected
    cdf = np.where(t > 0, cdf, 0.0)
    surv = np.where(t > 0, surv, 1.0)
    return np.clip(cdf, 0.0, 1.0), np.clip(surv, 0.0, 1.0)


def sigma_cdf(params: ModelParams, t):
    """``P(sigma <= t) = Phi(lam*sqrt(t) - z/sqrt(t)) - e^{2 lam z} Phi(-lam*sqrt(t) - z/sqrt(t))``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("sigma_cdf needs t >= 0")
    cdf, _ = _cdf_and_survival(params, t)
    return float(cdf) if cdf.ndim == 0 else cdf


def sigma_survival(params: ModelParams, t):
    """``P(sigma > t)``, evaluated directly rather than as ``1 - cdf``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("sigma_survival needs t >= 0")
    _, surv = _cdf_and_survival(params, t)
    return float(surv) if surv.ndim == 0 else surv


def sigma_mean(params: ModelParams) -> float:
    """Mean of the last passage time, ``1/lam^2 + z/lam``."""
    return 1.0 / params.lam**2 + params.z / params.lam


def sigma_quantile(params: ModelParams, u, tol: float = 1e-12, max_iter: int = 200):
    """Vectorised inverse of :func:`sigma_cdf`.

    Brackets each root in ``[1e-12, T]`` (doubling ``T``), bisects until the
    bracket is narrower than ``1e-3`` relative to its upper end, then runs Newton
    with the density as derivative. A Newton step leaving the bracket falls back
    to bisection, so convergence is monotone-safe. Newton stops once the
    residual is below ``tol`` relative to ``min(u, 1 - u)`` (the survival function
    is used for ``u > 1/2``) or the bracket has collapsed to a few ulps.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)) or not np.all(np.isfinite(u)):
        raise DomainError("quantile level must lie in (0, 1)")
    shape = u.shape
    u = u.ravel()
    lo = np.full_like(u, 1e-12)
    hi = np.ones_like(u)
    # grow the upper end
    for _ in range(200):
        short = sigma_cdf(params, hi) <= u
        if not short.any():
            break
        hi[short] *= 2.0
    below = sigma_cdf(params, lo) >= u
    # relative-width bisection
    for _ in range(200):
        wide = (hi - lo) > 1e-3 * hi
        if not wide.any():
            break
        mid = 0.5 * (lo[wide] + hi[wide])
        f_mid = sigma_cdf(params, mid)
        go_up = f_mid < u[wide]
        lo_w, hi_w = lo[wide], hi[wide]
        lo_w[go_up] = mid[go_up]
        hi_w[~go_up] = mid[~go_up]
        lo[wide], hi[wide] = lo_w, hi_w
    t = 0.5 * (lo + hi)
    # residuals are taken on the smaller tail so the stopping rule is relative there
    upper = u > 0.5
    active = np.ones_like(u, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        ta = t[active]
        ua = u[active]
        up = upper[active]
        cdf, surv = _cdf_and_survival(params, ta)
        resid = np.where(up, (1.0 - ua) - surv, cdf - ua)
        done = np.abs(resid) <= tol * np.minimum(ua, 1.0 - ua)
        lo_a, hi_a = lo[active], hi[active]
        lo_a = np.where(resid < 0, ta, lo_a)
        hi_a = np.where(resid > 0, ta, hi_a)
        dens = params.lam * _density(ta, params.z, params.lam * ta)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = ta - resid / dens
        outside = ~np.isfinite(step) | (step <= lo_a) | (step >= hi_a)
        step = np.where(outside, 0.5 * (lo_a + hi_a), step)
        stalled = (hi_a - lo_a) <= 4 * np.finfo(float).eps * hi_a
        new_t = np.where(done, ta, step)
        t[active] = new_t
        lo[active], hi[active] = lo_a, hi_a
        idx = np.flatnonzero(active)
        active[idx[done | stalled]] = False
    t = np.where(below, lo, t)
    return t.reshape(shape)


def sigma_cdf_inverse(params: ModelParams, u: float) -> float:
    """Scalar inverse of :func:`sigma_cdf`; ``|F(t) - u| <= 1e-12 min(u, 1 - u)`` where representable."""
    if not (0.0 < u < 1.0):
        raise DomainError(f"u must lie in (0, 1), got {u!r}")
    return float(sigma_quantile(params, np.array([u]))[0])


# ---------------------------------------------------------------------------
# integrals of the Gaussian kernel in time

def _check_times(s, t):
    if np.any(np.asarray(t) <= np.asarray(s)) or np.any(np.asarray(s) < 0):
        raise DomainError("need 0 <= s < t")


def int_p_dr(params: ModelParams, s, t, x):
    """Closed form of ``int_s^t p(r - s, z - x, lam (r - s)) dr``.

    ``t = inf`` is allowed and returns ``exp(-lam*alpha(z, x)) / lam``.
    """
    _check_times(s, t)
    lam = params.lam
    tau = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    d = np.abs(params.z - np.asarray(x, dtype=float))
    a_ = alpha(params, x)
    g_ = gamma(params, x)
    finite = np.isfinite(tau)
    tau_f = np.where(finite, tau, 1.0)
    rt = np.sqrt(tau_f)
    head = np.exp(-lam * a_) * special.ndtr(lam * rt - d / rt)
    tail = scaled_gauss_tail(lam * g_, lam * rt + d / rt)
    out = np.where(finite, (head - tail) / lam, np.exp(-lam * a_) / lam)
    return float(out) if np.ndim(out) == 0 else out


def int_rp_dr(params: ModelParams, s, t, x):
    """Closed form of ``int_s^t (r - s) p(r - s, z - x, lam (r - s)) dr``."""
    _check_times(s, t)
    lam = params.lam
    tau = np.asarray(t, dtype=float) - np.asarray(s, dtype=float)
    d = np.abs(params.z - np.asarray(x, dtype=float))
    a_ = alpha(params, x)
    g_ = gamma(params, x)
    finite = np.isfinite(tau)
    tau_f = np.where(finite, tau, 1.0)
    rt = np.sqrt(tau_f)
    head = np.exp(-lam * a_) * special.ndtr(lam * rt - d / rt)
    tail = scaled_gauss_tail(lam * g_, lam * rt + d / rt)
    dens = _density(tau_f, params.z - np.asarray(x, dtype=float), lam * tau_f)
    value = (head - tail) / lam**3 + d * (head + tail) / lam**2 - 2.0 * tau_f * dens / lam**2
    limit = (1.0 / lam**3 + d / lam**2) * np.exp(-lam * a_)
    out = np.where(finite, value, limit)
    return float(out) if np.ndim(out) == 0 else out


def _int_phi(lam, t, d):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("need t > 0")
    d = np.asarray(d, dtype=float)
    ad = np.abs(d)
    a_ = ad - d
    g_ = ad + d
    rt = np.sqrt(t)
    arg = lam * rt + d / rt
    first = np.exp(-lam * g_) * (-lam * a_ - 1.0) * special.ndtr(lam * rt - ad / rt)
    # e^{lam a}(Phi(lam rt + |d|/rt) - 1) = -e^{lam a} Phi(-lam rt - |d|/rt)
    second = -(lam * g_ - 1.0) * scaled_gauss_tail(lam * a_, lam * rt + ad / rt)
    out = (first + second) / (2.0 * lam**2) + t * special.ndtr(arg) \
        + rt / lam * np.exp(-0.5 * arg * arg) / SQRT_2PI
    return float(out) if np.ndim(out) == 0 else out


def int_phi_plus(params: ModelParams, t, d):
    """Closed form of ``int_0^t Phi(lam sqrt(u) + d/sqrt(u)) du``; ``d`` plays ``z - xi``."""
    return _int_phi(params.lam, t, d)


def int_phi_minus(params: ModelParams, t, d):
    """Closed form of ``int_0^t Phi(lam sqrt(u) - d/sqrt(u)) du``.

    Swapping the sign of ``d`` exchanges the roles of alpha and gamma, which is
    all that separates this integral from :func:`int_phi_plus`.
    """
    return _int_phi(params.lam, t, -np.asarray(d, dtype=float))


def gaussian_primitive(a, b, r):
    """An antiderivative in ``r > 0`` of ``exp(-a^2 r^2 - b^2 / r^2)``.

    Uses the classical form
    ``sqrt(pi)/(2|a|) [e^{2|ab|} Phi(sqrt2 |a| r + sqrt2 |b|/r) + e^{-2|ab|} Phi(sqrt2 |a| r - sqrt2 |b|/r)]``.
    At ``r = 0`` the right limit is returned.
    """
    a = np.abs(np.asarray(a, dtype=float))
    if np.any(a == 0):
        raise DomainError("gaussian_primitive needs a != 0")
    b = np.abs(np.asarray(b, dtype=float))
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(b == 0, 0.0, b / r)
    ratio = np.where((r == 0) & (b > 0), np.inf, ratio)
    u_plus = _SQRT2 * (a * r + ratio)
    u_minus = _SQRT2 * (a * r - ratio)
    # e^{c} Phi(u) = scaled_gauss_tail(c, -u)
    term = scaled_gauss_tail(2.0 * a * b, -u_plus) + scaled_gauss_tail(-2.0 * a * b, -u_minus)
    out = math.sqrt(math.pi) / (2.0 * a) * term
    return float(out) if np.ndim(out) == 0 else out


def nonfeller_gap(params: ModelParams, t):
    """Limit of ``P_t f(x)`` as ``x -> z`` for ``f(y) = exp(-lam |y - z|)``.

    Equals ``2 Phi(lam sqrt(t)) - 1 + 2 exp(1.5 lam^2 t) Phi(-2 lam sqrt(t))``;
    strictly below ``f(z) = 1`` for every ``t > 0``.
    """
    lam = params.lam
    t = np.asarray(t, dtype=float)
    rt = np.sqrt(t)
    out = 2.0 * special.ndtr(lam * rt) - 1.0 + 2.0 * scaled_gauss_tail(1.5 * lam**2 * t, 2.0 * lam * rt)
    return float(out) if out.ndim == 0 else out
