"""Transition kernel, augmented semigroup, conditional laws and generator.

Notation follows :mod:`lastpassage.analytic_core`: ``xi`` is the drifted
Brownian motion stopped at its last passage time ``sigma`` of level ``z`` and
``zeta = (1{t < sigma}, xi_t)`` is the augmented process on ``{0,1} x R``.

Kernel integrals
----------------
Away from ``z`` the transition law of ``xi`` over a time ``t`` from ``x`` is an
atom at ``z`` plus the density

    p(t, y - x, lam t) * exp(-lam alpha(z, y)) * exp(lam alpha(z, x)).

Below the level this is the Gaussian ``N(x + lam t, t)``; above the level the
exponential tilt turns it into ``N(x - lam t, t)`` times a constant. Each half
line is therefore integrated as a Gaussian-weighted integral over a window of
``_WINDOW`` standard deviations around its own centre, cut at ``z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from . import analytic_core as ac
from .analytic_core import ModelParams, scaled_gauss_tail
from .errors import DomainError, EvaluationError, UsageError
from .quadrature import gauss_legendre_panels
from .reports import TestReport, Verdict

_WINDOW = 9.0          # half-width of the Gaussian window, in standard deviations
_ORDER = 20            # Gauss-Legendre nodes per panel
_FD_STEP = 1e-5        # fallback finite-difference step for derivatives
DOMAIN_TOL = 1e-10     # tolerance for the generator domain conditions at z


@dataclass(frozen=True)
class StatePoint:
    """A point ``(y1, y2)`` of the augmented state space; ``y1 = 1`` means alive."""

    y1: int
    y2: float

    def __post_init__(self):
        if self.y1 not in (0, 1):
            raise DomainError(f"y1 must be 0 or 1, got {self.y1!r}")
        if not math.isfinite(self.y2):
            raise DomainError("y2 must be finite")


@dataclass
class TestFunction:
    """A function on ``{0,1} x R`` with optional y2-derivatives of its alive branch.

    ``h(y1, y2)`` must accept numpy arrays for ``y2``. ``dh`` and ``d2h`` act on
    ``y2`` only and describe ``h(1, .)``. When they are missing, central finite
    differences with step ``1e-5`` are used.
    """

    __test__ = False

    h: Callable[[int, np.ndarray], np.ndarray]
    dh: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    decays: bool = True
    label: str = "h"

    def __call__(self, y1, y2):
        return np.asarray(self.h(y1, np.asarray(y2, dtype=float)), dtype=float)

    def alive(self, y2):
        return self(1, y2)

    def absorbed(self, y2):
        return self(0, y2)

    def first(self, y2):
        y2 = np.asarray(y2, dtype=float)
        if self.dh is not None:
            return np.asarray(self.dh(y2), dtype=float)
        return (self.alive(y2 + _FD_STEP) - self.alive(y2 - _FD_STEP)) / (2 * _FD_STEP)

    def second(self, y2):
        y2 = np.asarray(y2, dtype=float)
        if self.d2h is not None:
            return np.asarray(self.d2h(y2), dtype=float)
        return (self.alive(y2 + _FD_STEP) - 2 * self.alive(y2) + self.alive(y2 - _FD_STEP)) / _FD_STEP**2

    def domain_defect(self, z: float) -> float:
        """Largest violation among ``h(0,z)``, ``h(1,z)`` and ``dh(1,z)``."""
        return float(max(abs(self.absorbed(z)), abs(self.alive(z)), abs(self.first(z))))

    def in_domain(self, z: float, tol: float = DOMAIN_TOL) -> bool:
        return self.domain_defect(z) <= tol


def canonical_test_function(params: ModelParams) -> TestFunction:
    """``h(0, .) = 0`` and ``h(1, y) = u^2 exp(-u^2)`` with ``u = y - z``.

    This ``h`` satisfies the generator domain conditions at ``z``.
    """
    z = params.z

    def h(y1, y2):
        u = np.asarray(y2, dtype=float) - z
        return np.where(np.asarray(y1) == 1, u * u * np.exp(-u * u), 0.0 * u)

    def dh(y2):
        u = y2 - z
        return 2 * u * (1 - u * u) * np.exp(-u * u)

    def d2h(y2):
        u = y2 - z
        return (2 - 10 * u * u + 4 * u**4) * np.exp(-u * u)

    return TestFunction(h, dh, d2h, decays=True, label="canonical")


def constant_test_function(c: float) -> TestFunction:
    return TestFunction(
        lambda y1, y2: np.full(np.shape(y2), float(c)),
        lambda y2: np.zeros(np.shape(y2)),
        lambda y2: np.zeros(np.shape(y2)),
        decays=False,
        label=f"constant({c})",
    )


# ---------------------------------------------------------------------------
# kernel building blocks

def atom_weight(params: ModelParams, t, x):
    """Mass the kernel started at ``x`` (alive) puts on ``{z}`` after time ``t``.

    ``Phi(lam sqrt(t) - d/sqrt(t)) - exp(2 lam d) Phi(-lam sqrt(t) - d/sqrt(t))``
    with ``d = |z - x|``; this is ``P(sigma <= t)`` for the process restarted at
    ``x``.
    """
    lam = params.lam
    t = np.asarray(t, dtype=float)
    d = np.abs(params.z - np.asarray(x, dtype=float))
    rt = np.sqrt(t)
    out = special.ndtr(lam * rt - d / rt) - scaled_gauss_tail(2 * lam * d, lam * rt + d / rt)
    return np.clip(out, 0.0, 1.0)


def _panel_count(width):
    return int(np.clip(np.ceil(np.max(width) / 0.75), 8, 96))


def _continuous_part(params: ModelParams, t, x, f):
    """``int f(y) exp(lam a(x) - lam a(y)) p(t, y - x, lam t) dy`` over ``y != z``.

    ``t`` and ``x`` broadcast together; ``f`` receives an array of nodes with one
    extra trailing axis.
    """
    lam, z = params.lam, params.z
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    rt = np.sqrt(t)
    a_x = np.abs(z - x) - (z - x)
    log_norm = -0.5 * np.log(2 * np.pi * t)
    total = np.zeros(t.shape)

    # below z: Gaussian centred at x + lam t, prefactor exp(lam a(x))
    # above z: Gaussian centred at x - lam t, prefactor exp(lam a(x) - 2 lam (x - z))
    # a large prefactor lifts far Gaussian tails, so each window is widened to
    # where prefactor times Gaussian drops below the plain window's cut
    log_lo = lam * a_x
    log_up = lam * a_x - 2 * lam * (x - z)
    m_lo = x + lam * t
    k_lo = np.sqrt(_WINDOW**2 + 2 * np.maximum(log_lo, 0.0)) * rt
    lo = m_lo - k_lo
    hi = np.maximum(np.minimum(z, m_lo + k_lo), lo)
    m_up = x - lam * t
    k_up = np.sqrt(_WINDOW**2 + 2 * np.maximum(log_up, 0.0)) * rt
    lo2 = np.maximum(z, m_up - k_up)
    hi2 = np.maximum(m_up + k_up, lo2)

    for a_, b_, centre, log_pref in (
        (lo, hi, m_lo, log_lo),
        (lo2, hi2, m_up, log_up),
    ):
        panels = _panel_count((b_ - a_) / 1.0)
        nodes, weights = gauss_legendre_panels(a_, b_, panels=panels, order=_ORDER)
        expo = (log_pref + log_norm)[..., None] - (nodes - centre[..., None]) ** 2 / (2 * t[..., None])
        vals = np.asarray(f(nodes), dtype=float)
        vals = np.broadcast_to(vals, nodes.shape)
        if not np.all(np.isfinite(vals[weights > 0])):
            raise EvaluationError("integrand is not finite on the quadrature grid")
        total = total + np.sum(np.exp(expo) * vals * weights, axis=-1)
    return total


def transition_expectation(params: ModelParams, t: float, x: float, f: Callable) -> float:
    """``E_x[f(xi_t)]`` under the transition kernel of the stopped process.

    At ``x = z`` the process is absorbed and the answer is ``f(z)``. Elsewhere it
    is ``f(z)`` times the atom weight plus the continuous part.
    """
    if not t > 0:
        raise DomainError("transition_expectation needs t > 0")
    fz = float(np.asarray(f(np.array(params.z))))
    if not math.isfinite(fz):
        raise EvaluationError("f(z) is not finite")
    if x == params.z:
        return fz
    return float(atom_weight(params, t, x) * fz + _continuous_part(params, t, x, f))


def transition_mass(params: ModelParams, t: float, x: float) -> float:
    """Total mass of the kernel, which must be one."""
    return transition_expectation(params, t, x, lambda y: np.ones_like(y))


# ---------------------------------------------------------------------------
# augmented semigroup

def semigroup_alive(params: ModelParams, t, y2, h: TestFunction):
    """``Q_t h(1, y2)`` for arrays ``t`` and ``y2`` (broadcast together).

    ``h(0, z) * atom + continuous part of h(1, .)``. At ``t = 0`` returns ``h(1, y2)``.
    """
    t, y2 = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(y2, dtype=float))
    if np.any(t < 0):
        raise DomainError("semigroup needs t >= 0")
    out = np.array(h.alive(y2), dtype=float, copy=True).reshape(t.shape)
    pos = t > 0
    if np.any(pos):
        tp, yp = t[pos], y2[pos]
        h0z = float(h.absorbed(params.z))
        out[pos] = h0z * atom_weight(params, tp, yp) + _continuous_part(params, tp, yp, h.alive)
    return out


def semigroup_Q(params: ModelParams, t: float, p: StatePoint, h: TestFunction) -> float:
    """``Q_t h(p)``. Absorbed points are fixed, ``t = 0`` is the identity."""
    if t < 0:
        raise DomainError("semigroup needs t >= 0")
    if p.y1 == 0 or t == 0:
        return float(h(p.y1, p.y2))
    return float(semigroup_alive(params, t, p.y2, h))


def _propagated(params: ModelParams, t: float, h: TestFunction) -> TestFunction:
    """``Q_t h`` as a new test function, evaluated lazily on whatever nodes ask."""

    def qh(y1, y2):
        y2 = np.asarray(y2, dtype=float)
        if np.all(np.asarray(y1) == 0):
            return h(0, y2)
        flat = semigroup_alive(params, t, y2.ravel(), h)
        return flat.reshape(y2.shape)

    return TestFunction(qh, decays=h.decays, label=f"Q_{t}{h.label}")


def chapman_kolmogorov_residual(params: ModelParams, s: float, t: float, p: StatePoint, h: TestFunction) -> float:
    """``|Q_{s+t} h(p) - Q_s(Q_t h)(p)|``; the inner semigroup is evaluated at every
    quadrature node of the outer one."""
    if not (s > 0 and t > 0):
        raise DomainError("need s, t > 0")
    if p.y1 == 0:
        return 0.0
    direct = semigroup_Q(params, s + t, p, h)
    nested = semigroup_Q(params, s, p, _propagated(params, t, h))
    return abs(direct - nested)


# ---------------------------------------------------------------------------
# conditional laws given the observed state

@dataclass
class ConditionalSigmaLaw:
    """Law of ``sigma`` given the state at time ``t``.

    Either ``atom_known`` holds the already observed value of ``sigma`` or
    ``density`` is a function on ``(t, inf)`` equal to ``normalizer`` times the
    Gaussian kernel ``p(r - t, z - xi, lam (r - t))``.
    """

    t: float
    atom_known: Optional[float] = None
    density: Optional[Callable] = None
    normalizer: float = 1.0
    params: Optional[ModelParams] = field(default=None, repr=False)
    xi: Optional[float] = None

    def cdf(self, r):
        if self.atom_known is not None:
            return np.where(np.asarray(r) >= self.atom_known, 1.0, 0.0)
        r = np.asarray(r, dtype=float)
        safe = np.where(r > self.t, r, self.t + 1.0)
        vals = self.normalizer * ac.int_p_dr(self.params, self.t, safe, self.xi)
        return np.where(r > self.t, vals, 0.0)

    def mean(self) -> float:
        if self.atom_known is not None:
            return float(self.atom_known)
        lam = self.params.lam
        p = self.params
        body = self.t * ac.int_p_dr(p, self.t, np.inf, self.xi) + ac.int_rp_dr(p, self.t, np.inf, self.xi)
        return float(self.normalizer * body)


def cond_sigma_law(params: ModelParams, t: float, xi_t: float, absorbed: bool,
                   sigma: Optional[float] = None) -> ConditionalSigmaLaw:
    """Conditional law of ``sigma`` given ``xi_t`` and the absorbed flag."""
    if not t > 0:
        raise DomainError("cond_sigma_law needs t > 0")
    if absorbed:
        if sigma is None:
            raise UsageError("absorbed state needs the observed sigma")
        return ConditionalSigmaLaw(t=t, atom_known=float(sigma), params=params, xi=params.z)
    lam, z = params.lam, params.z
    pref = lam * math.exp(lam * ac.alpha(params, xi_t))

    def density(r):
        r = np.asarray(r, dtype=float)
        tau = np.where(r > t, r - t, 1.0)
        vals = pref * ac._density(tau, z - xi_t, lam * tau)
        return np.where(r > t, vals, 0.0)

    return ConditionalSigmaLaw(t=t, density=density, normalizer=pref, params=params, xi=float(xi_t))


def cond_exp_sigma(params: ModelParams, t: float, xi_t: float, absorbed: bool,
                   sigma_if_absorbed: Optional[float] = None) -> float:
    """``E[sigma | F_t]``: the observed value, or ``t + 1/lam^2 + |z - xi_t|/lam``."""
    if t < 0:
        raise DomainError("need t >= 0")
    if absorbed:
        if sigma_if_absorbed is None:
            raise UsageError("absorbed state needs the observed sigma")
        return float(sigma_if_absorbed)
    return 1.0 / params.lam**2 + abs(params.z - xi_t) / params.lam + t


def survival_prob(params: ModelParams, s: float, xi_s: float, t: float) -> float:
    """``P(t < sigma | xi_s)`` for an unabsorbed state ``xi_s != z``."""
    if not t >= s >= 0:
        raise DomainError("need t >= s >= 0")
    if xi_s == params.z:
        raise UsageError("xi_s = z is the absorbed state; use the path-level flag")
    if t == s:
        return 1.0
    lam = params.lam
    d = abs(params.z - xi_s)
    rt = math.sqrt(t - s)
    out = special.ndtr(d / rt - lam * rt) + scaled_gauss_tail(2 * lam * d, lam * rt + d / rt)
    return float(min(max(out, 0.0), 1.0))


def _half_line_moment(centre, rt, log_pref, z, upper: bool):
    """``exp(log_pref) * int y N(y; centre, rt^2) dy`` over ``y > z`` or ``y < z``."""
    if upper:
        w = (z - centre) / rt          # mass above z is Phi(-w)
        mass = scaled_gauss_tail(log_pref, w)
        dens = math.exp(log_pref - 0.5 * w * w) / ac.SQRT_2PI
        return centre * mass + rt * dens
    w = (centre - z) / rt              # mass below z is Phi(-w)
    mass = scaled_gauss_tail(log_pref, w)
    dens = math.exp(log_pref - 0.5 * w * w) / ac.SQRT_2PI
    return centre * mass - rt * dens


def cond_mean_xi(params: ModelParams, s: float, xi_s: float, t: float) -> float:
    """``E[xi_t | xi_s]`` in closed form.

    Obtained by integrating the kernel directly: ``z`` times the atom weight,
    plus the first moments of the two half-line Gaussians that make up the
    continuous part. Returns ``z`` for the absorbed state ``xi_s = z``.
    """
    if t < s:
        raise DomainError("need t >= s")
    if t == s:
        return float(xi_s)
    z, lam = params.z, params.lam
    if xi_s == z:
        return z
    tau = t - s
    rt = math.sqrt(tau)
    a_x = ac.alpha(params, xi_s)
    atom = float(atom_weight(params, tau, xi_s))
    lower = _half_line_moment(xi_s + lam * tau, rt, lam * a_x, z, upper=False)
    upper = _half_line_moment(xi_s - lam * tau, rt, lam * a_x - 2 * lam * (xi_s - z), z, upper=True)
    return z * atom + lower + upper


def cond_mean_stopped_time(params: ModelParams, s: float, xi_s: float, t: float) -> float:
    """``E[t ^ sigma | xi_s]`` for an unabsorbed ``xi_s != z``.

    ``t P(t < sigma | xi_s) + lam exp(lam alpha) (s I_p + I_rp)`` with the two
    closed-form time integrals.
    """
    if t == s:
        return float(t)
    lam = params.lam
    pref = lam * math.exp(lam * ac.alpha(params, xi_s))
    stopped = pref * (s * ac.int_p_dr(params, s, t, xi_s) + ac.int_rp_dr(params, s, t, xi_s))
    return t * survival_prob(params, s, xi_s, t) + stopped


def cond_mean_stopped_B(params: ModelParams, s: float, xi_s: float, t: float,
                        absorbed: bool = False, sigma_if_absorbed: Optional[float] = None) -> float:
    """``E[B_{t ^ sigma} | F_s]`` where ``B_u = xi_u - lam (u ^ sigma)``.

    Absorbed states return ``z - lam sigma``. Otherwise the two-branch closed
    form is used, with ``d = z - xi_s`` and ``tau = t - s``. The value is
    ``B_s`` minus a branch-dependent correction, which is non-zero for
    ``tau > 0`` (the stopped Brownian motion is not a martingale here).
    """
    if t < s:
        raise DomainError("need t >= s")
    lam, z = params.lam, params.z
    if absorbed:
        if sigma_if_absorbed is None:
            raise UsageError("absorbed state needs the observed sigma")
        return z - lam * sigma_if_absorbed
    if xi_s == z:
        raise UsageError("xi_s = z is the absorbed state; pass absorbed=True with sigma")
    b_s = xi_s - lam * s
    if t == s:
        return b_s
    tau = t - s
    rt = math.sqrt(tau)
    d = z - xi_s
    ad = abs(d)
    # exp(2 lam |d|) Phi(-lam rt - |d|/rt): the reflected term of both branches
    reflected = scaled_gauss_tail(2 * lam * ad, lam * rt + ad / rt)
    # exp(2 lam |d|) p(tau, d, lam tau), assembled in log form
    tilted_density = math.exp(2 * lam * ad - (ad + lam * tau) ** 2 / (2 * tau)) / math.sqrt(2 * math.pi * tau)
    if d > 0:
        correction = (2 * (lam * tau - 1 / (2 * lam) + d) * reflected
                      + special.ndtr(lam * rt - d / rt) / lam
                      - 2 * tau * ac._density(tau, d, lam * tau))
        return b_s - float(correction)
    correction = (2 * (lam * tau - 1 / (2 * lam) + d) * special.ndtr(lam * rt + d / rt)
                  - 2 * lam * tau
                  + reflected / lam
                  + 2 * tau * tilted_density)
    return b_s + float(correction)


# ---------------------------------------------------------------------------
# laws of the supremum and of the local time at sigma

def sup_cdf(params: ModelParams, x):
    """``P(sup xi <= x) = 1 - exp(-2 lam (x - z))`` for ``x >= z``, else 0."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= params.z, -np.expm1(-2 * params.lam * np.maximum(x - params.z, 0.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def sup_mean_excess(params: ModelParams) -> float:
    """``E[sup xi - z] = 1 / (2 lam)``."""
    return 0.5 / params.lam


def localtime_at_sigma_cdf(params: ModelParams, y):
    """Exponential law with rate ``lam`` of the local time at ``z`` up to ``sigma``."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise DomainError("local time is nonnegative")
    out = -np.expm1(-params.lam * y)
    return float(out) if out.ndim == 0 else out


def localtime_at_sigma_mean(params: ModelParams) -> float:
    return 1.0 / params.lam


# ---------------------------------------------------------------------------
# generator

def _generator_table(params: ModelParams, h: TestFunction, y1, y2, drift_sign: float = 1.0):
    """Branch table of the generator without any domain-membership check.

    ``drift_sign = -1`` flips the drift and exists only for negative controls.
    """
    y1 = np.asarray(y1)
    y2 = np.asarray(y2, dtype=float)
    lam, z = params.lam, params.z
    d1 = h.first(y2)
    d2 = h.second(y2)
    drift = np.where(y2 > z, -lam, np.where(y2 < z, lam, 0.0)) * drift_sign
    alive = drift * d1 + 0.5 * d2
    return np.where(y1 == 1, alive, 0.0)


def generator_apply(params: ModelParams, h: TestFunction, p: StatePoint) -> float:
    """Infinitesimal generator of the augmented process at ``p``.

    Zero on the absorbed layer; ``-lam h' + h''/2`` above ``z``, ``+lam h' + h''/2``
    below, and ``h''/2`` at ``z``, where ``h`` must then satisfy
    ``h(0,z) = h(1,z) = h'(1,z) = 0``.
    """
    if p.y1 == 0:
        return 0.0
    if p.y2 == params.z and not h.in_domain(params.z):
        raise DomainError(
            f"test function violates the domain conditions at z (defect {h.domain_defect(params.z):.3g})")
    return float(_generator_table(params, h, 1, p.y2))


def generator_values(params: ModelParams, h: TestFunction, y1, y2):
    """Vectorised :func:`generator_apply` over arrays of states."""
    y1 = np.asarray(y1)
    y2 = np.asarray(y2, dtype=float)
    if np.any((y1 == 1) & (y2 == params.z)) and not h.in_domain(params.z):
        raise DomainError(
            f"test function violates the domain conditions at z (defect {h.domain_defect(params.z):.3g})")
    return _generator_table(params, h, y1, y2)


def _loglog_slope(ts, errs):
    ts = np.asarray(ts, dtype=float)
    errs = np.asarray(errs, dtype=float)
    keep = errs > 1e-14
    if keep.sum() < 2:
        return math.inf if keep.sum() == 0 else math.nan
    slope, _ = np.polyfit(np.log(ts[keep]), np.log(errs[keep]), 1)
    return float(slope)


def generator_consistency(params: ModelParams, h: TestFunction, points: Sequence[StatePoint],
                          t_sequence: Sequence[float], min_slope: float = 0.8) -> TestReport:
    """Compare ``(Q_t h - h)/t`` with the generator table on a shrinking ``t`` grid.

    The statistic is the log-log slope of ``max_p |(Q_t h - h)/t - A h|`` against
    ``t``. All-zero errors count as a pass (slope reported as ``inf``).
    """
    ts = np.asarray(t_sequence, dtype=float)
    if np.any(ts <= 0) or np.any(np.diff(ts) >= 0):
        raise UsageError("t_sequence must be positive and strictly decreasing")
    per_point = []
    for p in points:
        gen = float(_generator_table(params, h, p.y1, p.y2))
        base = float(h(p.y1, p.y2))
        errs = [abs((semigroup_Q(params, t, p, h) - base) / t - gen) for t in ts]
        per_point.append({"y1": p.y1, "y2": p.y2, "generator": gen, "errors": errs,
                          "slope": _loglog_slope(ts, errs)})
    max_err = np.max(np.array([pp["errors"] for pp in per_point]), axis=0)
    slope = _loglog_slope(ts, max_err)
    decreasing = bool(np.all(np.diff(max_err) <= 0))
    ok = (slope == math.inf) or (math.isfinite(slope) and slope >= min_slope and decreasing)
    return TestReport(
        name="generator_consistency",
        statistic=slope,
        p_value_or_error=float(max_err[-1]),
        n=len(points),
        verdict=Verdict.PASS if ok else Verdict.FAIL,
        metadata={
            "threshold_slope": min_slope,
            "t_sequence": ts.tolist(),
            "max_errors": max_err.tolist(),
            "points": per_point,
            "domain_defect_at_z": h.domain_defect(params.z),
        },
    )


def strong_markov_violation_bound(params: ModelParams) -> float:
    """Positive lower bound on ``P(T_z <= 1, xi_{T_z + 1} != z)``.

    ``2 Phi(-z) [Phi(-lam sqrt3 + z/sqrt3) + exp(2 lam z) Phi(-lam sqrt3 - z/sqrt3)]``,
    which a strong Markov process with these transition kernels would force to 0.
    """
    lam, z = params.lam, params.z
    r3 = math.sqrt(3.0)
    bracket = special.ndtr(-lam * r3 + z / r3) + scaled_gauss_tail(2 * lam * z, lam * r3 + z / r3)
    return float(2 * special.ndtr(-z) * bracket)
