"""Estimators and test statistics that turn sampled paths into verdicts.

Path functionals (local time, quadratic variation, the ``sgn`` time integral,
suprema, first passage) act on one :class:`~lastpassage.sampler.PathGrid` and
read the path as the straight-line interpolant of its nodes, cut at ``sigma``.
The test statistics take plain arrays of per-path values, so large batches can
be streamed through the functionals without holding every path in memory.

Verdict rules: KS tests pass when ``p > 0.01`` (or, with a discretisation
allowance, when ``D <= critical + allowance``); mean-zero tests pass when the
batch-means z-score satisfies ``|z| < 3``. Both thresholds go into the
metadata of every report.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from ._compiled import band_table
from .analytic_core import ModelParams
from .errors import UsageError
from .kernels import strong_markov_violation_bound
from .reports import TestReport, Verdict
from .sampler import PathGrid, RngStream, SamplerConfig, path_iter, refine_near_level, refine_schedule

KS_ALPHA = 0.01
Z_CUT = 3.0
N_BATCHES = 20
MIN_Z_SAMPLES = 30
EXTRAPOLATION_FACTORS = (4.0, 2.0, 1.0)


# ---------------------------------------------------------------------------
# empirical CDF and Kolmogorov-Smirnov

@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical distribution function of a sample."""

    sorted_samples: np.ndarray

    @property
    def n(self) -> int:
        return int(self.sorted_samples.size)

    def __call__(self, x):
        out = np.searchsorted(self.sorted_samples, np.asarray(x, dtype=float), side="right") / self.n
        return float(out) if np.ndim(out) == 0 else out


def ecdf(samples) -> Ecdf:
    arr = np.sort(np.asarray(samples, dtype=float).ravel())
    if arr.size == 0:
        raise UsageError("ecdf needs at least one sample")
    if not np.all(np.isfinite(arr)):
        raise UsageError("ecdf samples must be finite")
    arr.setflags(write=False)
    return Ecdf(arr)


def ks_statistic(e: Ecdf, cdf: Callable) -> float:
    """``sup_x |F_n(x) - F(x)|``, attained at a sample point or just before it."""
    x = e.sorted_samples
    f = np.asarray(cdf(x), dtype=float)
    n = e.n
    # ties: the ECDF jumps once per distinct value, to the count at or below it
    upper = np.searchsorted(x, x, side="right") / n
    lower = np.searchsorted(x, x, side="left") / n
    return float(max(np.max(upper - f), np.max(f - lower)))


def ks_pvalue(n: int, d: float) -> float:
    """Asymptotic p-value ``P(K > sqrt(n) d)`` from the Kolmogorov distribution."""
    return float(stats.kstwobign.sf(math.sqrt(n) * d))


def ks_critical(n: int, alpha: float = KS_ALPHA) -> float:
    """Asymptotic critical distance of the two-sided KS test at level ``alpha``."""
    return float(stats.kstwobign.isf(alpha) / math.sqrt(n))


def ks_test(e: Ecdf, cdf: Callable, name: str = "ks", alpha: float = KS_ALPHA,
            allowance: Optional[float] = None, metadata: Optional[dict] = None) -> TestReport:
    """Two-sided KS test of ``e`` against ``cdf``.

    Without ``allowance`` the verdict is PASS iff ``p > alpha``. With an
    allowance (for samplers carrying a known discretisation bias) it is PASS
    iff ``D <= ks_critical(n, alpha) + allowance``.
    """
    d = ks_statistic(e, cdf)
    p = ks_pvalue(e.n, d)
    crit = ks_critical(e.n, alpha)
    meta = {"alpha": alpha, "critical_distance": crit}
    if allowance is None:
        ok = p > alpha
        meta["rule"] = "p > alpha"
    else:
        ok = d <= crit + allowance
        meta.update(rule="D <= critical + allowance", allowance=allowance)
    meta.update(metadata or {})
    return TestReport(name, d, p, e.n, Verdict.PASS if ok else Verdict.FAIL, meta)


# ---------------------------------------------------------------------------
# per-segment integrals of the interpolated path

def _band_fraction(a, b, lo, hi):
    """Fraction of the straight segment from ``a`` to ``b`` spent strictly in ``(lo, hi)``."""
    low = np.minimum(a, b)
    high = np.maximum(a, b)
    width = high - low
    inside = np.clip(np.minimum(high, hi) - np.maximum(low, lo), 0.0, None)
    flat = width == 0
    return np.where(flat, ((a > lo) & (a < hi)).astype(float), inside / np.where(flat, 1.0, width))


def _below_fraction(a, b, level):
    """Fraction of the straight segment from ``a`` to ``b`` spent below ``level``."""
    width = b - a
    flat = width == 0
    cross = np.clip((level - a) / np.where(flat, 1.0, width), 0.0, 1.0)
    frac = np.where(width > 0, cross, 1.0 - cross)
    return np.where(flat, (a < level).astype(float), frac)


def _cumulative(path: PathGrid, stops, segment: Callable):
    """``int_0^{min(stop, sigma)}`` of a segment-additive functional, for each stop.

    ``segment(a, b, duration)`` returns the contribution of straight pieces.
    """
    t, x = path.times, path.values
    stops = np.minimum(np.atleast_1d(np.asarray(stops, dtype=float)), path.sigma)
    if np.any(stops > t[-1] + 1e-12) or np.any(stops < 0):
        raise UsageError("stop time outside the sampled grid")
    whole = segment(x[:-1], x[1:], np.diff(t))
    cum = np.concatenate(([0.0], np.cumsum(whole)))
    k = np.clip(np.searchsorted(t, stops, side="right") - 1, 0, t.size - 1)
    k_next = np.minimum(k + 1, t.size - 1)
    span = t[k_next] - t[k]
    part = stops - t[k]
    end = np.where(span > 0, x[k] + (x[k_next] - x[k]) * part / np.where(span > 0, span, 1.0), x[k])
    return cum[k] + np.where(part > 0, segment(x[k], end, part), 0.0)


def band_occupation(path: PathGrid, level: float, epsilon, stops) -> np.ndarray:
    """Time the interpolated path spends in ``(level - eps, level + eps)`` before each stop and ``sigma``.

    ``epsilon`` may be a sequence; the result then has one row per band width.
    """
    eps = np.atleast_1d(np.asarray(epsilon, dtype=float))
    stops = np.minimum(np.atleast_1d(np.asarray(stops, dtype=float)), path.sigma)
    if np.any(stops > path.times[-1] + 1e-12) or np.any(stops < 0):
        raise UsageError("stop time outside the sampled grid")
    order = np.argsort(stops, kind="stable")
    table = np.empty((eps.size, stops.size))
    table[:, order] = band_table(path.times, path.values, float(level), eps, stops[order])
    return table[0] if np.ndim(epsilon) == 0 else table


def local_time_estimate(path: PathGrid, level: float, epsilon: float, t: Optional[float] = None) -> float:
    """``(1 / 2 eps)`` times the band occupation up to ``min(t, sigma)``.

    ``t = None`` means up to ``sigma``.
    """
    if not epsilon > 0:
        raise UsageError("epsilon must be positive")
    stop = path.sigma if t is None else t
    return float(band_occupation(path, level, epsilon, stop)[0] / (2.0 * epsilon))


def richardson_intercept(epsilons, values) -> np.ndarray:
    """Least-squares intercept ``a`` of ``value(eps) = a + b eps``.

    ``values`` has the ``epsilons`` along its first axis; the fit is linear in
    the data, so it broadcasts over any trailing axes.
    """
    eps = np.asarray(epsilons, dtype=float)
    values = np.asarray(values, dtype=float)
    if eps.size < 2:
        raise UsageError("need at least two band widths to extrapolate")
    centred = eps - eps.mean()
    weights = 1.0 / eps.size - eps.mean() * centred / np.sum(centred**2)
    return np.tensordot(weights, values, axes=(0, 0))


def local_time_profile(path: PathGrid, level: float, base: float, stops=(),
                       factors: Sequence[float] = EXTRAPOLATION_FACTORS) -> np.ndarray:
    """Extrapolated local time at ``level`` up to each stop and finally up to ``sigma``.

    Band widths are ``factors * base``; the result has ``len(stops) + 1``
    entries with the ``sigma`` value last.
    """
    stops = np.concatenate((np.asarray(stops, dtype=float), [path.sigma]))
    eps = np.asarray(factors, dtype=float) * base
    table = band_occupation(path, level, eps, stops) / (2.0 * eps[:, None])
    return richardson_intercept(eps, table)


def local_time_extrapolated(path: PathGrid, level: float, base: float, t: Optional[float] = None,
                            factors: Sequence[float] = EXTRAPOLATION_FACTORS) -> float:
    """ε→0 extrapolation of :func:`local_time_estimate` over ``eps = factors * base``."""
    stops = () if t is None else (t,)
    return float(local_time_profile(path, level, base, stops, factors)[0])


def refine_for_local_time(path: PathGrid, gen: np.random.Generator, level: float,
                          fine_steps: Sequence[float], factors: Sequence[float] = EXTRAPOLATION_FACTORS,
                          halo_sd: float = 5.0) -> PathGrid:
    """Refine an exact path near ``level`` down to ``fine_steps[-1]``.

    The widest band used afterwards is ``max(factors) * sqrt(fine_steps[-1])``;
    the halos of :func:`~lastpassage.sampler.refine_schedule` are sized to it.
    """
    eps_max = max(factors) * math.sqrt(fine_steps[-1])
    for fine, halo in refine_schedule(path.dt, fine_steps, eps_max, halo_sd):
        path = refine_near_level(path, gen, level, fine, halo)
    return path


def quad_var_estimate(path: PathGrid, t: float) -> float:
    """Sum of squared increments of the grid path over ``[0, t]``."""
    if t > path.t_end + 1e-12 or t < 0:
        raise UsageError(f"t={t} outside the sampled grid [0, {path.t_end}]")
    return float(_cumulative_unstopped(path, t, lambda a, b, d: (b - a) ** 2))


def _cumulative_unstopped(path: PathGrid, stop: float, segment: Callable) -> float:
    # quadratic variation needs no cut at sigma (increments vanish there anyway)
    t, x = path.times, path.values
    k = int(np.searchsorted(t, stop, side="right") - 1)
    total = float(np.sum(segment(x[:k], x[1:k + 1], np.diff(t[:k + 1]))))
    if k + 1 < t.size and stop > t[k]:
        end = np.interp(stop, t, x)
        total += float(segment(x[k], end, stop - t[k]))
    return total


def sgn_time_integral(path: PathGrid, level: float, t: float) -> float:
    """``int_0^{min(t, sigma)} sgn(level - xi_s) ds`` for the interpolated path."""
    return float(_cumulative(path, t, lambda a, b, d: d * (2.0 * _below_fraction(a, b, level) - 1.0))[0])


def driving_motion(path: PathGrid, params: ModelParams, t: float) -> float:
    """``b_t = xi_t - lam int_0^{t ^ sigma} sgn(z - xi_s) ds``, the Brownian part of ``xi``."""
    return float(path.value_at(t)) - params.lam * sgn_time_integral(path, params.z, t)


def bridge_supremum(path: PathGrid, gen: np.random.Generator) -> float:
    """Exact draw of ``sup xi`` given the grid values of an exact path.

    Between nodes before ``sigma`` the path is a Brownian bridge, whose maximum
    over a step of length ``d`` from ``a`` to ``b`` is
    ``(a + b + sqrt((a - b)^2 - 2 d log U)) / 2`` with ``U`` uniform.
    """
    t, x = path.times, path.values
    live = np.flatnonzero(t[1:] <= path.sigma)
    a, b = x[live], x[live + 1]
    d = t[live + 1] - t[live]
    u = gen.random(live.size)
    peaks = 0.5 * (a + b + np.sqrt((a - b) ** 2 - 2.0 * d * np.log1p(-u)))
    return float(max(np.max(x), np.max(peaks) if peaks.size else -np.inf))


def first_passage_time(path: PathGrid, level: float) -> float:
    """First grid passage to ``level`` refined by linear interpolation; ``inf`` if none."""
    hit = np.flatnonzero(path.values >= level)
    if hit.size == 0:
        return math.inf
    i = int(hit[0])
    if i == 0:
        return 0.0
    a, b = path.values[i - 1], path.values[i]
    return float(path.times[i - 1] + (level - a) / (b - a) * (path.times[i] - path.times[i - 1]))


# ---------------------------------------------------------------------------
# mean-zero tests

def batch_mean_se(values, batches: int = N_BATCHES):
    """Mean and batch-means standard error of ``values``."""
    values = np.asarray(values, dtype=float)
    means = np.array([b.mean() for b in np.array_split(values, batches)])
    return float(values.mean()), float(means.std(ddof=1) / math.sqrt(batches))


def martingale_ztest(samples, weights=None, name: str = "martingale_ztest",
                     z_cut: float = Z_CUT, batches: int = N_BATCHES,
                     metadata: Optional[dict] = None) -> TestReport:
    """z-test of ``E[samples * weights] = 0`` with a batch-means standard error.

    PASS iff ``|z| < z_cut``; fewer than 30 samples give INCONCLUSIVE.
    """
    x = np.asarray(samples, dtype=float)
    if weights is not None:
        x = x * np.asarray(weights, dtype=float)
    meta = {"z_cut": z_cut, "batches": batches, **(metadata or {})}
    if x.size < MIN_Z_SAMPLES:
        return TestReport(name, math.nan, math.nan, int(x.size), Verdict.INCONCLUSIVE,
                          {**meta, "reason": f"fewer than {MIN_Z_SAMPLES} samples"})
    mean, se = batch_mean_se(x, batches)
    if se == 0.0:
        z = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        z = mean / se
    meta.update(mean=mean, se=se)
    verdict = Verdict.PASS if abs(z) < z_cut else Verdict.FAIL
    return TestReport(name, z, float(2 * stats.norm.sf(abs(z))), int(x.size), verdict, meta)


def compensator_residual(sigmas, local_times, t_grid, lam: float,
                         name: str = "compensator_residual") -> TestReport:
    """z-tests of ``E[1{sigma <= t} - lam L(t ^ sigma)] = 0`` for every ``t`` in ``t_grid``.

    ``local_times[i, j]`` is the (extrapolated) local time at ``z`` of path ``i``
    up to ``min(t_grid[j], sigma_i)``; ``t_grid`` may contain ``inf``. PASS iff
    every ``|z| < 3``; the statistic is the largest ``|z|``.
    """
    sigmas = np.asarray(sigmas, dtype=float)
    local_times = np.asarray(local_times, dtype=float).reshape(sigmas.size, -1)
    t_grid = np.asarray(t_grid, dtype=float)
    if local_times.shape[1] != t_grid.size:
        raise UsageError("local_times needs one column per time in t_grid")
    parts = []
    for j, t in enumerate(t_grid):
        resid = (sigmas <= t).astype(float) - lam * local_times[:, j]
        parts.append(martingale_ztest(resid, name=f"{name}[t={t:g}]"))
    zs = np.array([abs(p.statistic) for p in parts])
    worst = float(np.max(zs)) if zs.size else math.nan
    verdicts = [p.verdict for p in parts]
    if any(v == Verdict.INCONCLUSIVE for v in verdicts):
        verdict = Verdict.INCONCLUSIVE
    else:
        verdict = Verdict.PASS if all(v == Verdict.PASS for v in verdicts) else Verdict.FAIL
    return TestReport(name, worst, float(min(p.p_value_or_error for p in parts)), int(sigmas.size), verdict,
                      {"z_cut": Z_CUT, "t_grid": t_grid.tolist(),
                       "per_time": [{"t": float(t), "z": p.statistic, "mean": p.metadata.get("mean"),
                                     "se": p.metadata.get("se")} for t, p in zip(t_grid, parts)]})


# ---------------------------------------------------------------------------
# jumps of the compensator and of the survival indicator

def _max_compensator_increment(path: PathGrid, params: ModelParams, epsilon: float) -> float:
    t, x = path.times, path.values
    live = t[1:] <= path.sigma
    d = np.diff(t)[live]
    occ = d * _band_fraction(x[:-1][live], x[1:][live], params.z - epsilon, params.z + epsilon)
    return float(params.lam * occ.max() / (2.0 * epsilon)) if occ.size else 0.0


def survival_jumps(path: PathGrid) -> int:
    """Number of changes of the survival indicator ``1{t < sigma}`` along the grid."""
    return int(np.count_nonzero(np.diff(path.alive())))


def jump_scan(paths: Sequence[PathGrid], params: ModelParams, rng: RngStream, halvings: int = 2,
              eps_factor: float = 2.0, min_ratio: float = 1.2, synthetic_atom: float = 0.0) -> TestReport:
    """Check that the compensator has no atoms and that ``zeta`` jumps once, at ``sigma``.

    Each path is refined by exact bridge halving ``halvings`` times (coupled:
    every level keeps the nodes of the coarser one). At each level the largest
    single-step increment of ``lam L_hat`` with ``eps = eps_factor sqrt(dt)`` is
    recorded. An atom-free compensator makes this maximum shrink like
    ``sqrt(dt)``; the verdict needs every halving ratio ``>= min_ratio`` and
    exactly one jump of the survival indicator per path.

    ``synthetic_atom > 0`` adds a fake atom of that size to the compensator at
    every level (negative control).
    """
    if not paths:
        raise UsageError("jump_scan needs at least one path")
    dt0 = paths[0].dt
    steps = [dt0 / 2**j for j in range(halvings + 1)]
    max_inc = np.zeros(len(steps))
    jumps = np.zeros(len(paths), dtype=int)
    for i, path in enumerate(paths):
        gen = rng.child(i).generator()
        jumps[i] = survival_jumps(path)
        for j, h in enumerate(steps):
            if j > 0:
                path = refine_near_level(path, gen, params.z, h, math.inf)
            max_inc[j] = max(max_inc[j], _max_compensator_increment(path, params, eps_factor * math.sqrt(h)))
    if synthetic_atom > 0:
        max_inc = np.maximum(max_inc, synthetic_atom)
    ratios = max_inc[:-1] / max_inc[1:]
    ok_atoms = bool(np.all(ratios >= min_ratio))
    ok_jumps = bool(np.all(jumps == 1))
    return TestReport(
        "jump_scan", float(ratios.min()), float(max_inc[-1]), len(paths),
        Verdict.PASS if ok_atoms and ok_jumps else Verdict.FAIL,
        {"min_ratio": min_ratio, "dt_levels": steps, "max_increments": max_inc.tolist(),
         "ratios": ratios.tolist(), "eps_factor": eps_factor, "paths_with_one_jump": int(np.sum(jumps == 1)),
         "synthetic_atom": synthetic_atom},
    )


# ---------------------------------------------------------------------------
# failure of the strong Markov property

def strong_markov_indicator(path: PathGrid, level: float):
    """``(T <= 1, T <= 1 and sigma > T + 1)`` with ``T`` the first passage to ``level``.

    ``xi_{T+1} != z`` is read as ``T + 1 < sigma``: before ``sigma`` the path
    sits at ``z`` with probability zero.
    """
    tz = first_passage_time(path, level)
    hit = tz <= 1.0
    return hit, bool(hit and path.sigma > tz + 1.0)


def strong_markov_violation_test(params: ModelParams, rng: RngStream, n: int, dt: float = 1e-3) -> TestReport:
    """Estimate ``P(T_z <= 1, xi_{T_z + 1} != z)`` from ``n`` exact paths on ``[0, 1]``.

    PASS iff ``p_hat - 3 SE > 0`` and ``p_hat + 3 SE`` reaches the analytic
    lower bound. The negative control recomputes the statistic on the paths
    absorbed before ``T_z + 1``, where it must vanish.
    """
    if n < 10_000:
        raise UsageError("strong_markov_violation_test needs n >= 10^4")
    hits = np.zeros(n, dtype=bool)
    viol = np.zeros(n, dtype=bool)
    for i, path in enumerate(path_iter(params, rng, SamplerConfig(dt=dt), n, "exact", t_end=1.0)):
        hits[i], viol[i] = strong_markov_indicator(path, params.z)
    p_hat, se = batch_mean_se(viol.astype(float))
    bound = strong_markov_violation_bound(params)
    absorbed_first = hits & ~viol
    control = float(viol[absorbed_first].mean()) if absorbed_first.any() else 0.0
    ok = (p_hat - Z_CUT * se > 0) and (p_hat + Z_CUT * se >= bound)
    return TestReport(
        "strong_markov_violation", p_hat, se, n, Verdict.PASS if ok else Verdict.FAIL,
        {"bound": bound, "z_cut": Z_CUT, "dt": dt, "hit_fraction": float(hits.mean()),
         "negative_control": control, "rule": "p - 3SE > 0 and p + 3SE >= bound"},
    )
