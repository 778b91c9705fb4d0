"""The named checks run by ``lastpassage verify`` and ``lastpassage suite``.

Every check is a function ``(config) -> TestReport``. Randomised checks take
their streams from :func:`check_stream`, a hash of ``(seed, check name)``, so
adding or reordering checks never changes the randomness of another one.

Step sizes: the brute-force and bang-bang checks use ``config.dt``. Checks on
the exact sampler use a coarse grid of ``EXACT_DT`` because the grid values are
exact; the local-time checks then refine that grid near ``z`` down to
``LOCAL_TIME_STEPS[-1]`` with exact bridge points.
"""
from __future__ import annotations

import hashlib
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import analytic_core as ac
from .analytic_core import ModelParams
from .errors import ConfigurationError, UsageError
from .estimators import (bridge_supremum, driving_motion, ecdf, ks_critical, ks_test, local_time_profile,
                         martingale_ztest, batch_mean_se, compensator_residual, jump_scan,
                         refine_for_local_time, strong_markov_violation_test, Z_CUT)
from .kernels import (StatePoint, TestFunction, canonical_test_function, chapman_kolmogorov_residual,
                      cond_mean_stopped_B, constant_test_function, generator_consistency,
                      localtime_at_sigma_cdf, semigroup_Q, sup_cdf, transition_expectation)
from .pde import Grid1D, SchemeConfig, convergence_study, dynkin_increments, interior_residual, kbe_error, stable_dt
from .quadrature import adaptive_quad
from .reports import TestReport, Verdict, combine_verdicts, to_plain
from .sampler import (RngStream, SamplerConfig, path_iter, sample_bangbang_sigma, sample_bruteforce_sigma,
                      sample_sigmas)

EXACT_DT = 1e-3
LOCAL_TIME_STEPS = (1e-4, 1e-5)
APPROX_FRACTION = 5          # brute-force and bang-bang checks use n_paths // 5 paths
JUMP_SCAN_FRACTION = 50


@dataclass
class RunConfig:
    """Validated parameters of one CLI run."""

    lam: float = 1.0
    z: float = 1.0
    seed: int = 42
    n_paths: int = 100_000
    dt: float = 1e-4
    out_dir: str = "out"
    suite: Optional[List[str]] = None
    method: str = "exact"

    def __post_init__(self):
        for name in ("lam", "z", "dt"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"{'lambda' if name == 'lam' else name} must be a positive real, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if isinstance(self.n_paths, bool) or not isinstance(self.n_paths, int) or self.n_paths < 1:
            raise ConfigurationError(f"paths must be a positive integer, got {self.n_paths!r}")
        if self.suite is not None:
            if len(self.suite) == 0:
                raise ConfigurationError("suite list is empty")
            unknown = [c for c in self.suite if c not in CHECKS]
            if unknown:
                raise ConfigurationError(f"unknown check(s) {unknown}; valid: {', '.join(CHECK_ORDER)}")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.lam, self.z)

    def echo(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        out.pop("out_dir")
        return out


def check_stream(seed: int, check: str) -> RngStream:
    """Stream base for a check: the first 6 bytes of ``sha256(f"{seed}:{check}")``."""
    digest = hashlib.sha256(f"{seed}:{check}".encode()).digest()
    return RngStream(seed, int.from_bytes(digest[:6], "big"))


def _report(name: str, parts: Sequence[TestReport], statistic: float, value: float, n: int, **meta) -> TestReport:
    verdict = combine_verdicts([p.verdict for p in parts])
    meta["parts"] = [p.to_dict() for p in parts]
    return TestReport(name, statistic, value, n, verdict, meta)


def _verdict(ok: bool) -> Verdict:
    return Verdict.PASS if ok else Verdict.FAIL


# ---------------------------------------------------------------------------
# purely numerical checks

def _tail_cut(f, start: float, floor: float = 1e-16) -> float:
    """First doubling point past ``start`` beyond which ``f`` stays below ``floor``."""
    t = max(start, 1.0)
    while f(t) >= floor or f(2 * t) >= floor:
        t *= 2.0
    return 2 * t


def closed_form_sweep(n_points: int = 100, seed: int = 20240101) -> List[dict]:
    """Closed-form time integrals against adaptive quadrature on a random parameter sweep.

    Singular endpoints ``1/sqrt(u)`` are removed by the substitution ``u = v^2``.
    The sweep seed is fixed so the check is a pure function of the code.
    """
    rng = np.random.default_rng(seed)
    rows = []
    gauss = ac.gauss_density
    for _ in range(n_points):
        lam = float(rng.uniform(0.3, 3.0))
        z = float(rng.uniform(0.2, 3.0))
        params = ModelParams(lam, z)
        s = float(rng.uniform(0.0, 2.0))
        tau = float(rng.uniform(0.05, 5.0))
        x = float(z + rng.uniform(-3.0, 3.0))
        d = z - x
        errs = {}

        def p_int(v):
            return 2 * v * gauss(v * v, d, lam * v * v)

        q, _ = adaptive_quad(p_int, 0.0, math.sqrt(tau), abs_tol=1e-13)
        errs["int_p_dr"] = abs(ac.int_p_dr(params, s, s + tau, x) - q)

        cut = _tail_cut(lambda v: float(p_int(np.array(v))), math.sqrt(tau))
        q, _ = adaptive_quad(p_int, 0.0, cut, abs_tol=1e-13)
        errs["int_p_dr_infinite"] = abs(ac.int_p_dr(params, s, math.inf, x) - q)

        q, _ = adaptive_quad(lambda v: 2 * v**3 * gauss(v * v, d, lam * v * v), 0.0, math.sqrt(tau), abs_tol=1e-13)
        errs["int_rp_dr"] = abs(ac.int_rp_dr(params, s, s + tau, x) - q)

        def phi(v, sign):
            v = np.maximum(v, 1e-300)
            return 2 * v * ac.normal_cdf(lam * v + sign * d / v)

        q, _ = adaptive_quad(lambda v: phi(v, 1.0), 0.0, math.sqrt(tau), abs_tol=1e-13)
        errs["int_phi_plus"] = abs(ac.int_phi_plus(params, tau, d) - q)
        q, _ = adaptive_quad(lambda v: phi(v, -1.0), 0.0, math.sqrt(tau), abs_tol=1e-13)
        errs["int_phi_minus"] = abs(ac.int_phi_minus(params, tau, d) - q)

        a = float(rng.uniform(0.2, 3.0))
        b = float(rng.uniform(-2.0, 2.0))
        r1 = float(rng.uniform(0.05, 1.0))
        r2 = r1 + float(rng.uniform(0.05, 3.0))
        q, _ = adaptive_quad(lambda r: np.exp(-a * a * r * r - b * b / (r * r)), r1, r2, abs_tol=1e-13)
        errs["gaussian_primitive"] = abs(ac.gaussian_primitive(a, b, r2) - ac.gaussian_primitive(a, b, r1) - q)
        rows.append({"lambda": lam, "z": z, "s": s, "tau": tau, "x": x, "a": a, "b": b, "r1": r1, "r2": r2,
                     "errors": errs})
    return rows


def check_integrals(cfg: RunConfig, tol: float = 1e-8) -> TestReport:
    rows = closed_form_sweep()
    names = list(rows[0]["errors"])
    worst = {k: max(r["errors"][k] for r in rows) for k in names}
    overall = max(worst.values())
    return TestReport("integrals", overall, overall, len(rows), _verdict(overall <= tol),
                      {"tol": tol, "max_error_per_identity": worst})


def check_nonfeller(cfg: RunConfig, t: float = 1.0, tol: float = 1e-8) -> TestReport:
    params = cfg.params
    lam, z = params.lam, params.z

    def f(y):
        return np.exp(-lam * np.abs(y - z))

    gap = ac.nonfeller_gap(params, t)
    offsets = [1e-6, 1e-8, 1e-10, 1e-12]
    right = [transition_expectation(params, t, z + d, f) for d in offsets]
    left = [transition_expectation(params, t, z - d, f) for d in offsets]
    at_z = transition_expectation(params, t, z, f)
    err = max(abs(right[-1] - gap), abs(left[-1] - gap))
    ok = err <= tol and at_z - gap > 0
    return TestReport("nonfeller", err, at_z - gap, len(offsets) * 2, _verdict(ok),
                      {"tol": tol, "t": t, "closed_form_limit": gap, "value_at_z": at_z,
                       "offsets": offsets, "right_values": right, "left_values": left})


def check_semigroup(cfg: RunConfig, ck_tol: float = 1e-6, far_tol: float = 1e-6) -> TestReport:
    params = cfg.params
    z = params.z
    h = canonical_test_function(params)
    ck = []
    for p in (StatePoint(1, 0.0), StatePoint(1, z - 0.5), StatePoint(1, z + 0.5)):
        for s, t in ((0.25, 0.25), (0.5, 0.5), (0.5, 1.0)):
            ck.append({"y2": p.y2, "s": s, "t": t, "residual": chapman_kolmogorov_residual(params, s, t, p, h)})
    ck_worst = max(r["residual"] for r in ck)
    const = chapman_kolmogorov_residual(params, 0.5, 0.5, StatePoint(1, 0.0), constant_test_function(1.0))
    # Feller (i): strong continuity at t = 0
    ts = [1e-1, 1e-2, 1e-3, 1e-4]
    probes = [StatePoint(1, y) for y in (0.0, z - 1.0, z - 0.25, z, z + 0.25, z + 1.0)]
    cont = [max(abs(semigroup_Q(params, t, p, h) - float(h(p.y1, p.y2))) for p in probes) for t in ts]
    cont_ok = all(np.diff(cont) <= 0) and cont[-1] <= 1e-3
    # Feller (ii): C_0 is preserved
    far = [abs(semigroup_Q(params, 1.0, StatePoint(1, z + d), h)) for d in (-60.0, -40.0, 40.0, 60.0)]
    far_ok = max(far) <= far_tol
    absorbed = semigroup_Q(params, 5.0, StatePoint(0, 3.7), h) - float(h(0, 3.7))
    ok = ck_worst <= ck_tol and cont_ok and far_ok and absorbed == 0.0
    return TestReport("semigroup", ck_worst, max(far), len(ck), _verdict(ok),
                      {"ck_tol": ck_tol, "far_tol": far_tol, "chapman_kolmogorov": ck,
                       "constant_residual": const, "continuity_t": ts, "continuity_error": cont,
                       "far_field_values": far, "absorbed_fixed_point_error": absorbed})


GENERATOR_T = (0.05, 0.025, 0.0125, 0.00625)


def check_generator(cfg: RunConfig) -> TestReport:
    params = cfg.params
    z = params.z
    h = canonical_test_function(params)
    main = generator_consistency(params, h, [StatePoint(1, z - 0.5), StatePoint(1, z + 0.5),
                                             StatePoint(0, z + 0.3)], GENERATOR_T)
    at_z = generator_consistency(params, h, [StatePoint(1, z)], GENERATOR_T, min_slope=0.0)

    bad = TestFunction(lambda y1, y2: np.where(np.asarray(y1) == 1, np.exp(-(np.asarray(y2) - z) ** 2), 0.0),
                       lambda y2: -2 * (y2 - z) * np.exp(-(y2 - z) ** 2),
                       lambda y2: (4 * (y2 - z) ** 2 - 2) * np.exp(-(y2 - z) ** 2), label="outside-domain")
    control = generator_consistency(params, bad, [StatePoint(1, z)], GENERATOR_T)
    ok = main.passed and control.verdict == Verdict.FAIL
    return TestReport("generator", main.statistic, main.p_value_or_error, main.n, _verdict(ok),
                      {"threshold_slope": 0.8, "consistency": main.to_dict(), "at_level": at_z.to_dict(),
                       "negative_control": control.to_dict()})


def check_pde(cfg: RunConfig, tol: float = 5e-3, res_tol: float = 1e-4) -> TestReport:
    """Backward equation on ``[z - 8, z + 8]`` at ``t = 0.5`` against the semigroup.

    The sup error is taken from the upwind scheme at 1601 nodes. Orders come
    from the centred scheme on 401/801/1601 nodes: the upwind scheme is first
    order by construction and is reported alongside.
    """
    params = cfg.params
    h = canonical_test_function(params)
    counts = (401, 801, 1601)
    upwind = convergence_study(params, h, 0.5, 8.0, counts, upwind=True)
    centred = convergence_study(params, h, 0.5, 8.0, counts, upwind=False)
    half = convergence_study(params, h, 0.5, 8.0, counts, upwind=True, interface="half_laplacian_row")
    residual = interior_residual(params, h, 0.5, [params.z + d for d in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)],
                                 tol=res_tol)
    err = upwind["rows"][-1]["sup_error"]
    order = min(centred["order"])
    order_away = min(centred["order_away"])
    ok = (err <= tol and centred["rows"][-1]["sup_error"] <= tol and order >= 1.0 and order_away >= 1.8
          and residual.passed)
    return TestReport("pde", order_away, err, counts[-1], _verdict(ok),
                      {"tol": tol, "min_order": 1.0, "min_order_away": 1.8, "upwind": upwind, "centred": centred,
                       "half_laplacian_interface": half, "interior_residual": residual.to_dict()})


# ---------------------------------------------------------------------------
# Monte Carlo checks on the exact sampler

def check_law_sigma(cfg: RunConfig) -> TestReport:
    params = cfg.params
    sig = sample_sigmas(params, check_stream(cfg.seed, "law-sigma"), cfg.n_paths)
    return ks_test(ecdf(sig), lambda t: ac.sigma_cdf(params, t), name="law-sigma")


SIGMA_MEAN_EXTRA = ((2.0, 0.5),)


def check_sigma_mean(cfg: RunConfig) -> TestReport:
    pairs = [(cfg.lam, cfg.z)] + [p for p in SIGMA_MEAN_EXTRA if p != (cfg.lam, cfg.z)]
    parts = []
    for lam, z in pairs:
        params = ModelParams(lam, z)
        sig = sample_sigmas(params, check_stream(cfg.seed, f"sigma-mean:{lam:g}:{z:g}"), cfg.n_paths)
        target = ac.sigma_mean(params)
        parts.append(martingale_ztest(sig - target, name=f"sigma-mean[lambda={lam:g},z={z:g}]",
                                      metadata={"target": target}))
    worst = max(abs(p.statistic) for p in parts)
    return _report("sigma-mean", parts, worst, min(p.p_value_or_error for p in parts), cfg.n_paths,
                   z_cut=Z_CUT, pairs=pairs)


def check_law_sup(cfg: RunConfig) -> TestReport:
    params = cfg.params
    stream = check_stream(cfg.seed, "law-suptest")
    sups = np.empty(cfg.n_paths)
    for i, path in enumerate(path_iter(params, stream, SamplerConfig(dt=EXACT_DT), cfg.n_paths)):
        sups[i] = bridge_supremum(path, stream.child(cfg.n_paths + i).generator())
    ks = ks_test(ecdf(sups), lambda x: sup_cdf(params, x), name="law-suptest[ks]")
    mean = martingale_ztest(sups - params.z - 0.5 / params.lam, name="law-suptest[mean]",
                            metadata={"target": 0.5 / params.lam})
    return _report("law-suptest", [ks, mean], ks.statistic, ks.p_value_or_error, cfg.n_paths, dt=EXACT_DT)


def _local_time_batch(cfg: RunConfig, check: str, stops: Sequence[float]):
    """``sigma`` and extrapolated local times at ``z`` (columns: stops, then ``sigma``)."""
    params = cfg.params
    stream = check_stream(cfg.seed, check)
    base = math.sqrt(LOCAL_TIME_STEPS[-1])
    sig = np.empty(cfg.n_paths)
    table = np.empty((cfg.n_paths, len(stops) + 1))
    for i, path in enumerate(path_iter(params, stream, SamplerConfig(dt=EXACT_DT), cfg.n_paths)):
        fine = refine_for_local_time(path, stream.child(cfg.n_paths + i).generator(), params.z, LOCAL_TIME_STEPS)
        sig[i] = path.sigma
        table[i] = local_time_profile(fine, params.z, base, stops)
    return sig, table


def check_law_localtime(cfg: RunConfig, mean_tol: float = 0.02) -> TestReport:
    params = cfg.params
    _, table = _local_time_batch(cfg, "law-localtime", ())
    loc = table[:, -1]
    ks = ks_test(ecdf(loc), lambda y: localtime_at_sigma_cdf(params, np.maximum(y, 0.0)), name="law-localtime[ks]")
    target = 1.0 / params.lam
    rel = abs(loc.mean() - target) / target
    mean = TestReport("law-localtime[mean]", float(loc.mean()), rel, loc.size, _verdict(rel <= mean_tol),
                      {"target": target, "relative_tolerance": mean_tol})
    return _report("law-localtime", [ks, mean], ks.statistic, ks.p_value_or_error, cfg.n_paths,
                   coarse_dt=EXACT_DT, refined_steps=list(LOCAL_TIME_STEPS),
                   band_widths=[k * math.sqrt(LOCAL_TIME_STEPS[-1]) for k in (4, 2, 1)],
                   negative_values=int(np.sum(loc < 0)))


def compensator_times(params: ModelParams) -> List[float]:
    """Five times spread over the bulk of the law of ``sigma``, including its median."""
    med = float(ac.sigma_quantile(params, np.array([0.5]))[0])
    return [0.25 * med, 0.5 * med, med, 2.0 * med, 4.0 * med]


def check_compensator(cfg: RunConfig) -> TestReport:
    params = cfg.params
    times = compensator_times(params)
    sig, table = _local_time_batch(cfg, "compensator", times)
    report = compensator_residual(sig, table, times + [math.inf], params.lam, name="compensator")
    report.metadata.update(coarse_dt=EXACT_DT, refined_steps=list(LOCAL_TIME_STEPS))
    return report


def check_martingale_b(cfg: RunConfig, s: float = 0.3, t: float = 0.7) -> TestReport:
    params = cfg.params
    inc = np.empty(cfg.n_paths)
    xs = np.empty(cfg.n_paths)
    stream = check_stream(cfg.seed, "martingale-b")
    for i, path in enumerate(path_iter(params, stream, SamplerConfig(dt=EXACT_DT), cfg.n_paths, t_end=t)):
        inc[i] = driving_motion(path, params, t) - driving_motion(path, params, s)
        xs[i] = path.value_at(s)
    weights = {"1": np.ones_like(xs), "xi_s": xs, "1{xi_s<z}": (xs < params.z).astype(float)}
    parts = [martingale_ztest(inc, w, name=f"martingale-b[psi={k}]") for k, w in weights.items()]
    worst = max(abs(p.statistic) for p in parts)
    return _report("martingale-b", parts, worst, min(p.p_value_or_error for p in parts), cfg.n_paths,
                   s=s, t=t, dt=EXACT_DT, z_cut=Z_CUT)


N_TIMES = (0.5, 1.0, 2.0)


def _dynkin_batch(cfg: RunConfig, check: str, times: Sequence[float]) -> np.ndarray:
    params = cfg.params
    h = canonical_test_function(params)
    out = np.empty((cfg.n_paths, len(times)))
    stream = check_stream(cfg.seed, check)
    for i, path in enumerate(path_iter(params, stream, SamplerConfig(dt=EXACT_DT), cfg.n_paths, t_end=max(times))):
        out[i] = dynkin_increments(path, params, h, times)
    return out


def check_martingale_n(cfg: RunConfig) -> TestReport:
    table = _dynkin_batch(cfg, "martingale-N", N_TIMES)
    parts = [martingale_ztest(table[:, j], name=f"martingale-N[t={t:g}]") for j, t in enumerate(N_TIMES)]
    worst = max(abs(p.statistic) for p in parts)
    return _report("martingale-N", parts, worst, min(p.p_value_or_error for p in parts), cfg.n_paths,
                   times=list(N_TIMES), dt=EXACT_DT, z_cut=Z_CUT)


def check_dynkin(cfg: RunConfig, t: float = 1.0) -> TestReport:
    table = _dynkin_batch(cfg, "dynkin", (0.0, t))
    zero = TestReport("dynkin[t=0]", float(np.max(np.abs(table[:, 0]))), 0.0, cfg.n_paths,
                      _verdict(bool(np.all(table[:, 0] == 0.0))), {"rule": "identically zero"})
    main = martingale_ztest(table[:, 1], name=f"dynkin[t={t:g}]")
    return _report("dynkin", [zero, main], main.statistic, main.p_value_or_error, cfg.n_paths, t=t, dt=EXACT_DT)


def check_stopped_b(cfg: RunConfig, t: float = 1.0) -> TestReport:
    """``E[B_{t ^ sigma}]`` is not zero and matches its closed form."""
    params = cfg.params
    vals = np.empty(cfg.n_paths)
    stream = check_stream(cfg.seed, "stopped-b")
    for i, path in enumerate(path_iter(params, stream, SamplerConfig(dt=EXACT_DT), cfg.n_paths, t_end=t)):
        vals[i] = float(path.value_at(t)) - params.lam * min(t, path.sigma)
    target = cond_mean_stopped_B(params, 0.0, 0.0, t, False, None)
    nonzero = martingale_ztest(vals, name="stopped-b[nonzero]")
    if nonzero.verdict is not Verdict.INCONCLUSIVE:
        nonzero.verdict = _verdict(abs(nonzero.statistic) > Z_CUT)
    nonzero.metadata["rule"] = "|z| > 3 (the stopped motion is not a martingale)"
    match = martingale_ztest(vals - target, name="stopped-b[closed-form]", metadata={"target": target})
    return _report("stopped-b", [nonzero, match], match.statistic, match.p_value_or_error, cfg.n_paths, t=t)


def check_jump_scan(cfg: RunConfig) -> TestReport:
    params = cfg.params
    n = max(1, cfg.n_paths // JUMP_SCAN_FRACTION)
    stream = check_stream(cfg.seed, "jump-scan")
    paths = list(path_iter(params, stream, SamplerConfig(dt=EXACT_DT), n))
    main = jump_scan(paths, params, stream.child(n))
    control = jump_scan(paths[: max(1, n // 10)], params, stream.child(n), synthetic_atom=1.0)
    ok = main.passed and control.verdict == Verdict.FAIL
    return TestReport("jump-scan", main.statistic, main.p_value_or_error, n, _verdict(ok),
                      {"scan": main.to_dict(), "negative_control": control.to_dict()})


def check_strong_markov(cfg: RunConfig) -> TestReport:
    report = strong_markov_violation_test(cfg.params, check_stream(cfg.seed, "strong-markov"), cfg.n_paths,
                                          dt=EXACT_DT)
    report.name = "strong-markov"
    return report


# ---------------------------------------------------------------------------
# the approximate samplers against the exact law

def _approx_sigma_check(cfg: RunConfig, name: str, sampler: Callable) -> TestReport:
    params = cfg.params
    n = max(1, cfg.n_paths // APPROX_FRACTION)
    stream = check_stream(cfg.seed, name)
    config = SamplerConfig(dt=cfg.dt)
    sig = np.empty(n)
    flagged = 0
    for i in range(n):
        sig[i], suspect = sampler(params, stream.child(i), config)
        flagged += int(suspect)
    allowance = 2.0 * math.sqrt(cfg.dt)
    return ks_test(ecdf(sig), lambda t: ac.sigma_cdf(params, t), name=name, allowance=allowance,
                   metadata={"dt": cfg.dt, "flagged_paths": flagged, "epsilon": config.epsilon,
                             "horizon": config.resolved_horizon(params), "tail_delta": config.tail_delta})


def check_oracle_bruteforce(cfg: RunConfig) -> TestReport:
    return _approx_sigma_check(cfg, "oracle-bruteforce", sample_bruteforce_sigma)


def check_oracle_bangbang(cfg: RunConfig) -> TestReport:
    return _approx_sigma_check(cfg, "oracle-bangbang", sample_bangbang_sigma)


CHECKS: Dict[str, Callable[[RunConfig], TestReport]] = {
    "integrals": check_integrals,
    "nonfeller": check_nonfeller,
    "semigroup": check_semigroup,
    "generator": check_generator,
    "pde": check_pde,
    "law-sigma": check_law_sigma,
    "sigma-mean": check_sigma_mean,
    "law-suptest": check_law_sup,
    "law-localtime": check_law_localtime,
    "martingale-b": check_martingale_b,
    "martingale-N": check_martingale_n,
    "compensator": check_compensator,
    "stopped-b": check_stopped_b,
    "jump-scan": check_jump_scan,
    "strong-markov": check_strong_markov,
    "dynkin": check_dynkin,
    "oracle-bruteforce": check_oracle_bruteforce,
    "oracle-bangbang": check_oracle_bangbang,
}
CHECK_ORDER = tuple(CHECKS)
PURE_CHECKS = ("integrals", "nonfeller", "semigroup", "generator", "pde")


def run_check(cfg: RunConfig, name: str) -> TestReport:
    if name not in CHECKS:
        raise UsageError(f"unknown check {name!r}; valid: {', '.join(CHECK_ORDER)}")
    report = CHECKS[name](cfg)
    report.metadata.setdefault("seed", cfg.seed)
    report.metadata.setdefault("stream_base", check_stream(cfg.seed, name).stream_id)
    return report


@dataclass
class SuiteReport:
    config: dict
    reports: List[TestReport]
    verdict: Verdict
    wall_clock_s: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_wall_clock: bool = True) -> dict:
        out = {"config": to_plain(self.config), "reports": [r.to_dict() for r in self.reports],
               "verdict": Verdict(self.verdict).value}
        if include_wall_clock:
            out["wall_clock_s"] = to_plain(self.wall_clock_s)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SuiteReport":
        return cls(data["config"], [TestReport.from_dict(r) for r in data["reports"]], Verdict(data["verdict"]),
                   dict(data.get("wall_clock_s", {})))


def run_suite(cfg: RunConfig, progress: Optional[Callable[[str, TestReport, float], None]] = None) -> SuiteReport:
    names = cfg.suite if cfg.suite is not None else list(CHECK_ORDER)
    # keep the documented order whatever order the caller listed them in
    names = [c for c in CHECK_ORDER if c in names]
    reports, clock = [], {}
    for name in names:
        start = time.perf_counter()
        report = run_check(cfg, name)
        clock[name] = time.perf_counter() - start
        reports.append(report)
        if progress is not None:
            progress(name, report, clock[name])
    return SuiteReport(cfg.echo(), reports, combine_verdicts([r.verdict for r in reports]), clock)
