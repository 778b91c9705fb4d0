"""Exact, brute-force and bang-bang samplers."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from lastpassage import analytic_core as ac
from lastpassage import sampler as sp
from lastpassage.analytic_core import ModelParams
from lastpassage.errors import ConfigurationError, DomainError, UsageError
from lastpassage.estimators import local_time_estimate, quad_var_estimate
from lastpassage.kernels import transition_expectation
from lastpassage.sampler import PathGrid, RngStream, SamplerConfig


def sigma_cdf_fn(params):
    return lambda t: ac.sigma_cdf(params, np.asarray(t))


def same_path(a: PathGrid, b: PathGrid) -> bool:
    return (np.array_equal(a.times, b.times) and np.array_equal(a.values, b.values)
            and a.sigma == b.sigma and a.absorbed_index == b.absorbed_index)


# ---------------------------------------------------------------------------
# streams and sigma

def test_stream_determinism():
    a = RngStream(7, 3).generator().standard_normal(5)
    b = RngStream(7, 3).generator().standard_normal(5)
    c = RngStream(7, 4).generator().standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_stream_rejects_negative():
    with pytest.raises(DomainError):
        RngStream(-1)
    with pytest.raises(DomainError):
        RngStream(1, -2)


def test_sample_sigma_stubbed_uniform(unit):
    u = float(ac.sigma_cdf(unit, 1.0))
    assert sp.sample_sigma(unit, None, u=u) == pytest.approx(1.0, abs=1e-9)


def test_sample_sigma_deterministic(unit):
    assert sp.sample_sigma(unit, RngStream(5, 1)) == sp.sample_sigma(unit, RngStream(5, 1))


def test_sample_sigmas_match_exact_paths(unit):
    rs = RngStream(11, 100)
    sig = sp.sample_sigmas(unit, rs, 6)
    paths = sp.path_batch(unit, rs, SamplerConfig(dt=0.1), 6)
    assert np.array_equal(sig, [p.sigma for p in paths])
    assert sp.sample_exact_path(unit, rs.child(2), 0.1).sigma == sig[2]


def test_sigma_marginal_ks(unit):
    sig = sp.sample_sigmas(unit, RngStream(2025, 0), 20000)
    assert stats.kstest(sig, sigma_cdf_fn(unit)).pvalue > 0.01


# ---------------------------------------------------------------------------
# exact paths

def test_exact_path_ends_at_level(unit):
    for i in range(20):
        p = sp.sample_exact_path(unit, RngStream(3, i), 0.01)
        assert p.values[-1] == unit.z
        assert p.times[-1] == p.sigma
        assert p.absorbed_index == len(p) - 1
        p.check_invariants()


def test_exact_path_past_sigma_is_constant(unit):
    p = sp.sample_exact_path(unit, RngStream(3, 0), 0.01, t_end=30.0)
    assert p.t_end == pytest.approx(30.0)
    assert np.all(p.values[p.times >= p.sigma] == unit.z)
    assert p.sigma in p.times
    assert np.all(p.alive() == (p.times < p.sigma))


def test_exact_path_stopped_before_sigma(unit):
    p = sp.sample_exact_path(unit, RngStream(3, 1), 0.01, t_end=1e-2 * 3)
    assert p.sigma > p.t_end
    assert p.absorbed_index is None
    with pytest.raises(UsageError):
        p.value_at(p.t_end + 1.0)


def test_exact_path_rejects_bad_step(unit):
    with pytest.raises(DomainError):
        sp.sample_exact_path(unit, RngStream(0), 0.0)


@given(st.floats(0.3, 3.0), st.floats(0.1, 2.0), st.sampled_from([0.5, 0.05, 0.003]),
       st.integers(0, 10**6), st.one_of(st.none(), st.floats(0.01, 5.0)))
def test_exact_path_invariants(lam, z, dt, stream, t_end):
    p = ModelParams(lam, z)
    path = sp.sample_exact_path(p, RngStream(1, stream), dt, t_end=t_end)
    path.check_invariants()
    assert path.values[0] == 0.0 and path.times[0] == 0.0
    if path.absorbed_index is not None:
        assert path.times[path.absorbed_index] == path.sigma
        assert path.value_at(path.sigma) == z


def test_exact_marginal_moments(unit):
    """Mean and second moment of the value at t = 0.5 against the kernel."""
    rs = RngStream(99, 0)
    vals = np.array([p.value_at(0.5) for p in sp.path_iter(unit, rs, SamplerConfig(dt=0.25), 20000, t_end=0.5)])
    for k in (1, 2):
        target = transition_expectation(unit, 0.5, 0.0, lambda y, k=k: y**k)
        se = (vals**k).std(ddof=1) / math.sqrt(vals.size)
        assert abs((vals**k).mean() - target) < 3 * se


def test_quadratic_variation_close_to_sigma(unit):
    rel = []
    for p in sp.path_iter(unit, RngStream(8, 0), SamplerConfig(dt=1e-4), 200):
        rel.append(abs(quad_var_estimate(p, p.sigma) - p.sigma) / p.sigma)
    assert np.mean(rel) <= 0.05


# ---------------------------------------------------------------------------
# refinement

def test_refine_inserts_bridge_points(unit):
    base = PathGrid(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.0, 1.0]), 2.0, 2, 1.0)
    mids = np.array([[v for t, v in zip(r.times, r.values) if t in (0.5, 1.5)]
                     for r in (sp.refine_near_level(base, np.random.default_rng(i), 1.0, 0.5, np.inf)
                               for i in range(4000))])
    assert mids.shape == (4000, 2)
    assert mids[:, 0].mean() == pytest.approx(0.0, abs=3 * 0.5 / math.sqrt(4000))
    assert mids[:, 1].mean() == pytest.approx(0.5, abs=3 * 0.5 / math.sqrt(4000))
    assert mids.var(axis=0) == pytest.approx([0.25, 0.25], rel=0.1)


def test_refine_keeps_nodes_and_invariants(unit):
    p = sp.sample_exact_path(unit, RngStream(4, 2), 1e-2)
    r = sp.refine_near_level(p, np.random.default_rng(0), unit.z, 1e-3, 0.1)
    r.check_invariants()
    assert np.all(np.isin(p.times, r.times))
    assert np.all(np.diff(r.times) > 0)
    assert r.times[r.absorbed_index] == p.sigma
    near = np.minimum(np.abs(r.values[:-1] - unit.z), np.abs(r.values[1:] - unit.z)) < 0.1
    assert np.all(np.diff(r.times)[near & (r.times[1:] <= p.sigma)] <= 1e-3 * (1 + 1e-9))


def test_refine_schedule():
    sched = sp.refine_schedule(1e-3, [1e-4, 1e-5], 0.01)
    assert [f for f, _ in sched] == [1e-4, 1e-5]
    assert sched[0][1] == pytest.approx(5 * math.sqrt(1e-3) + 0.01)
    with pytest.raises(ConfigurationError):
        sp.refine_schedule(1e-3, [1e-3], 0.01)


# ---------------------------------------------------------------------------
# brute force

def test_config_validation(unit):
    with pytest.raises(ConfigurationError):
        SamplerConfig(dt=0.0)
    with pytest.raises(ConfigurationError):
        SamplerConfig(tail_delta=1.0)
    with pytest.raises(ConfigurationError):
        SamplerConfig(horizon=-1.0)
    assert SamplerConfig(dt=1e-4).epsilon == pytest.approx(0.02)


def test_short_horizon_is_configuration_error(unit):
    cfg = SamplerConfig(dt=1e-3, horizon=1.0)
    with pytest.raises(ConfigurationError):
        cfg.resolved_horizon(unit)
    with pytest.raises(ConfigurationError):
        sp.sample_bruteforce_path(unit, RngStream(0), cfg)


def test_resolved_horizon_caps_tail(unit):
    cfg = SamplerConfig(dt=1e-3)
    h = cfg.resolved_horizon(unit)
    assert ac.sigma_survival(unit, h) <= cfg.tail_delta
    assert ac.sigma_survival(unit, h - 2 * cfg.dt) > cfg.tail_delta


def test_bruteforce_terminal_value_above_level(unit):
    cfg = SamplerConfig(dt=1e-3)
    for p in sp.path_iter(unit, RngStream(6, 0), cfg, 200, method="bruteforce"):
        p.check_invariants()
        if not p.truncation_suspect:
            assert p.sigma <= p.t_end


def test_bruteforce_law(unit):
    cfg = SamplerConfig(dt=1e-3)
    n = 2000
    sig = np.array([sp.sample_bruteforce_sigma(unit, RngStream(12, i), cfg)[0] for i in range(n)])
    d = stats.kstest(sig, sigma_cdf_fn(unit)).statistic
    assert d <= stats.kstwobign.isf(0.01) / math.sqrt(n) + 2 * math.sqrt(cfg.dt)


def _last_crossing(values, dt, z):
    below = np.flatnonzero(values[:-1] <= z)
    j = below[-1]
    a, b = values[j], values[j + 1]
    return (j + min(max((z - a) / (b - a), 0.0), 1.0)) * dt


def test_bruteforce_error_shrinks_with_step(unit):
    """Coupled walks: one fine Brownian path read at steps 16h, 4h and h."""
    fine_dt, horizon = 1e-4, 12.0
    gen = np.random.default_rng(77)
    errs = {16: [], 4: []}
    for _ in range(60):
        w = np.concatenate(([0.0], np.cumsum(math.sqrt(fine_dt) * gen.standard_normal(int(horizon / fine_dt)))))
        x = w + unit.lam * fine_dt * np.arange(w.size)
        ref = _last_crossing(x, fine_dt, unit.z)
        for k in errs:
            errs[k].append(abs(_last_crossing(x[::k], k * fine_dt, unit.z) - ref))
    assert np.mean(errs[4]) < np.mean(errs[16])


def test_bruteforce_refined_crossings_runs(unit):
    cfg = SamplerConfig(dt=1e-3, refine_crossings=True)
    s, _ = sp.sample_bruteforce_sigma(unit, RngStream(1, 5), cfg)
    plain, _ = sp.sample_bruteforce_sigma(unit, RngStream(1, 5), SamplerConfig(dt=1e-3))
    assert s >= plain


# ---------------------------------------------------------------------------
# bang-bang

def test_bangbang_law(unit):
    cfg = SamplerConfig(dt=1e-3)
    n = 2000
    sig = np.array([sp.sample_bangbang_sigma(unit, RngStream(13, i), cfg)[0] for i in range(n)])
    d = stats.kstest(sig, sigma_cdf_fn(unit)).statistic
    assert d <= stats.kstwobign.isf(0.01) / math.sqrt(n) + 2 * math.sqrt(cfg.dt)


def test_bangbang_local_time_at_kill_is_exponential(unit):
    cfg = SamplerConfig(dt=1e-3)
    clocks = []
    for i in range(3000):
        sigma, _, _, clock = sp._bangbang_walk(unit, RngStream(14, i).generator(), cfg, keep_path=False)
        clocks.append(clock)
    assert stats.kstest(clocks, "expon", args=(0, 1 / unit.lam)).pvalue > 0.01


def test_bangbang_path_local_time_reaches_clock(unit):
    cfg = SamplerConfig(dt=1e-3)
    for i in range(20):
        _, _, _, clock = sp._bangbang_walk(unit, RngStream(15, i).generator(), cfg, keep_path=False)
        path = sp.sample_killed_bangbang_path(unit, RngStream(15, i), cfg)
        path.check_invariants()
        lt = local_time_estimate(path, unit.z, cfg.epsilon, t=path.times[-2])
        assert lt <= clock + 1e-12
        assert clock - lt <= cfg.dt / (2 * cfg.epsilon) + 1e-12


def test_bangbang_drift_sign(unit):
    cfg = SamplerConfig(dt=1e-3)
    below, above = [], []
    for p in sp.path_iter(unit, RngStream(16, 0), cfg, 300, method="bangbang"):
        x, dx = p.values[:-2], np.diff(p.values[:-1])
        below.append(dx[x < unit.z])
        above.append(dx[x > unit.z])
    for inc, sign in ((np.concatenate(below), 1.0), (np.concatenate(above), -1.0)):
        se = inc.std(ddof=1) / math.sqrt(inc.size)
        assert abs(inc.mean() - sign * unit.lam * cfg.dt) < 3 * se


# ---------------------------------------------------------------------------
# batches and export

def test_batch_single_equals_direct(unit):
    cfg = SamplerConfig(dt=0.01)
    rs = RngStream(21, 40)
    (only,) = sp.path_batch(unit, rs, cfg, 1)
    assert same_path(only, sp.sample_exact_path(unit, rs, cfg.dt))


@pytest.mark.parametrize("method", sp.METHODS)
def test_batch_partition_invariance(unit, method):
    cfg = SamplerConfig(dt=0.01)
    rs = RngStream(22, 0)
    whole = sp.path_batch(unit, rs, cfg, 10, method)
    split = sp.path_batch(unit, rs, cfg, 5, method) + sp.path_batch(unit, rs.child(5), cfg, 5, method)
    assert all(same_path(a, b) for a, b in zip(whole, split))
    chunked = list(sp.path_iter(unit, rs, cfg, 10, method, chunk=3))
    assert all(same_path(a, b) for a, b in zip(whole, chunked))


def test_batch_errors(unit):
    with pytest.raises(UsageError):
        sp.path_batch(unit, RngStream(0), SamplerConfig(), 3, method="euler")
    with pytest.raises(UsageError):
        sp.path_batch(unit, RngStream(0), SamplerConfig(), 0)


def test_csv_round_trip(unit, tmp_path):
    p = sp.sample_exact_path(unit, RngStream(9, 9), 0.01, t_end=5.0)
    csv_path, side = sp.write_path_csv(p, tmp_path / "path.csv", unit)
    assert csv_path.read_text().splitlines()[0] == "t,value"
    back = sp.read_path_csv(csv_path)
    assert same_path(p, back)
    meta = back.sidecar()
    assert meta["seed"] == 9 and meta["stream_id"] == 9 and meta["method"] == "exact"
    import json
    assert json.loads(side.read_text())["lambda"] == unit.lam
