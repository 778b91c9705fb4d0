"""Path samplers for the drifted Brownian motion stopped at its last passage time.

Three independent routes produce trajectories:

``exact``
    Draw ``sigma`` by inverting its distribution function, then fill ``[0, sigma]``
    with a driftless Brownian bridge from 0 to ``z``. Given ``sigma = r`` the
    pre-``sigma`` path is the drifted motion conditioned to sit at ``z`` at time
    ``r``; conditioning on the endpoint removes the drift, so the bridge is
    exact at every grid node. ``sigma`` itself is stored exactly and appears as
    a node of the grid.

``bruteforce``
    Simulate ``B_t + lam t`` up to a horizon and read off the last grid interval
    where ``value - z`` changes sign.

``bangbang``
    Euler scheme for the semimartingale dynamics ``d xi = db + lam sgn(z - xi) dt``
    with killing once the accumulated local time at ``z`` exceeds an independent
    exponential clock of rate ``lam``.

Every path owns an :class:`RngStream`; batches derive stream ids as
``base + index`` so path ``i`` does not depend on how a batch is partitioned.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .analytic_core import ModelParams, sigma_quantile, sigma_survival
from ._compiled import bridge_fill, njit
from .errors import ConfigurationError, DomainError, UsageError

METHODS = ("exact", "bruteforce", "bangbang")
_CHUNK = 1 << 16


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Each call to :meth:`generator` returns a fresh PCG64 generator in the same
    initial state, so equal pairs reproduce equal output bit for bit.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream_id < 0:
            raise DomainError("seed and stream_id must be nonnegative integers")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, offset: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + int(offset))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise UsageError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


@dataclass(frozen=True)
class SamplerConfig:
    """Grid step and the extra knobs used by the approximate samplers.

    ``horizon=None`` lets the brute-force sampler pick the smallest grid time
    with ``P(sigma > horizon) <= tail_delta``. ``epsilon_loc=None`` means the
    default band half-width ``2 sqrt(dt)``.
    """

    dt: float = 1e-3
    horizon: Optional[float] = None
    tail_delta: float = 1e-4
    epsilon_loc: Optional[float] = None
    refine_crossings: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError("dt must be a positive real")
        if not 0.0 < self.tail_delta < 1.0:
            raise ConfigurationError("tail_delta must lie in (0, 1)")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigurationError("horizon must be positive")
        if self.epsilon_loc is not None and not self.epsilon_loc > 0:
            raise ConfigurationError("epsilon_loc must be positive")

    @property
    def epsilon(self) -> float:
        return self.epsilon_loc if self.epsilon_loc is not None else 2.0 * math.sqrt(self.dt)

    def resolved_horizon(self, params: ModelParams) -> float:
        """Horizon that caps the untruncated tail mass of ``sigma`` by ``tail_delta``."""
        if self.horizon is None:
            t = float(sigma_quantile(params, np.array([1.0 - self.tail_delta]))[0])
            return math.ceil(t / self.dt) * self.dt
        if sigma_survival(params, self.horizon) > self.tail_delta:
            raise ConfigurationError(
                f"horizon {self.horizon} leaves tail mass {sigma_survival(params, self.horizon):.3g}"
                f" > tail_delta {self.tail_delta}")
        return float(self.horizon)


@dataclass
class PathGrid:
    """One trajectory of the stopped process on a (possibly non-uniform) grid.

    ``times`` starts at 0 and is nondecreasing, ``values[0] = 0`` and every node
    at or after ``sigma`` holds ``z``. ``absorbed_index`` is the first node with
    ``times >= sigma`` (``None`` when the grid stops before ``sigma``).
    """

    times: np.ndarray
    values: np.ndarray
    sigma: float
    absorbed_index: Optional[int]
    z: float
    method: str = "exact"
    dt: float = float("nan")
    seed: Optional[int] = None
    stream_id: Optional[int] = None
    truncation_suspect: bool = False

    def __len__(self):
        return len(self.times)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def alive(self) -> np.ndarray:
        """First coordinate of the augmented process at each node."""
        return (self.times < self.sigma).astype(np.int8)

    def value_at(self, t) -> np.ndarray:
        """Linear interpolation of the grid path; constant ``z`` from ``sigma`` on.

        Times past the last node are allowed once the grid has reached ``sigma``.
        """
        t = np.asarray(t, dtype=float)
        reach = math.inf if self.t_end >= self.sigma else self.t_end + 1e-12
        if np.any(t > reach) or np.any(t < 0):
            raise UsageError("time outside the sampled grid")
        out = np.interp(t, self.times, self.values)
        return np.where(t >= self.sigma, self.z, out)

    def check_invariants(self, atol: float = 0.0) -> None:
        if self.times[0] != 0.0 or self.values[0] != 0.0:
            raise AssertionError("path must start at (0, 0)")
        if np.any(np.diff(self.times) < 0):
            raise AssertionError("times must be nondecreasing")
        after = self.times >= self.sigma
        if np.any(np.abs(self.values[after] - self.z) > atol):
            raise AssertionError("nodes at or after sigma must equal z")

    def sidecar(self) -> dict:
        return {
            "sigma": float(self.sigma),
            "lambda": None,
            "z": float(self.z),
            "dt": float(self.dt),
            "method": self.method,
            "seed": self.seed,
            "stream_id": self.stream_id,
        }


# ---------------------------------------------------------------------------
# exact sampler

def sample_sigma(params: ModelParams, rng, u: Optional[float] = None) -> float:
    """One draw of ``sigma`` by inversion. ``u`` overrides the uniform (for tests)."""
    if u is None:
        u = _as_generator(rng).random()
    return float(sigma_quantile(params, np.array([u]))[0])


def sample_sigmas(params: ModelParams, rng: RngStream, n: int) -> np.ndarray:
    """``n`` draws of ``sigma``, draw ``i`` taken from stream ``rng.stream_id + i``.

    Each draw is the first uniform of its stream, so it coincides with the
    ``sigma`` of the exact path sampled from the same stream.
    """
    u = np.array([rng.child(i).generator().random() for i in range(n)])
    return sigma_quantile(params, u)


def _uniform_grid(t_stop: float, dt: float) -> np.ndarray:
    k = int(math.floor(t_stop / dt + 1e-9))
    grid = np.arange(k + 1, dtype=float) * dt
    if t_stop - grid[-1] > 1e-12 * max(1.0, t_stop):
        grid = np.append(grid, t_stop)
    else:
        grid[-1] = t_stop
    return grid


def _exact_path(params: ModelParams, gen: np.random.Generator, sigma: float, dt: float,
                t_end: Optional[float]) -> Tuple[np.ndarray, np.ndarray, Optional[int]]:
    z = params.z
    horizon = sigma if t_end is None else t_end
    grid = _uniform_grid(horizon, dt)
    before = grid[grid < sigma]              # bridge nodes, includes t = 0
    # Brownian increments on the bridge nodes, then the last stretch up to sigma
    steps = np.diff(before)
    w = np.empty(before.size)
    w[0] = 0.0
    if steps.size:
        w[1:] = np.cumsum(np.sqrt(steps) * gen.standard_normal(steps.size))
    w_sigma = w[-1] + math.sqrt(max(sigma - before[-1], 0.0)) * gen.standard_normal()
    bridge = w - (before / sigma) * (w_sigma - z)
    bridge[0] = 0.0
    if t_end is not None and t_end < sigma:
        return before, bridge, None
    after = grid[grid > sigma]
    times = np.concatenate([before, [sigma], after])
    values = np.concatenate([bridge, np.full(1 + after.size, z)])
    return times, values, before.size


def sample_exact_path(params: ModelParams, rng, dt: float, t_end: Optional[float] = None,
                      sigma: Optional[float] = None) -> PathGrid:
    """Exact path on the grid ``k*dt`` with ``sigma`` inserted as a node.

    Without ``t_end`` the grid stops at ``sigma``; otherwise it covers
    ``[0, t_end]`` and is constant ``z`` after ``sigma``. ``sigma`` may be
    supplied when it was drawn beforehand from the same stream (batch code does
    this to vectorise the inversion); the uniform is then still consumed so the
    remaining draws line up.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    gen = _as_generator(rng)
    u = gen.random()
    if sigma is None:
        sigma = float(sigma_quantile(params, np.array([u]))[0])
    times, values, idx = _exact_path(params, gen, sigma, dt, t_end)
    return PathGrid(times, values, sigma, idx, params.z, method="exact", dt=dt,
                    seed=getattr(rng, "seed", None), stream_id=getattr(rng, "stream_id", None))


def refine_near_level(path: PathGrid, gen: np.random.Generator, level: float, fine_dt: float,
                      halo: float) -> PathGrid:
    """Insert exact bridge points into pre-``sigma`` steps that come near ``level``.

    A step ``[t_i, t_{i+1}]`` longer than ``fine_dt`` with an endpoint within
    ``halo`` of ``level`` is cut into ``ceil(step / fine_dt)`` equal pieces and the new nodes are drawn from
    the Brownian bridge between the two endpoint values. Given the grid, the
    pre-``sigma`` path is a chain of independent bridges, so the refined path is
    still an exact sample of the process at all of its nodes.
    """
    t, x = path.times, path.values
    pre = t[1:] <= path.sigma
    near = np.minimum(np.abs(x[:-1] - level), np.abs(x[1:] - level)) < halo
    span = np.diff(t)
    pick = np.flatnonzero(pre & near & (span > fine_dt * (1.0 + 1e-9)))
    if pick.size == 0:
        return path
    counts = np.ceil(span[pick] / fine_dt - 1e-9).astype(np.int64)
    extra = np.zeros(t.size, dtype=np.int64)
    extra[pick] = counts - 1
    # position of each original node in the merged arrays
    pos = np.arange(t.size) + np.concatenate(([0], np.cumsum(extra[:-1])))
    size = t.size + int(extra.sum())
    times = np.empty(size)
    values = np.empty(size)
    times[pos] = t
    values[pos] = x
    normals = gen.standard_normal(int(counts.sum()))
    bridge_fill(t, x, pick, counts, pos, normals, times, values)
    idx = None if path.absorbed_index is None else int(np.searchsorted(times, path.sigma, side="left"))
    return replace(path, times=times, values=values, absorbed_index=idx)


def refine_schedule(dt: float, levels: Sequence[float], epsilon_max: float,
                    halo_sd: float = 5.0) -> List[Tuple[float, float]]:
    """``(fine_dt, halo)`` pairs for successive refinements starting from ``dt``.

    The halo at each stage is ``halo_sd`` bridge standard deviations of the
    current step plus ``epsilon_max``. A bridge step whose endpoints both sit
    further than ``h + epsilon_max`` from the level enters the band with
    probability below ``exp(-2 h^2 / step)``, i.e. ``exp(-50)`` for the default.
    """
    out = []
    current = dt
    for fine in levels:
        if not fine < current:
            raise ConfigurationError("refinement steps must decrease")
        out.append((fine, halo_sd * math.sqrt(current) + epsilon_max))
        current = fine
    return out


# ---------------------------------------------------------------------------
# brute-force sampler

def _bruteforce_walk(params: ModelParams, gen: np.random.Generator, config: SamplerConfig,
                     keep_path: bool):
    lam, z, dt = params.lam, params.z, config.dt
    horizon = config.resolved_horizon(params)
    n = int(round(horizon / dt))
    sd = math.sqrt(dt)
    x_prev = 0.0
    last_idx = None            # last node index i < n with value_i <= z
    pair = (0.0, 0.0)          # (value_i, value_{i+1}) at that index
    kept = [np.zeros(1)] if keep_path else None
    near = []                  # steps entirely above z, with their bridge-crossing probability
    done = 0
    while done < n:
        m = min(_CHUNK, n - done)
        vals = x_prev + np.cumsum(lam * dt + sd * gen.standard_normal(m))
        arr = np.concatenate(([x_prev], vals))   # nodes done .. done + m
        below = np.flatnonzero(arr[:-1] <= z)
        if below.size:
            j = below[-1]
            last_idx, pair = done + j, (arr[j], arr[j + 1])
        if config.refine_crossings:
            gap = (arr[:-1] - z) * (arr[1:] - z)
            cand = np.flatnonzero((arr[:-1] > z) & (arr[1:] > z) & (gap < 20.0 * dt))
            if cand.size:
                near.append((done + cand, np.exp(-2.0 * gap[cand] / dt)))
        if keep_path:
            kept.append(vals)
        x_prev = vals[-1]
        done += m
    margin = math.log(1.0 / config.tail_delta) / (2.0 * lam)
    no_crossing = x_prev <= z
    suspect = bool(no_crossing or x_prev < z + margin)
    if no_crossing:
        sigma_hat = n * dt
    elif last_idx is None:
        sigma_hat = 0.0
    else:
        a, b = pair
        frac = (z - a) / (b - a)
        sigma_hat = (last_idx + min(max(frac, 0.0), 1.0)) * dt
        if config.refine_crossings and near:
            steps = np.concatenate([s for s, _ in near])
            probs = np.concatenate([p for _, p in near])
            later = steps > last_idx
            steps, probs = steps[later][::-1], probs[later][::-1]
            hits = np.flatnonzero(gen.random(steps.size) < probs)
            if hits.size:
                # a hidden excursion to z inside a later step; place it mid-step
                sigma_hat = (steps[hits[0]] + 0.5) * dt
    path = (np.arange(n + 1) * dt, np.concatenate(kept)) if keep_path else None
    return sigma_hat, suspect, path


def sample_bruteforce_sigma(params: ModelParams, rng, config: SamplerConfig) -> Tuple[float, bool]:
    """Estimated last passage time and truncation flag, without storing the path."""
    sigma_hat, suspect, _ = _bruteforce_walk(params, _as_generator(rng), config, keep_path=False)
    return sigma_hat, suspect


def sample_bruteforce_path(params: ModelParams, rng, config: SamplerConfig) -> PathGrid:
    """Brute-force path up to the horizon with the estimated ``sigma`` as a node.

    The path after the estimated ``sigma`` is overwritten with ``z``. Paths
    whose terminal value is within ``log(1/tail_delta) / (2 lam)`` of ``z`` (the
    distance below which a later return has probability above ``tail_delta``)
    are flagged ``truncation_suspect``.
    """
    sigma_hat, suspect, (times, values) = _bruteforce_walk(params, _as_generator(rng), config, keep_path=True)
    keep = times < sigma_hat
    times = np.concatenate([times[keep], [sigma_hat], times[~keep & (times > sigma_hat)]])
    values = np.concatenate([values[keep], np.full(times.size - keep.sum(), params.z)])
    return PathGrid(times, values, sigma_hat, int(keep.sum()), params.z, method="bruteforce",
                    dt=config.dt, seed=getattr(rng, "seed", None),
                    stream_id=getattr(rng, "stream_id", None), truncation_suspect=suspect)


# ---------------------------------------------------------------------------
# killed bang-bang sampler

@njit(cache=True)
def _bangbang_block(x, local, clock, lam, z, dt, eps, normals, out):
    """Advance the Euler scheme over one block of normals.

    Returns ``(steps_used, x, local, killed, fraction)`` where ``fraction`` is
    the position inside the killing step at which the local time met ``clock``.
    """
    sd = math.sqrt(dt)
    lo = z - eps
    hi = z + eps
    for i in range(normals.shape[0]):
        if x < z:
            drift = lam
        elif x > z:
            drift = -lam
        else:
            drift = 0.0
        y = x + drift * dt + sd * normals[i]
        # exact band time of the straight segment x -> y
        if y == x:
            frac = 1.0 if (x > lo and x < hi) else 0.0
        else:
            s1 = (lo - x) / (y - x)
            s2 = (hi - x) / (y - x)
            enter = min(s1, s2)
            leave = max(s1, s2)
            enter = min(max(enter, 0.0), 1.0)
            leave = min(max(leave, 0.0), 1.0)
            frac = leave - enter
        gain = frac * dt / (2.0 * eps)
        if local + gain >= clock:
            where = (clock - local) / gain if gain > 0 else 1.0
            out[i] = y
            return i + 1, y, clock, True, where
        local += gain
        x = y
        out[i] = y
    return normals.shape[0], x, local, False, 1.0


def _bangbang_walk(params: ModelParams, gen: np.random.Generator, config: SamplerConfig, keep_path: bool):
    lam, z, dt = params.lam, params.z, config.dt
    eps = config.epsilon
    clock = gen.exponential(1.0 / lam)
    horizon = config.horizon if config.horizon is not None else config.resolved_horizon(params)
    n_max = int(round(horizon / dt))
    x, local, steps = 0.0, 0.0, 0
    pieces = [np.zeros(1)] if keep_path else None
    killed, where = False, 1.0
    while steps < n_max and not killed:
        m = min(_CHUNK, n_max - steps)
        normals = gen.standard_normal(m)
        out = np.empty(m)
        used, x, local, killed, where = _bangbang_block(x, local, clock, lam, z, dt, eps, normals, out)
        if keep_path:
            pieces.append(out[:used])
        steps += used
    if killed:
        sigma = (steps - 1 + where) * dt
    else:
        sigma = steps * dt
    path = np.concatenate(pieces) if keep_path else None
    return sigma, not killed, path, clock


def sample_bangbang_sigma(params: ModelParams, rng, config: SamplerConfig) -> Tuple[float, bool]:
    """Killing time of the bang-bang scheme and a flag for paths that hit the horizon."""
    sigma, suspect, _, _ = _bangbang_walk(params, _as_generator(rng), config, keep_path=False)
    return sigma, suspect


def sample_killed_bangbang_path(params: ModelParams, rng, config: SamplerConfig) -> PathGrid:
    """Euler path of the bang-bang dynamics, killed at rate ``lam`` per unit local time.

    Local time at ``z`` accumulates as ``(band time of the step) / (2 eps)`` with
    ``eps = config.epsilon``; the path is absorbed (held at ``z``) when this
    reaches an independent ``Exp(lam)`` clock. The killing time is located
    inside its step by linear interpolation of the accumulated local time.
    """
    sigma, suspect, values, _ = _bangbang_walk(params, _as_generator(rng), config, keep_path=True)
    times = np.arange(values.size) * config.dt
    keep = times < sigma
    times = np.concatenate([times[keep], [sigma]])
    values = np.concatenate([values[keep], [params.z]])
    return PathGrid(times, values, sigma, int(keep.sum()), params.z, method="bangbang",
                    dt=config.dt, seed=getattr(rng, "seed", None),
                    stream_id=getattr(rng, "stream_id", None), truncation_suspect=suspect)


# ---------------------------------------------------------------------------
# batches and export

def path_iter(params: ModelParams, rng: RngStream, config: SamplerConfig, n: int, method: str = "exact",
              t_end: Optional[float] = None, chunk: int = 2048) -> Iterator[PathGrid]:
    """Yield ``n`` paths lazily; path ``i`` uses stream ``rng.stream_id + i``.

    For the exact method the inversions of ``sigma`` are vectorised per chunk;
    each path consumes its own first uniform for that, exactly as a direct call.
    """
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if n < 1:
        raise UsageError("n must be at least 1")
    for start in range(0, n, chunk):
        streams = [rng.child(i) for i in range(start, min(n, start + chunk))]
        if method == "exact":
            gens = [s.generator() for s in streams]
            sigmas = sigma_quantile(params, np.array([g.random() for g in gens]))
            for s, g, sig in zip(streams, gens, sigmas):
                times, values, idx = _exact_path(params, g, float(sig), config.dt, t_end)
                yield PathGrid(times, values, float(sig), idx, params.z, method="exact", dt=config.dt,
                               seed=s.seed, stream_id=s.stream_id)
        elif method == "bruteforce":
            for s in streams:
                yield sample_bruteforce_path(params, s, config)
        else:
            for s in streams:
                yield sample_killed_bangbang_path(params, s, config)


def path_batch(params: ModelParams, rng: RngStream, config: SamplerConfig, n: int,
               method: str = "exact", t_end: Optional[float] = None) -> List[PathGrid]:
    """``n`` paths as a list (see :func:`path_iter`)."""
    return list(path_iter(params, rng, config, n, method, t_end))


def write_path_csv(path: PathGrid, csv_path: Union[str, Path], params: ModelParams) -> Tuple[Path, Path]:
    """Write ``t,value`` rows and a JSON sidecar next to them; returns both paths."""
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "value"])
        for t, v in zip(path.times, path.values):
            writer.writerow([repr(float(t)), repr(float(v))])
    meta = path.sidecar()
    meta["lambda"] = params.lam
    side = csv_path.with_suffix(".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, side


def read_path_csv(csv_path: Union[str, Path]) -> PathGrid:
    """Inverse of :func:`write_path_csv`."""
    csv_path = Path(csv_path)
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    times, values = data[:, 0], data[:, 1]
    sigma = meta["sigma"]
    idx = int(np.searchsorted(times, sigma, side="left")) if times[-1] >= sigma else None
    return PathGrid(times, values, sigma, idx, meta["z"], method=meta["method"], dt=meta["dt"],
                    seed=meta["seed"], stream_id=meta["stream_id"])
