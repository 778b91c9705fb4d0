"""Explicit finite differences for the backward equation of the augmented process.

On the alive layer ``u(t, y) = Q_t h(1, y)`` solves

    u_t = +lam u_y + u_yy / 2   for y < z,
    u_t = -lam u_y + u_yy / 2   for y > z,

and the absorbed layer does not move. The drift always points toward ``z``, so
upwind differences are backward above ``z`` and forward below it. The node at
``z`` either follows the semigroup (``interface="oracle_value"``) or the
generator row ``u_t = u_yy / 2`` (``interface="half_laplacian_row"``).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .analytic_core import ModelParams
from .errors import ConfigurationError, DomainError, UsageError
from .kernels import TestFunction, generator_values, semigroup_alive
from .reports import TestReport, Verdict
from .sampler import PathGrid

BOUNDARIES = ("oracle", "dirichlet_zero")
INTERFACES = ("oracle_value", "half_laplacian_row")
_ORACLE_CHUNK = 256


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on ``[y_min, y_max]`` with a node exactly at ``z``."""

    y_min: float
    y_max: float
    n_y: int
    z: float

    def __post_init__(self):
        if not self.y_min < self.z < self.y_max:
            raise ConfigurationError("need y_min < z < y_max")
        if self.n_y < 3:
            raise ConfigurationError("need at least 3 nodes")
        k = (self.z - self.y_min) / self.dy
        if abs(k - round(k)) > 1e-9:
            raise ConfigurationError("z must be a grid node")

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.n_y - 1)

    @property
    def nodes(self) -> np.ndarray:
        y = self.y_min + self.dy * np.arange(self.n_y)
        y[self.z_index] = self.z
        return y

    @property
    def z_index(self) -> int:
        return int(round((self.z - self.y_min) / self.dy))

    @classmethod
    def symmetric(cls, z: float, half_width: float, n_y: int) -> "Grid1D":
        """``[z - half_width, z + half_width]`` with ``n_y`` (odd) nodes."""
        if n_y % 2 == 0:
            raise ConfigurationError("a symmetric grid needs an odd node count")
        return cls(z - half_width, z + half_width, n_y, z)


@dataclass
class GridFunction:
    """Both layers of ``u(t, ., .)`` on a grid at one time."""

    grid: Grid1D
    branch0: np.ndarray
    branch1: np.ndarray
    time: float

    def to_csv(self, path: Union[str, Path], params: ModelParams, scheme: "SchemeConfig") -> Tuple[Path, Path]:
        """Write ``y,u0,u1`` rows and a JSON sidecar; returns both file paths."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["y", "u0", "u1"])
            for y, a, b in zip(self.grid.nodes, self.branch0, self.branch1):
                writer.writerow([repr(float(y)), repr(float(a)), repr(float(b))])
        side = path.with_suffix(".json")
        meta = {"t_end": self.time, "lambda": params.lam, "z": params.z, "dy": self.grid.dy,
                "dt_pde": scheme.dt_pde, "scheme": asdict(scheme)}
        side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return path, side


@dataclass(frozen=True)
class SchemeConfig:
    dt_pde: float
    upwind: bool = True
    boundary: str = "oracle"
    interface: str = "oracle_value"

    def __post_init__(self):
        if not self.dt_pde > 0:
            raise ConfigurationError("dt_pde must be positive")
        if self.boundary not in BOUNDARIES:
            raise ConfigurationError(f"boundary must be one of {BOUNDARIES}")
        if self.interface not in INTERFACES:
            raise ConfigurationError(f"interface must be one of {INTERFACES}")


def stable_dt(lam: float, dy: float) -> float:
    """Largest step keeping every update weight nonnegative: ``dy^2 / (dy lam + 1)``."""
    return dy * dy / (dy * lam + 1.0)


def oracle_values(params: ModelParams, h: TestFunction, t, y) -> np.ndarray:
    """``Q_t h(1, y)`` on broadcast arrays, evaluated in memory-bounded chunks."""
    t, y = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(y, dtype=float))
    flat_t, flat_y = t.ravel(), y.ravel()
    out = np.empty(flat_t.size)
    for s in range(0, flat_t.size, _ORACLE_CHUNK):
        out[s:s + _ORACLE_CHUNK] = semigroup_alive(params, flat_t[s:s + _ORACLE_CHUNK],
                                                   flat_y[s:s + _ORACLE_CHUNK], h)
    return out.reshape(t.shape)


def solve_kbe(params: ModelParams, h: TestFunction, t_end: float, grid: Grid1D,
              scheme: SchemeConfig) -> GridFunction:
    """March the backward equation from ``u(0) = h`` to ``t_end``.

    The step is ``t_end / ceil(t_end / dt_pde)`` so the final time is hit exactly.
    """
    if grid.z != params.z:
        raise ConfigurationError("grid.z must equal params.z")
    if not h.in_domain(params.z):
        raise DomainError(f"test function is outside the generator domain (defect {h.domain_defect(params.z):.3g})")
    if t_end < 0:
        raise DomainError("t_end must be nonnegative")
    dy = grid.dy
    bound = stable_dt(params.lam, dy)
    if scheme.dt_pde > bound * (1 + 1e-12):
        raise ConfigurationError(f"dt_pde={scheme.dt_pde:.3g} exceeds the stability bound {bound:.3g}")
    y = grid.nodes
    u0 = np.asarray(h.absorbed(y), dtype=float).copy()
    u = np.asarray(h.alive(y), dtype=float).copy()
    if t_end == 0:
        return GridFunction(grid, u0, u, 0.0)
    steps = int(math.ceil(t_end / scheme.dt_pde - 1e-12))
    dt = t_end / steps
    times = dt * np.arange(1, steps + 1)
    iz = grid.z_index
    lam = params.lam
    below = y < params.z
    above = y > params.z

    pinned = {}
    if scheme.boundary == "oracle":
        ends = oracle_values(params, h, times[:, None], np.array([y[0], y[-1]])[None, :])
        pinned["ends"] = ends
    if scheme.interface == "oracle_value":
        pinned["z"] = oracle_values(params, h, times, params.z)

    inner = slice(1, -1)
    for n in range(steps):
        lap = np.zeros_like(u)
        lap[inner] = (u[2:] - 2 * u[1:-1] + u[:-2]) / (dy * dy)
        grad = np.zeros_like(u)
        if scheme.upwind:
            fwd = np.zeros_like(u)
            bwd = np.zeros_like(u)
            fwd[inner] = (u[2:] - u[1:-1]) / dy
            bwd[inner] = (u[1:-1] - u[:-2]) / dy
            grad = np.where(below, lam * fwd, np.where(above, -lam * bwd, 0.0))
        else:
            cen = np.zeros_like(u)
            cen[inner] = (u[2:] - u[:-2]) / (2 * dy)
            grad = np.where(below, lam * cen, np.where(above, -lam * cen, 0.0))
        u = u + dt * (grad + 0.5 * lap)
        if scheme.boundary == "oracle":
            u[0], u[-1] = pinned["ends"][n]
        else:
            u[0] = u[-1] = 0.0
        if scheme.interface == "oracle_value":
            u[iz] = pinned["z"][n]
    return GridFunction(grid, u0, u, float(t_end))


def kbe_error(params: ModelParams, h: TestFunction, t_end: float, grid: Grid1D, scheme: SchemeConfig,
              away_from_z: float = 0.5) -> dict:
    """Sup-node error of :func:`solve_kbe` against the semigroup, globally and away from ``z``."""
    sol = solve_kbe(params, h, t_end, grid, scheme)
    exact = oracle_values(params, h, t_end, grid.nodes)
    err = np.abs(sol.branch1 - exact)
    far = np.abs(grid.nodes - params.z) >= away_from_z
    return {"n_y": grid.n_y, "dy": grid.dy, "dt_pde": scheme.dt_pde, "sup_error": float(err.max()),
            "sup_error_away": float(err[far].max()), "argmax_y": float(grid.nodes[int(np.argmax(err))])}


def convergence_study(params: ModelParams, h: TestFunction, t_end: float, half_width: float,
                      node_counts: Sequence[int], upwind: bool = True, interface: str = "oracle_value",
                      cfl_fraction: float = 0.9, away_from_z: float = 0.5) -> dict:
    """Errors and observed orders under simultaneous ``(dy, dt_pde)`` refinement.

    ``dt_pde = cfl_fraction * stable_dt`` keeps ``dt / dy^2`` (nearly) fixed.
    Orders are ``log2`` of successive error ratios, assuming each grid halves ``dy``.
    """
    rows = []
    for n_y in node_counts:
        grid = Grid1D.symmetric(params.z, half_width, n_y)
        scheme = SchemeConfig(cfl_fraction * stable_dt(params.lam, grid.dy), upwind=upwind, interface=interface)
        rows.append(kbe_error(params, h, t_end, grid, scheme, away_from_z))
    glob = [r["sup_error"] for r in rows]
    away = [r["sup_error_away"] for r in rows]
    ratios = [rows[i]["dy"] / rows[i + 1]["dy"] for i in range(len(rows) - 1)]
    order = [math.log(glob[i] / glob[i + 1]) / math.log(ratios[i]) for i in range(len(ratios))]
    order_away = [math.log(away[i] / away[i + 1]) / math.log(ratios[i]) for i in range(len(ratios))]
    return {"rows": rows, "order": order, "order_away": order_away, "upwind": upwind, "interface": interface}


def interior_residual(params: ModelParams, h: TestFunction, t: float, probe_points: Iterable[float],
                      fd_time: float = 1e-3, fd_space: float = 1e-3, tol: float = 1e-4,
                      drift_sign: float = 1.0) -> TestReport:
    """Check ``d/dt Q_t h = A Q_t h`` at probes away from ``z`` by central differences.

    ``drift_sign = -1`` flips the drift in ``A`` (negative control).
    """
    probes = np.asarray(list(probe_points), dtype=float)
    if np.any(np.abs(probes - params.z) < 2 * fd_space):
        raise UsageError("probe points must stay at least two space steps away from z")
    if t <= fd_time:
        raise UsageError("t must exceed the time step")
    tt = np.array([t - fd_time, t + fd_time, t, t, t])[:, None]
    yy = probes[None, :] + np.array([0.0, 0.0, -fd_space, 0.0, fd_space])[:, None]
    q = oracle_values(params, h, tt, yy)
    dq_dt = (q[1] - q[0]) / (2 * fd_time)
    d1 = (q[4] - q[2]) / (2 * fd_space)
    d2 = (q[4] - 2 * q[3] + q[2]) / fd_space**2
    drift = np.where(probes > params.z, -params.lam, params.lam) * drift_sign
    resid = dq_dt - (drift * d1 + 0.5 * d2)
    worst = float(np.max(np.abs(resid)))
    return TestReport(
        "interior_residual", worst, worst, int(probes.size),
        Verdict.PASS if worst <= tol else Verdict.FAIL,
        {"tol": tol, "t": t, "fd_time": fd_time, "fd_space": fd_space, "probes": probes.tolist(),
         "residuals": resid.tolist(), "drift_sign": drift_sign},
    )


# ---------------------------------------------------------------------------
# Dynkin formula along sampled paths

def dynkin_increments(path: PathGrid, params: ModelParams, h: TestFunction, times) -> np.ndarray:
    """``h(zeta_t) - h(1, 0) - int_0^t A h(zeta_s) ds`` along one path, for each ``t``.

    The time integral is the trapezoid rule over the nodes up to ``min(t, sigma)``
    using the alive branch throughout, which is the left limit at ``sigma``;
    after ``sigma`` the generator vanishes.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise UsageError("times must be nonnegative")
    stops = np.minimum(times, path.sigma)
    last = int(np.searchsorted(path.times, stops.max(), side="right"))
    ts = path.times[:last]
    xs = path.values[:last]
    gen = generator_values(params, h, np.ones(xs.size, dtype=int), xs)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (gen[1:] + gen[:-1]) * np.diff(ts))))
    k = np.searchsorted(ts, stops, side="right") - 1
    x_stop = np.where(stops < path.sigma, path.value_at(stops), params.z)
    g_stop = generator_values(params, h, np.ones(stops.size, dtype=int), x_stop)
    integral = cum[k] + 0.5 * (gen[k] + g_stop) * (stops - ts[k])
    alive = times < path.sigma
    end = np.where(alive, h(1, x_stop), h(0, np.full(stops.size, params.z)))
    out = end - float(h(1, 0.0)) - integral
    return np.where(times == 0, 0.0, out)


def dynkin_increment(path: PathGrid, params: ModelParams, h: TestFunction, t: float) -> float:
    """Single-time version of :func:`dynkin_increments`."""
    return float(dynkin_increments(path, params, h, [t])[0])


def dynkin_check(params: ModelParams, h: TestFunction, t: float, paths: Iterable[PathGrid],
                 name: str = "dynkin") -> TestReport:
    """z-test of ``E[h(zeta_t)] - h(1,0) - E[int_0^t A h(zeta_s) ds] = 0``."""
    from .estimators import martingale_ztest

    incs = np.array([dynkin_increment(p, params, h, t) for p in paths])
    if t == 0:
        return TestReport(name, 0.0, 1.0, int(incs.size), Verdict.PASS, {"t": 0.0, "z_cut": 3.0})
    report = martingale_ztest(incs, name=name, metadata={"t": t})
    return report
