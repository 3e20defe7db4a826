"""Euler-Maruyama integration of the Yosida-regularized problem in normal form.

For fixed ``lam > 0`` the regularized equation reads

    du = (lam I + A_lam)^{-1} (F(t, R J u) - B_lam(u)) dt + G(t, J u) dW,

with ``J`` the resolvent of the energy gradient and ``A_lam`` the Yosida
approximation of the dissipation graph. Both maps are Lipschitz at fixed
``lam``, so an explicit step is stable once ``dt <= c_stab * lam**2``.

The state is carried as ``u_n = u0 + D_n + S_n`` where ``D_n`` and ``S_n``
accumulate the drift and stochastic increments in step order. This makes the
Ito decomposition hold exactly in floating point.
"""

from __future__ import annotations

import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from . import energy as en
from . import monotone_graph as mg
from . import noise as nz

__all__ = [
    "StabilityError",
    "SimulationError",
    "ForcingModel",
    "register_forcing",
    "SimConfig",
    "TrajectoryRecord",
    "PathSummary",
    "EnsembleResult",
    "default_u0",
    "drift",
    "step",
    "simulate",
    "simulate_ensemble",
    "map_paths",
]

log = logging.getLogger(__name__)


class StabilityError(ValueError):
    """dt violates dt <= c_stab*lambda^2."""


class SimulationError(RuntimeError):
    """A solver failed inside a trajectory; carries the step/path index."""

    def __init__(self, msg, step=None, path=None):
        super().__init__(msg)
        self.step = step
        self.path = path


_FORCING_REGISTRY: dict = {}


def register_forcing(name: str, func, C_F: float, h_F: float = 0.0):
    """Register ``func(t, u, du, grid) -> grid function`` under ``name``.

    ``C_F`` and ``h_F`` are the declared constants of the Lipschitz/growth
    bounds; they are taken on trust but sampled by :meth:`ForcingModel.check`.
    """
    _FORCING_REGISTRY[name] = (func, float(C_F), float(h_F))


FORCING_KINDS = ("zero", "affine", "lipschitz")


@dataclass(frozen=True)
class ForcingModel:
    """Source term F(t, u) = f(t, u, u_x).

    ``affine``: ``f = a0 + b*u + c*u_x`` with centered differences for u_x.
    ``lipschitz``: a function registered with :func:`register_forcing`.
    """

    kind: str = "zero"
    a0: float = 0.0
    b: float = 0.0
    c: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ValueError(f"unknown forcing kind {self.kind!r}")
        if self.kind == "lipschitz" and self.name not in _FORCING_REGISTRY:
            raise ValueError(f"forcing {self.name!r} is not registered")

    @property
    def is_linear(self) -> bool:
        return self.kind == "zero" or (self.kind == "affine" and self.a0 == 0.0)

    def __call__(self, t: float, u, grid: en.Grid) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(u)
        padded = np.concatenate(([0.0], u, [0.0]))
        du = (padded[2:] - padded[:-2]) / (2 * grid.h)
        if self.kind == "affine":
            return self.a0 + self.b * u + self.c * du
        func = _FORCING_REGISTRY[self.name][0]
        return np.asarray(func(t, u, du, grid), dtype=float)

    def constants(self, grid: en.Grid, p: float = 2.0) -> tuple[float, float]:
        """(C_F, h_F) for the bounds ||F(x)-F(y)||^2 <= C_F ||x-y||_V^2 and
        ||F(x)||^2 <= h_F + C_F ||x||_V^p.

        For the affine kind ||bu + c u_x||_H <= (|b|+|c|) ||u||_V on the grid.
        """
        if self.kind == "zero":
            return 0.0, 0.0
        if self.kind == "lipschitz":
            _, C_F, h_F = _FORCING_REGISTRY[self.name]
            return C_F, h_F
        lip = (abs(self.b) + abs(self.c)) ** 2
        a_sq = self.a0**2 * grid.h * grid.n
        if p == 2:
            return 2 * lip, 2 * a_sq
        # |x|^2 <= 1 + |x|^p
        return 2 * lip, 2 * a_sq + 2 * lip

    def check(self, grid: en.Grid, p: float = 2.0, n_samples: int = 200, seed: int = 0) -> dict:
        """Sample the Lipschitz and growth bounds of :meth:`constants` on random grid functions."""
        C_F, h_F = self.constants(grid, p)
        rng = np.random.default_rng(seed)
        lip_ok = growth_ok = True
        for _ in range(n_samples):
            x, y = rng.standard_normal((2, grid.n)) * rng.exponential(1.0, 2)[:, None]
            t = float(rng.uniform())
            d = grid.norm_H(self(t, x, grid) - self(t, y, grid)) ** 2
            lip_ok &= bool(d <= C_F * grid.norm_V(x - y, 2.0) ** 2 * (1 + 1e-9) + 1e-12)
            g = grid.norm_H(self(t, x, grid)) ** 2
            growth_ok &= bool(g <= (h_F + C_F * grid.norm_V(x, p) ** p) * (1 + 1e-9) + 1e-12)
        return {"lipschitz": lip_ok, "growth": growth_ok}


R_LAMBDA_CHOICES = ("identity", "prox_smoother")


def default_u0(grid: en.Grid, p: float = 2.0, scale: float = 1.0) -> np.ndarray:
    """Sine profile with discrete V-norm equal to ``scale``."""
    u = np.sin(np.pi * grid.x / grid.length)
    return scale * u / grid.norm_V(u, p)


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to run trajectories of the regularized problem."""

    energy: en.EnergyModel
    graph: mg.MonotoneGraph
    noise: nz.NoiseModel
    forcing: ForcingModel = ForcingModel()
    lam: float = 0.25
    T: float = 0.5
    dt: float | None = None
    c_stab: float = 0.1
    r_lambda: str = "identity"
    u0: np.ndarray | None = field(default=None, compare=False)
    n_paths: int = 1
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.T <= 0:
            raise ValueError("horizon T must be positive")
        if self.dt is None:
            object.__setattr__(self, "dt", self.c_stab * self.lam**2)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt > self.c_stab * self.lam**2 * (1 + 1e-12):
            raise StabilityError(
                f"dt <= c_stab*lambda^2 violated: dt={self.dt:g} > {self.c_stab:g}*{self.lam:g}^2"
            )
        if self.r_lambda not in R_LAMBDA_CHOICES:
            raise ValueError(f"unknown r_lambda {self.r_lambda!r}")
        if not self.graph.coercive:
            raise ValueError("dissipation graph is not flagged coercive (declare c_A)")
        if self.noise.grid != self.energy.grid:
            raise ValueError("noise and energy must share a grid")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.u0 is None:
            object.__setattr__(self, "u0", default_u0(self.grid, self.energy.p))
        else:
            u0 = np.asarray(self.u0, dtype=float)
            if u0.shape != (self.grid.n,):
                raise ValueError("u0 must be a grid function")
            object.__setattr__(self, "u0", u0)

    @property
    def grid(self) -> en.Grid:
        return self.energy.grid

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    def with_(self, **changes) -> "SimConfig":
        """Copy with changes; dt is re-derived from a new lambda or c_stab unless given."""
        if ("lam" in changes or "c_stab" in changes) and "dt" not in changes:
            changes["dt"] = None
        return replace(self, **changes)

    def r_lambda_apply(self, v):
        if self.r_lambda == "identity":
            return v
        return en.prox_B(self.energy, self.lam, v)


@dataclass
class TrajectoryRecord:
    """Sampled Ito decomposition of one path.

    Arrays are indexed by step: ``u``, ``stoch_int``, ``prox_state`` have
    ``n_steps + 1`` rows, ``du_d``, ``v``, ``dW`` have ``n_steps`` rows.
    """

    path_index: int
    dt: float
    times: np.ndarray
    u: np.ndarray
    du_d: np.ndarray
    v: np.ndarray
    stoch_int: np.ndarray
    prox_state: np.ndarray
    dW: np.ndarray
    forcing: np.ndarray

    @property
    def drift_int(self) -> np.ndarray:
        """Running sum of dt*du_d in step order (row 0 is zero)."""
        out = np.zeros_like(self.u)
        np.cumsum(self.dt * self.du_d, axis=0, out=out[1:])
        return out


def drift(cfg: SimConfig, t: float, u, prox=None):
    """Normal-form drift at state ``u``.

    Returns ``(du_d, v, prox, forcing)`` where ``du_d = (lam I + A_lam)^{-1} z``
    with ``z = F(t, R J u) - B_lam(u)``, ``v = A_lam(du_d)``, ``prox = J u`` and
    ``forcing = F(t, R J u)``.
    """
    lam = cfg.lam
    u = np.asarray(u, dtype=float)
    if prox is None:
        prox = en.prox_B(cfg.energy, lam, u)
    b_lam = (u - prox) / lam
    forcing = cfg.forcing(t, cfg.r_lambda_apply(prox), cfg.grid)
    z = forcing - b_lam
    du_d = np.asarray(mg.inverse_shifted(cfg.graph, lam, z))
    v = np.asarray(mg.yosida(cfg.graph, lam, du_d))
    return du_d, v, prox, forcing


def step(cfg: SimConfig, t: float, u, dW, prox=None):
    """One Euler-Maruyama step; returns ``(u_next, du_d, v, noise_increment, prox)``."""
    if cfg.dt > cfg.c_stab * cfg.lam**2 * (1 + 1e-12):
        raise StabilityError("dt <= c_stab*lambda^2 violated")
    u = np.asarray(u, dtype=float)
    du_d, v, prox, _ = drift(cfg, t, u, prox)
    incr = nz.apply_G(cfg.noise, t, prox, dW)
    return u + cfg.dt * du_d + incr, du_d, v, incr, prox


def simulate(cfg: SimConfig, path_index: int = 0, increments=None) -> TrajectoryRecord:
    """Run one path on [0, n_steps*dt].

    ``increments`` overrides the keyed Wiener table (shape ``(n_steps, m)``);
    this is how runs at different lambda share one noise realization.
    """
    n, dt, lam = cfg.n_steps, cfg.dt, cfg.lam
    N = cfg.grid.n
    if increments is None:
        increments = nz.sample_increments(nz.WienerPath(cfg.seed, path_index, dt, cfg.noise.m), n)
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (n, cfg.noise.m):
        raise ValueError(f"increment table must have shape {(n, cfg.noise.m)}")

    times = dt * np.arange(n + 1)
    u = np.empty((n + 1, N))
    du_d = np.empty((n, N))
    v = np.empty((n, N))
    forcing = np.empty((n, N))
    stoch = np.zeros((n + 1, N))
    prox = np.empty((n + 1, N))
    drift_acc = np.zeros(N)
    u0 = cfg.u0
    u[0] = u0
    y_prev = None
    for k in range(n):
        t = times[k]
        try:
            prox[k] = en.prox_B(cfg.energy, lam, u[k], y0=y_prev)
            du_d[k], v[k], _, forcing[k] = drift(cfg, t, u[k], prox=prox[k])
        except (en.NewtonError, mg.SolverError, np.linalg.LinAlgError) as exc:
            raise SimulationError(f"path {path_index} step {k}: {exc}", step=k, path=path_index) from exc
        y_prev = prox[k]
        incr = nz.apply_G(cfg.noise, t, prox[k], increments[k])
        drift_acc = drift_acc + dt * du_d[k]
        stoch[k + 1] = stoch[k] + incr
        u[k + 1] = u0 + drift_acc + stoch[k + 1]
        if not np.all(np.isfinite(u[k + 1])):
            raise SimulationError(f"path {path_index} step {k}: state blew up", step=k, path=path_index)
    try:
        prox[n] = en.prox_B(cfg.energy, lam, u[n], y0=y_prev)
    except en.NewtonError as exc:
        raise SimulationError(f"path {path_index} step {n}: {exc}", step=n, path=path_index) from exc
    return TrajectoryRecord(path_index, dt, times, u, du_d, v, stoch, prox, increments, forcing)


@dataclass
class PathSummary:
    path_index: int
    sup_norm_H: float
    terminal_norm_H_sq: float
    terminal_energy: float
    max_prox_energy: float
    dissipation: float

    @classmethod
    def from_record(cls, rec: TrajectoryRecord, cfg: SimConfig) -> "PathSummary":
        g = cfg.grid
        norms = np.sqrt(g.h * np.sum(rec.u**2, axis=1))
        energies = np.array([en.energy_value(cfg.energy, y) for y in rec.prox_state])
        diss = float(cfg.dt * g.h * np.sum(rec.v * rec.du_d))
        return cls(
            rec.path_index,
            float(norms.max()),
            float(norms[-1] ** 2),
            float(energies[-1]),
            float(energies.max()),
            diss,
        )


SUMMARY_FIELDS = ("sup_norm_H", "terminal_norm_H_sq", "terminal_energy", "max_prox_energy", "dissipation")


@dataclass
class EnsembleResult:
    summaries: list
    mean: dict
    stderr: dict

    @classmethod
    def from_summaries(cls, summaries: list) -> "EnsembleResult":
        mean, se = {}, {}
        n = len(summaries)
        for name in SUMMARY_FIELDS:
            vals = np.array([getattr(s, name) for s in summaries])
            mean[name] = float(np.mean(vals))
            se[name] = float(np.std(vals, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(summaries, mean, se)


def _apply(func, cfg, path_index):
    return func(simulate(cfg, path_index), cfg)


def map_paths(cfg: SimConfig, func, paths=None, workers: int | None = None) -> list:
    """Simulate each path and return ``[func(record, cfg) ...]`` in path order.

    ``func`` must be picklable when ``workers > 1``. Results do not depend on
    the worker count: each path owns its keyed noise stream and reductions
    happen afterwards in path-index order.
    """
    paths = list(range(cfg.n_paths)) if paths is None else list(paths)
    workers = cfg.workers if workers is None else workers
    job = partial(_apply, func, cfg)
    if workers <= 1 or len(paths) <= 1:
        return [job(i) for i in paths]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(job, paths))


def _summary_func(rec, cfg):
    return PathSummary.from_record(rec, cfg)


def simulate_ensemble(cfg: SimConfig, workers: int | None = None) -> EnsembleResult:
    """Per-path summaries plus Monte Carlo means and standard errors."""
    summaries = map_paths(cfg, _summary_func, workers=workers)
    return EnsembleResult.from_summaries(summaries)
