"""Randomized property suites for the graph and energy layers.

Each check reports the worst violation found over the sample; a check passes
when that violation does not exceed its tolerance. ``prox-test`` on the CLI
runs these suites on the configured presets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import energy as en
from . import monotone_graph as mg

__all__ = ["CheckResult", "graph_suite", "energy_suite", "default_graphs"]


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    worst: float  # largest violation (<= 0 means the inequality holds strictly)
    tol: float
    n: int

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.worst) and self.worst <= self.tol)


def default_graphs() -> dict:
    return {
        "linear": mg.Linear(1.0),
        "power_q1": mg.PowerLaw(q=1.0, a=1.0),
        "power_q2": mg.PowerLaw(q=2.0, a=2.0),
        "power_q3": mg.PowerLaw(q=3.0, a=1.0),
        "power_q1.5": mg.PowerLaw(q=1.5, a=1.0),
        "sign_plus_linear": mg.SignPlusLinear(a=1.0, b=0.5),
        "piecewise": mg.PiecewiseLinear(points=[(-1.0, -2.0), (0.0, 0.0), (1.0, 2.0), (1.0, 5.0), (2.0, 6.0)]),
    }


def _samples(rng, n):
    y = rng.uniform(-10.0, 10.0, n)
    y[: n // 4] *= 1e-2  # cluster near the kinks at zero
    return y


def graph_suite(graph: mg.MonotoneGraph, label: str = "graph", n: int = 1000, seed: int = 0,
                lams=(1.0, 0.3, 0.05), tol: float = 1e-10) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    y1, y2 = _samples(rng, n), _samples(rng, n)
    z = _samples(rng, n)
    worst = {"nonexpansive": -np.inf, "yosida_lipschitz": -np.inf, "selection": -np.inf, "round_trip": -np.inf}
    for lam in lams:
        j1, j2 = mg.resolvent(graph, lam, y1), mg.resolvent(graph, lam, y2)
        a1, a2 = mg.yosida(graph, lam, y1), mg.yosida(graph, lam, y2)
        worst["nonexpansive"] = max(worst["nonexpansive"], np.max(np.abs(j1 - j2) - np.abs(y1 - y2)))
        worst["yosida_lipschitz"] = max(
            worst["yosida_lipschitz"], np.max(lam * np.abs(a1 - a2) - np.abs(y1 - y2))
        )
        lo, hi = graph.evaluate(j1)
        worst["selection"] = max(worst["selection"], np.max(np.maximum(lo - a1, a1 - hi)))
        x = mg.inverse_shifted(graph, lam, z)
        back = lam * x + mg.yosida(graph, lam, x)
        worst["round_trip"] = max(worst["round_trip"], np.max(np.abs(back - z) / (1 + np.abs(z))))
    # |J_lam(y) - y| shrinks monotonically along a dyadic lambda ladder
    ladder = 2.0 ** -np.arange(8)
    dist = np.array([np.abs(mg.resolvent(graph, lam, y1) - y1) for lam in ladder])
    worst["resolvent_convergence"] = float(np.max(np.diff(dist, axis=0)))
    m = n * len(lams)
    return [CheckResult(label, k, float(v), tol, m) for k, v in worst.items()]


def energy_suite(model: en.EnergyModel, label: str = "energy", n: int = 40, seed: int = 0,
                 lams=(1.0, 0.1, 0.01)) -> list[CheckResult]:
    """Finite-difference, prox, Moreau and monotonicity checks on random grid functions."""
    rng = np.random.default_rng(seed)
    g, p = model.grid, model.p
    c_B = model.c_B
    out = {}

    def bump(name, val):
        out[name] = max(out.get(name, -np.inf), float(val))

    for _ in range(n):
        scale = 10.0 ** rng.uniform(-2, 0)
        u, v = scale * rng.standard_normal((2, g.n))
        eps = 1e-6 * (1 + g.norm_H(u)) / max(g.norm_H(v), 1e-300)
        fd = (en.energy_value(model, u + eps * v) - en.energy_value(model, u - eps * v)) / (2 * eps)
        dd = g.inner(en.gradient_B(model, u), v)
        bump("gradient_fd", abs(fd - dd) / max(abs(dd), abs(fd), 1e-12))
        hv = en.hessian_B(model, u).matvec(v)
        fdv = (en.gradient_B(model, u + eps * v) - en.gradient_B(model, u - eps * v)) / (2 * eps)
        bump("hessian_fd", g.norm_H(hv - fdv) / max(g.norm_H(hv), 1e-12))
        bump("coercivity", c_B / p * g.norm_V(u, p) ** p - en.energy_value(model, u)
             - 1e-12 * (1 + en.energy_value(model, u)))
        for lam in lams:
            j1, j2 = en.prox_B(model, lam, u), en.prox_B(model, lam, v)
            res = g.norm_H(j1 + lam * en.gradient_B(model, j1) - u) / (1 + g.norm_H(u))
            bump("prox_residual", res)
            menv = en.moreau_envelope(model, lam, u, prox=j1)
            e = en.energy_value(model, u)
            bump("moreau_bounds", max(-menv, menv - e) / (1 + e))
            dj = j1 - j2
            lhs = g.norm_H(dj) ** 2 + lam * c_B * g.norm_V(dj, p) ** p
            rhs = g.inner(u - v, dj)
            bump("strong_monotonicity", (lhs - rhs) / (1 + abs(rhs)))
            lhs = 0.5 * g.norm_H(j1) ** 2 + lam * c_B * g.norm_V(j1, p) ** p
            bump("contraction", (lhs - 0.5 * g.norm_H(u) ** 2) / (1 + g.norm_H(u) ** 2))
            bump("prox_nonexpansive", (g.norm_H(dj) - g.norm_H(u - v)) / (1 + g.norm_H(u - v)))
    tols = {
        "gradient_fd": 1e-5,
        "hessian_fd": 1e-5,
        "coercivity": 0.0,
        "prox_residual": 1e-10,
        "moreau_bounds": 1e-12,
        "strong_monotonicity": 1e-10,
        "contraction": 1e-10,
        "prox_nonexpansive": 1e-10,
    }
    return [CheckResult(label, k, out[k], tols[k], n) for k in tols]
