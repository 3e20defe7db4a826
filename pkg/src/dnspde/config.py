"""Flat ``section.key = value`` configuration files.

Lines are ``key = value``; ``#`` starts a comment. Every key has a default,
so an empty file selects the standard fixture. Unknown keys, malformed
values and stability violations are rejected with the offending line or key.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from . import energy as en
from . import monotone_graph as mg
from . import noise as nz
from .stepper import ForcingModel, SimConfig, StabilityError, default_u0

__all__ = ["ConfigError", "RunConfig", "DEFAULTS", "parse_config", "parse_text", "serialize"]


class ConfigError(ValueError):
    """Parse or validation failure; the message names the line or key."""


def _float(s):
    return float(s)


def _opt_float(s):
    return None if s in ("", "auto", "none") else float(s)


def _c_a(s):
    if s in ("", "auto", "none", "sample"):
        return s or "auto"
    return float(s)


def _int(s):
    return int(s)


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _words(s):
    return tuple(x.strip() for x in s.split(",") if x.strip())


def _points(s):
    if not s:
        return ()
    pts = []
    for item in s.split(";"):
        x, y = item.split(":")
        pts.append((float(x), float(y)))
    return tuple(pts)


def _choice(*options):
    def conv(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {s!r}")
        return s

    return conv


# key -> (converter, default); defaults are the standard fixture
DEFAULTS: dict = {
    "grid.n": (_int, 32),
    "model.beta1": (_choice(*en.BETA1_PRESETS), "ppower"),
    "model.beta0": (_choice(*en.BETA0_PRESETS), "quadratic"),
    "model.p": (_float, 4.0),
    "graph.kind": (_choice("linear", "power", "sign_plus_linear", "piecewise"), "sign_plus_linear"),
    "graph.a": (_float, 1.0),
    "graph.b": (_float, 0.1),
    "graph.q": (_float, 2.0),
    "graph.points": (_points, ()),
    "graph.c_A": (_c_a, "auto"),
    "graph.C_A": (_opt_float, None),
    "noise.kind": (_choice(*nz.NOISE_KINDS), "superposition"),
    "noise.m": (_int, 8),
    "noise.sigma0": (_float, 0.5),
    "noise.r": (_float, 1.5),
    "noise.phi": (_choice(*nz.PHI_LINKS), "tanh"),
    "noise.seed": (_int, 0),
    "forcing.kind": (_choice("zero", "affine"), "affine"),
    "forcing.a0": (_float, 1.0),
    "forcing.b": (_float, 0.0),
    "forcing.c": (_float, 0.0),
    "sim.lambda": (_float, 0.25),
    "sim.T": (_float, 0.5),
    "sim.dt": (_opt_float, None),
    "sim.c_stab": (_float, 0.1),
    "sim.r_lambda": (_choice("identity", "prox_smoother"), "identity"),
    "sim.u0": (_choice("sine", "zero"), "sine"),
    "sim.u0_scale": (_float, 0.1),
    "sim.paths": (_int, 16),
    "sim.workers": (_int, 1),
    "diag.lambdas": (_floats, (0.5, 0.25, 0.125, 0.0625)),
    "diag.cauchy_lambdas": (_floats, (0.25, 0.125, 0.0625, 0.03125)),
    "diag.sweep_T": (_opt_float, 3.0),
    "diag.ratio_bound": (_float, 10.0),
    "diag.gamma_min": (_float, 0.15),
    "diag.dt_ladder": (_floats, (1e-3, 5e-4, 2.5e-4)),
    "diag.pair_scales": (_floats, (2.0, 1.5)),
    "output.fields": (_words, ("u",)),
    "plot.enabled": (_bool, True),
}

OUTPUT_FIELDS = ("u", "du_d", "v")


def _format(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ";".join(f"{x!r}:{y!r}" for x, y in v)
        return ",".join(_format(x) for x in v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved key set plus the simulation config built from it."""

    values: dict
    sim: SimConfig = field(compare=False)

    def __getitem__(self, key):
        return self.values[key]

    def with_overrides(self, **overrides) -> "RunConfig":
        """Override by dotted key, given with ``__`` for the dot (``noise__seed=3``)."""
        vals = dict(self.values)
        for k, v in overrides.items():
            key = k.replace("__", ".")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown key {key!r}")
            vals[key] = v
        return _resolve(vals)


def _build_graph(v):
    kind = v["graph.kind"]
    declared = {}
    if isinstance(v["graph.c_A"], float):
        declared["c_A"] = v["graph.c_A"]
    if v["graph.C_A"] is not None:
        declared["C_A"] = v["graph.C_A"]
    if kind == "linear":
        g = mg.Linear(v["graph.a"], **declared)
    elif kind == "power":
        g = mg.PowerLaw(q=v["graph.q"], a=v["graph.a"], **declared)
    elif kind == "sign_plus_linear":
        g = mg.SignPlusLinear(a=v["graph.a"], b=v["graph.b"], **declared)
    else:
        if not v["graph.points"]:
            raise ConfigError("graph.points: piecewise graph needs breakpoints 'x:y;x:y;...'")
        g = mg.PiecewiseLinear(points=v["graph.points"], **declared)
    if v["graph.c_A"] == "sample":
        c = mg.sample_coercivity(g)
        if c is None:
            raise ConfigError("graph.c_A: sampled coercivity constant does not exist")
        g = type(g)(**{**_fields(g), "c_A": c})
    return g


def _fields(g):
    return {f.name: getattr(g, f.name) for f in fields(g)}


def _resolve(vals: dict) -> RunConfig:
    v = vals
    try:
        grid = en.Grid(v["grid.n"])
        model = en.EnergyModel(grid, v["model.beta1"], v["model.beta0"], v["model.p"])
        graph = _build_graph(v)
        noise = nz.NoiseModel(grid, v["noise.kind"], v["noise.m"], v["noise.sigma0"], v["noise.r"], v["noise.phi"])
        forcing = ForcingModel(v["forcing.kind"], a0=v["forcing.a0"], b=v["forcing.b"], c=v["forcing.c"])
        if v["sim.u0"] == "zero":
            u0 = np.zeros(grid.n)
        else:
            u0 = default_u0(grid, model.p, v["sim.u0_scale"])
        sim = SimConfig(
            model,
            graph,
            noise,
            forcing,
            lam=v["sim.lambda"],
            T=v["sim.T"],
            dt=v["sim.dt"],
            c_stab=v["sim.c_stab"],
            r_lambda=v["sim.r_lambda"],
            u0=u0,
            n_paths=v["sim.paths"],
            seed=v["noise.seed"],
            workers=v["sim.workers"],
        )
    except StabilityError as exc:
        raise ConfigError(f"sim.dt: {exc}") from exc
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    bad = [f for f in v["output.fields"] if f not in OUTPUT_FIELDS]
    if bad:
        raise ConfigError(f"output.fields: unknown block(s) {', '.join(bad)}")
    if any(x <= 0 for x in v["diag.lambdas"] + v["diag.cauchy_lambdas"] + v["diag.dt_ladder"]):
        raise ConfigError("diag: lambda and dt lists must be positive")
    if v["sim.workers"] < 1:
        raise ConfigError("sim.workers must be >= 1")
    return RunConfig(dict(v), sim)


def parse_text(text: str, source: str = "<config>") -> RunConfig:
    vals = {k: d for k, (_, d) in DEFAULTS.items()}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: key {key!r} already set on line {seen[key]}")
        seen[key] = lineno
        try:
            vals[key] = DEFAULTS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    return _resolve(vals)


def parse_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), source=str(path))


def serialize(cfg: RunConfig) -> str:
    """Canonical text with every key; parsing it reproduces ``cfg.values``."""
    return "".join(f"{k} = {_format(cfg.values[k])}\n" for k in DEFAULTS)
