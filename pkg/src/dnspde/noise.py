"""Truncated cylindrical Wiener noise and diffusion coefficients.

``G(t, u) dW = sum_j h_j(t, u) dW_j`` with ``m`` modes. Increments are drawn
from Philox streams keyed by ``(seed, path_index, mode)``, so the value of
increment ``(step, mode)`` never depends on how paths are scheduled or on
how many steps/modes are requested alongside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import Grid

__all__ = [
    "NOISE_KINDS",
    "PHI_LINKS",
    "NoiseModel",
    "WienerPath",
    "sample_increments",
    "mode_vectors",
    "apply_G",
    "hs_norm",
]

NOISE_KINDS = ("zero", "additive", "superposition")
PHI_LINKS = ("identity", "tanh")


def _phi(name):
    if name == "identity":
        return lambda s: s
    if name == "tanh":
        return np.tanh
    raise ValueError(f"unknown link {name!r}")


@dataclass(frozen=True)
class NoiseModel:
    """Diffusion coefficient of the equation.

    kind:
        ``zero``; ``additive`` (fixed mode vectors, by default
        ``sigma_j * e_j``); ``superposition`` with
        ``h_j(u)_i = sigma_j * phi(u_i) * e_j(x_i)``.
    sigma_j = sigma0 * j**(-r) with r > 1/2 and ``e_j`` the sine modes.
    """

    grid: Grid
    kind: str = "zero"
    m: int = 8
    sigma0: float = 1.0
    r: float = 1.5
    phi: str = "tanh"
    modes: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.phi not in PHI_LINKS:
            raise ValueError(f"unknown link {self.phi!r}")
        if self.m < 0:
            raise ValueError("mode count must be >= 0")
        if self.r <= 0.5:
            raise ValueError("amplitude decay needs r > 1/2 for summability")
        if self.kind == "zero":
            object.__setattr__(self, "m", 0)
        if self.modes is not None:
            modes = np.atleast_2d(np.asarray(self.modes, dtype=float))
            if modes.shape[1] != self.grid.n:
                raise ValueError("mode vectors must live on the grid")
            object.__setattr__(self, "modes", modes)
            object.__setattr__(self, "m", modes.shape[0])

    @property
    def sigmas(self) -> np.ndarray:
        return self.sigma0 * np.arange(1, self.m + 1, dtype=float) ** (-self.r)

    @property
    def profiles(self) -> np.ndarray:
        """Rows ``sigma_j * e_j`` (or the user-supplied additive modes)."""
        if self.modes is not None:
            return self.modes
        return self.sigmas[:, None] * self.grid.sine_modes(self.m)

    @property
    def is_linear(self) -> bool:
        return self.kind == "zero" or (self.kind == "superposition" and self.phi == "identity")

    @property
    def C_G(self) -> float:
        """H-Lipschitz constant of u -> G(u) in Hilbert-Schmidt norm.

        superposition: ||G(u)-G(w)||_HS^2 <= sum_j sigma_j^2 max|e_j|^2 ||u-w||_H^2
        since phi is 1-Lipschitz; additive and zero kinds are constant in u.
        """
        if self.kind != "superposition":
            return 0.0
        emax = np.max(np.abs(self.grid.sine_modes(self.m)), axis=1) if self.m else np.zeros(0)
        return float(np.sqrt(np.sum(self.sigmas**2 * emax**2)))

    def growth_constant(self) -> float:
        """Constant C with ||G(u)||_HS <= C(1 + ||u||_V^nu) for the kind at hand."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "additive":
            return float(np.sqrt(self.grid.h * np.sum(self.profiles**2)))
        # |tanh| <= 1 bounds G uniformly; identity uses ||u||_H <= ||u||_V
        return self.C_G

    def nu(self, p: float) -> float:
        """Growth exponent: 1 if p > 2; for p = 2 only bounded kinds qualify (nu = 1/2)."""
        if p > 2:
            return 1.0
        return 0.5

    def satisfies_growth(self, p: float) -> bool:
        return not (p == 2 and self.kind == "superposition" and self.phi == "identity")


@dataclass(frozen=True)
class WienerPath:
    seed: int
    path_index: int
    dt: float
    m: int


def sample_increments(w: WienerPath, n_steps: int) -> np.ndarray:
    """Increment table of shape ``(n_steps, m)``, entries i.i.d. N(0, dt)."""
    if w.dt <= 0:
        raise ValueError("dt must be positive")
    table = np.empty((n_steps, w.m))
    for j in range(w.m):
        ss = np.random.SeedSequence([w.seed & 0xFFFFFFFFFFFFFFFF, w.path_index, j])
        gen = np.random.Generator(np.random.Philox(ss))
        table[:, j] = gen.standard_normal(n_steps)
    return np.sqrt(w.dt) * table


def mode_vectors(nm: NoiseModel, t: float, u) -> np.ndarray:
    """Rows ``h_j(t, u)``, shape ``(m, n)``."""
    n = nm.grid.n
    if nm.kind == "zero" or nm.m == 0:
        return np.zeros((0, n))
    if nm.kind == "additive":
        return nm.profiles
    u = np.asarray(u, dtype=float)
    return nm.profiles * _phi(nm.phi)(u)[None, :]


def apply_G(nm: NoiseModel, t: float, u, dW) -> np.ndarray:
    dW = np.asarray(dW, dtype=float)
    if dW.shape != (nm.m,):
        raise ValueError(f"expected {nm.m} increments, got shape {dW.shape}")
    if nm.m == 0:
        return np.zeros(nm.grid.n)
    return dW @ mode_vectors(nm, t, u)


def hs_norm(nm: NoiseModel, t: float, u) -> float:
    modes = mode_vectors(nm, t, u)
    return float(np.sqrt(nm.grid.h * np.sum(modes**2)))
