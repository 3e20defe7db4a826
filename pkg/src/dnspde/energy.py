"""Discrete convex energy on a 1-D Dirichlet grid and its proximal calculus.

The energy is ``E(u) = h*sum_{i=0..N} beta1(Du_i) + h*sum_{i=1..N} beta0(u_i)``
with forward differences ``Du_i = (u_{i+1} - u_i)/h`` and ``u_0 = u_{N+1} = 0``.
Gradients and Hessians are taken with respect to the weighted inner product
``(u, v)_H = h*sum u_i v_i``, so they are grid functions / operators that
approximate their continuum counterparts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded
from scipy.sparse.linalg import LinearOperator

__all__ = [
    "NewtonError",
    "Grid",
    "Potential",
    "BETA1_PRESETS",
    "BETA0_PRESETS",
    "EnergyModel",
    "Tridiagonal",
    "make_model",
    "energy_value",
    "gradient_B",
    "hessian_B",
    "prox_B",
    "yosida_B",
    "moreau_envelope",
    "jacobian_prox",
    "jacobian_yosida",
    "trace_correction",
]


class NewtonError(RuntimeError):
    """The proximal solve did not reach its tolerance."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` interior nodes on (0, length), Dirichlet ends."""

    n: int
    length: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.length <= 0:
            raise ValueError("Grid needs n >= 1 and positive length")

    @property
    def h(self) -> float:
        return self.length / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    def inner(self, u, v) -> float:
        return float(self.h * np.dot(u, v))

    def norm_H(self, u) -> float:
        return float(np.sqrt(self.h * np.dot(u, u)))

    def diff(self, u) -> np.ndarray:
        """Forward differences Du_0..Du_N (length n+1) with zero boundary values."""
        padded = np.concatenate(([0.0], np.asarray(u, dtype=float), [0.0]))
        return np.diff(padded) / self.h

    def div(self, q) -> np.ndarray:
        """Negative adjoint of :meth:`diff` in the H-product: returns -(q_i - q_{i-1})/h."""
        return -np.diff(q) / self.h

    def norm_V(self, u, p: float = 2.0) -> float:
        du = self.diff(u)
        return float((self.h * np.sum(np.abs(du) ** p)) ** (1.0 / p))

    def sine_modes(self, m: int) -> np.ndarray:
        """Rows ``sqrt(2)*sin(j*pi*x/L)``, j = 1..m; orthonormal in H for j <= n."""
        j = np.arange(1, m + 1)[:, None]
        return np.sqrt(2.0 / self.length) * np.sin(j * np.pi * self.x[None, :] / self.length)

    def laplacian_eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the discrete Dirichlet operator -Delta_h, ascending."""
        j = np.arange(1, self.n + 1)
        return (4.0 / self.h**2) * np.sin(j * np.pi * self.h / (2 * self.length)) ** 2


@dataclass(frozen=True)
class Potential:
    """Smooth convex scalar potential with value, first and second derivative."""

    name: str
    f: callable
    df: callable
    d2f: callable


def _zero(name="zero"):
    return Potential(name, lambda s: np.zeros_like(s), lambda s: np.zeros_like(s), lambda s: np.zeros_like(s))


def _quadratic(name="quadratic"):
    return Potential(name, lambda s: 0.5 * s**2, lambda s: s, lambda s: np.ones_like(s))


def _ppower(p):
    return Potential(
        "ppower",
        lambda s: 0.5 * s**2 + np.abs(s) ** p / p,
        lambda s: s + np.abs(s) ** (p - 2) * s,
        lambda s: 1.0 + (p - 1) * np.abs(s) ** (p - 2),
    )


def _quartic():
    return Potential(
        "quartic",
        lambda s: 0.5 * s**2 + 0.25 * s**4,
        lambda s: s + s**3,
        lambda s: 1.0 + 3.0 * s**2,
    )


BETA1_PRESETS = ("zero", "quadratic", "ppower")
BETA0_PRESETS = ("zero", "quadratic", "quartic")


@dataclass(frozen=True)
class EnergyModel:
    """Energy ``E(u) = int beta1(u') + beta0(u)`` discretized on ``grid``.

    ``beta1`` is one of ``zero`` (only useful for scalar surrogates, not
    coercive), ``quadratic`` (s^2/2, requires p = 2) or ``ppower``
    (s^2/2 + |s|^p/p). ``beta0`` is ``zero``, ``quadratic`` or ``quartic``.
    """

    grid: Grid
    beta1: str = "quadratic"
    beta0: str = "zero"
    p: float = 2.0

    def __post_init__(self):
        if self.beta1 not in BETA1_PRESETS:
            raise ValueError(f"unknown beta1 preset {self.beta1!r}")
        if self.beta0 not in BETA0_PRESETS:
            raise ValueError(f"unknown beta0 preset {self.beta0!r}")
        if self.p < 2:
            raise ValueError("growth exponent p must be >= 2")
        if self.beta1 == "quadratic" and self.p != 2:
            raise ValueError("quadratic beta1 requires p = 2")

    @property
    def pot1(self) -> Potential:
        if self.beta1 == "zero":
            return _zero()
        if self.beta1 == "quadratic":
            return _quadratic()
        return _ppower(self.p)

    @property
    def pot0(self) -> Potential:
        if self.beta0 == "zero":
            return _zero()
        if self.beta0 == "quadratic":
            return _quadratic()
        return _quartic()

    @property
    def c_B(self) -> float | None:
        """Strong-monotonicity constant in the discrete V-norm (None if absent).

        quadratic: (B x - B y, x - y) >= |D(x-y)|^2, so c_B = 1.
        ppower: the |s|^{p-2}s part is 2^{2-p}-strongly monotone in |.|^p.
        """
        if self.beta1 == "zero":
            return None
        if self.beta1 == "quadratic":
            return 1.0
        return 2.0 ** (2.0 - self.p)

    @property
    def is_linear(self) -> bool:
        return self.beta1 in ("zero", "quadratic") and self.beta0 in ("zero", "quadratic")

    @property
    def hessian_constant(self) -> float:
        """C' with ||hessian_B(u)||_{H->H} <= C'(1 + ||u||_V^{p-2}).

        Uses |Du_i| <= h^{-1/p}||u||_V and |u_i| <= ||u||_V on the grid; the
        quartic beta0 term is only covered when p >= 4.
        """
        h, p = self.grid.h, self.p
        if self.beta1 == "zero":
            edge = 0.0
        elif self.beta1 == "quadratic":
            edge = 1.0
        else:
            edge = max(1.0, (p - 1) * h ** (-(p - 2) / p))
        node = {"zero": 0.0, "quadratic": 1.0, "quartic": 4.0}[self.beta0]
        return 4.0 / h**2 * edge + node

    def operator_norm_VV(self) -> float:
        """||B||_{L(V,V*)} for linear models: sup (Bw,w)_H / ||Dw||^2."""
        if not self.is_linear:
            raise ValueError("operator norm only defined for linear energies")
        lam1 = self.grid.laplacian_eigenvalues()[0]
        edge = 1.0 if self.beta1 == "quadratic" else 0.0
        node = 1.0 if self.beta0 == "quadratic" else 0.0
        return edge + node / lam1


def make_model(n: int, beta1: str = "quadratic", beta0: str = "zero", p: float = 2.0, length: float = 1.0):
    return EnergyModel(Grid(n, length), beta1, beta0, p)


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal matrix (main diagonal ``diag``, first off-diagonal ``off``)."""

    diag: np.ndarray
    off: np.ndarray

    @property
    def n(self) -> int:
        return len(self.diag)

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        out = self.diag[:, None] * v if v.ndim == 2 else self.diag * v
        if self.n > 1:
            if v.ndim == 2:
                out[:-1] += self.off[:, None] * v[1:]
                out[1:] += self.off[:, None] * v[:-1]
            else:
                out[:-1] += self.off * v[1:]
                out[1:] += self.off * v[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def shifted(self, scale: float) -> "Tridiagonal":
        """I + scale*self."""
        return Tridiagonal(1.0 + scale * self.diag, scale * self.off)

    def solve(self, rhs):
        """Solve self @ x = rhs; the matrix must be positive definite."""
        if self.n == 1:
            if self.diag[0] <= 0:
                raise LinAlgError("tridiagonal system is not positive definite")
            return np.asarray(rhs, dtype=float) / self.diag[0]
        ab = np.zeros((2, self.n))
        ab[0, 1:] = self.off
        ab[1] = self.diag
        try:
            return solveh_banded(ab, rhs, lower=False, check_finite=False)
        except LinAlgError as exc:
            raise LinAlgError("tridiagonal system is not positive definite") from exc


def energy_value(m: EnergyModel, u) -> float:
    u = np.asarray(u, dtype=float)
    g = m.grid
    return float(g.h * np.sum(m.pot1.f(g.diff(u))) + g.h * np.sum(m.pot0.f(u)))


def gradient_B(m: EnergyModel, u) -> np.ndarray:
    """H-gradient of the energy: -(b1'(Du)_i - b1'(Du)_{i-1})/h + b0'(u_i)."""
    u = np.asarray(u, dtype=float)
    g = m.grid
    return g.div(m.pot1.df(g.diff(u))) + m.pot0.df(u)


def hessian_B(m: EnergyModel, u) -> Tridiagonal:
    u = np.asarray(u, dtype=float)
    g = m.grid
    w = m.pot1.d2f(g.diff(u)) / g.h**2
    diag = w[:-1] + w[1:] + m.pot0.d2f(u)
    return Tridiagonal(diag, -w[1:-1])


def _objective(m, lam, x, y):
    d = y - x
    return energy_value(m, y) + m.grid.h * np.dot(d, d) / (2 * lam)


def prox_B(
    m: EnergyModel,
    lam: float,
    x,
    y0=None,
    rtol: float = 1e-10,
    maxiter: int = 100,
    fallback_iters: int = 500,
) -> np.ndarray:
    """Resolvent ``(I + lam*B)^{-1} x``: the minimizer of E(y) + ||y - x||_H^2/(2 lam).

    Damped Newton with Armijo backtracking (factor 0.5, slope 1e-4), stopped
    when ``||y + lam*B(y) - x||_H <= rtol*(1 + ||x||_H)``. If Newton stalls,
    up to ``fallback_iters`` backtracking gradient steps are tried before
    :class:`NewtonError` is raised.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    x = np.asarray(x, dtype=float)
    g = m.grid
    tol = rtol * (1.0 + g.norm_H(x))
    y = x.copy() if y0 is None else np.array(y0, dtype=float)

    def residual(y):
        return y + lam * gradient_B(m, y) - x

    r = residual(y)
    rnorm = g.norm_H(r)
    phi = _objective(m, lam, x, y)
    for _ in range(maxiter):
        if rnorm <= tol:
            return y
        d = hessian_B(m, y).shifted(lam).solve(-r)
        slope = g.inner(r, d) / lam
        if slope >= 0:
            break
        t = 1.0
        while True:
            y_new = y + t * d
            phi_new = _objective(m, lam, x, y_new)
            r_new = residual(y_new)
            rnorm_new = g.norm_H(r_new)
            # near the optimum phi differences drown in roundoff; accept a residual decrease
            if phi_new <= phi + 1e-4 * t * slope or (
                abs(phi_new - phi) <= 1e-13 * (1 + abs(phi)) and rnorm_new < rnorm
            ):
                break
            t *= 0.5
            if t < 1e-12:
                break
        if t < 1e-12:
            break
        y, r, rnorm, phi = y_new, r_new, rnorm_new, phi_new
    if rnorm <= tol:
        return y

    # gradient fallback with backtracking on phi
    step = 1.0
    for _ in range(fallback_iters):
        grad = r / lam
        while True:
            y_new = y - step * lam * grad
            phi_new = _objective(m, lam, x, y_new)
            if phi_new <= phi - 1e-4 * step * lam * g.inner(grad, grad) or step < 1e-14:
                break
            step *= 0.5
        y, phi = y_new, phi_new
        r = residual(y)
        rnorm = g.norm_H(r)
        if rnorm <= tol:
            return y
        step = min(1.0, 2 * step)
    raise NewtonError(f"prox_B did not converge: residual {rnorm:.3e} > {tol:.3e} (lambda={lam})")


def yosida_B(m: EnergyModel, lam: float, x, prox=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = prox_B(m, lam, x) if prox is None else prox
    return (x - y) / lam


def moreau_envelope(m: EnergyModel, lam: float, x, prox=None) -> float:
    """E_lam(x) = E(J x) + lam/2 ||B_lam x||_H^2."""
    x = np.asarray(x, dtype=float)
    y = prox_B(m, lam, x) if prox is None else prox
    b = (x - y) / lam
    return energy_value(m, y) + 0.5 * lam * m.grid.h * float(np.dot(b, b))


def jacobian_prox(m: EnergyModel, lam: float, x, prox=None) -> LinearOperator:
    """Derivative of the resolvent, (I + lam*hessian_B(J x))^{-1}."""
    y = prox_B(m, lam, x) if prox is None else prox
    system = hessian_B(m, y).shifted(lam)
    n = m.grid.n
    return LinearOperator((n, n), matvec=system.solve, matmat=system.solve, dtype=float)


def jacobian_yosida(m: EnergyModel, lam: float, x, prox=None) -> LinearOperator:
    """Derivative of B_lam: hessian_B(J x) composed with jacobian_prox(x)."""
    y = prox_B(m, lam, x) if prox is None else prox
    hess = hessian_B(m, y)
    system = hess.shifted(lam)
    n = m.grid.n

    def apply(v):
        return hess.matvec(system.solve(v))

    return LinearOperator((n, n), matvec=apply, matmat=apply, dtype=float)


def trace_correction(m: EnergyModel, lam: float, x, modes, prox=None) -> float:
    """sum_j (g_j, D B_lam(x) g_j)_H over the rows of ``modes``."""
    modes = np.asarray(modes, dtype=float)
    if modes.size == 0:
        return 0.0
    modes = np.atleast_2d(modes)
    y = prox_B(m, lam, x) if prox is None else prox
    hess = hessian_B(m, y)
    sol = hess.shifted(lam).solve(modes.T)
    return float(m.grid.h * np.sum(modes.T * hess.matvec(sol)))
