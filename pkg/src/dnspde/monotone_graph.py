"""Scalar maximal monotone graphs, their resolvents and Yosida approximations.

All graphs act pointwise, so every routine here accepts scalars or numpy
arrays and broadcasts. Set-valued evaluation returns closed intervals as a
``(lo, hi)`` pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SolverError",
    "MonotoneGraph",
    "Linear",
    "PowerLaw",
    "SignPlusLinear",
    "PiecewiseLinear",
    "PointwiseOperator",
    "graph_eval",
    "resolvent",
    "yosida",
    "inverse_shifted",
    "bisect_resolvent",
    "sample_coercivity",
]


class SolverError(RuntimeError):
    """Scalar root finding could not be closed to tolerance."""


@dataclass(frozen=True)
class MonotoneGraph:
    """Base class for a scalar maximal monotone graph alpha: R -> 2^R.

    ``c_A`` and ``C_A`` are the declared coercivity and linear-growth
    constants. A graph without ``c_A`` is accepted but not flagged coercive.
    """

    c_A: float | None = field(default=None, kw_only=True)
    C_A: float | None = field(default=None, kw_only=True)

    @property
    def coercive(self) -> bool:
        return self.c_A is not None

    def evaluate(self, x):
        raise NotImplementedError

    def _resolvent(self, lam, y):
        return bisect_resolvent(self, lam, y)

    def primitive(self, x):
        """Convex potential whose subdifferential is the graph (if known)."""
        raise NotImplementedError(f"{type(self).__name__} has no primitive")

    def check_assumptions(self, xs=None) -> dict:
        """Sample the monotonicity / growth / coercivity conditions.

        Returns a dict of booleans; ``None`` entries mean the constant was
        not declared and the check was skipped.
        """
        if xs is None:
            xs = np.linspace(-50.0, 50.0, 2001)
        xs = np.asarray(xs, dtype=float)
        lo, hi = self.evaluate(xs)
        order = np.argsort(xs)
        lo_s, hi_s = lo[order], hi[order]
        monotone = bool(np.all(hi_s[:-1] <= lo_s[1:] + 1e-12 * (1 + np.abs(lo_s[1:]))))
        z_lo, z_hi = self.evaluate(0.0)
        out = {"monotone": monotone, "zero_in_graph": bool(z_lo <= 0.0 <= z_hi)}
        if self.C_A is None:
            out["growth"] = None
        else:
            ymax = np.maximum(np.abs(lo), np.abs(hi))
            out["growth"] = bool(np.all(ymax <= self.C_A * (1 + np.abs(xs)) + 1e-12))
        if self.c_A is None:
            out["coercivity"] = None
        else:
            ymin = np.minimum(lo * xs, hi * xs)
            bound = self.c_A * xs**2 - 1.0 / self.c_A
            out["coercivity"] = bool(np.all(ymin >= bound - 1e-12 * (1 + xs**2)))
        return out


def _set_default(obj, name, value):
    if getattr(obj, name) is None:
        object.__setattr__(obj, name, value)


@dataclass(frozen=True)
class Linear(MonotoneGraph):
    """alpha(x) = a*x with a >= 0."""

    a: float = 1.0

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("Linear graph needs a >= 0")
        _set_default(self, "C_A", self.a)
        if self.a > 0:
            _set_default(self, "c_A", self.a)

    def evaluate(self, x):
        y = self.a * np.asarray(x, dtype=float)
        return y, y.copy()

    def _resolvent(self, lam, y):
        return np.asarray(y, dtype=float) / (1.0 + lam * self.a)

    def primitive(self, x):
        return 0.5 * self.a * np.asarray(x, dtype=float) ** 2


@dataclass(frozen=True)
class PowerLaw(MonotoneGraph):
    """alpha(x) = a*|x|^(q-1)*sign(x), q >= 1, a > 0.

    For q = 1 this is the maximal extension a*sign(x), multivalued at 0.
    Only q = 2 satisfies both bounds of the coercivity/growth assumption;
    q < 2 gets ``C_A`` only and q > 2 gets ``c_A`` only.
    """

    q: float = 2.0
    a: float = 1.0

    def __post_init__(self):
        if self.q < 1 or self.a <= 0:
            raise ValueError("PowerLaw graph needs q >= 1 and a > 0")
        if self.q <= 2:
            _set_default(self, "C_A", self.a)
        if self.q >= 2:
            # a|x|^q >= c x^2 - 1/c holds with c = min(a, 1) for q >= 2
            _set_default(self, "c_A", min(self.a, 1.0) if self.q > 2 else self.a)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if self.q == 1:
            y = self.a * np.sign(x)
            zero = x == 0
            return np.where(zero, -self.a, y), np.where(zero, self.a, y)
        y = self.a * np.abs(x) ** (self.q - 1) * np.sign(x)
        return y, y.copy()

    def _resolvent(self, lam, y):
        y = np.asarray(y, dtype=float)
        if self.q == 1:
            return np.sign(y) * np.maximum(np.abs(y) - lam * self.a, 0.0)
        if self.q == 2:
            return y / (1.0 + lam * self.a)
        if self.q < 2:
            return np.sign(y) * self._newton_sublinear(lam, np.abs(y))
        return bisect_resolvent(self, lam, y)

    def _newton_sublinear(self, lam, r, maxiter: int = 200):
        """Solve x + lam*a*x^(q-1) = r for x >= 0 when 1 < q < 2.

        alpha has infinite slope at 0, so an absolute error in x would be
        amplified in alpha(x). Working with t = x^(q-1) instead, the map
        f(t) = t^k + lam*a*t - r (k = 1/(q-1) > 1) is convex and increasing;
        Newton from t0 = r/(lam*a) (where f >= 0) decreases monotonically to
        the root with full relative accuracy.
        """
        k = 1.0 / (self.q - 1.0)
        la = lam * self.a
        t = r / la
        for _ in range(maxiter):
            f = t**k + la * t - r
            step = f / (k * t ** (k - 1) + la)
            t_new = np.where(t > 0, np.maximum(t - step, 0.0), 0.0)
            if np.all(np.abs(t - t_new) <= 4e-16 * t_new):
                t = t_new
                break
            t = t_new
        else:
            raise SolverError("power-law resolvent Newton iteration did not converge")
        return t**k

    def primitive(self, x):
        return self.a * np.abs(np.asarray(x, dtype=float)) ** self.q / self.q


@dataclass(frozen=True)
class SignPlusLinear(MonotoneGraph):
    """alpha(x) = a*x + b*d|x| (linear viscosity plus dry friction)."""

    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("SignPlusLinear graph needs a >= 0, b >= 0")
        _set_default(self, "C_A", max(self.a, self.b))
        if self.a > 0:
            _set_default(self, "c_A", self.a)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sign(x)
        lo = self.a * x + self.b * np.where(x == 0, -1.0, s)
        hi = self.a * x + self.b * np.where(x == 0, 1.0, s)
        return lo, hi

    def _resolvent(self, lam, y):
        y = np.asarray(y, dtype=float)
        shrunk = np.sign(y) * np.maximum(np.abs(y) - lam * self.b, 0.0)
        return shrunk / (1.0 + lam * self.a)

    def primitive(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.a * x**2 + self.b * np.abs(x)


@dataclass(frozen=True)
class PiecewiseLinear(MonotoneGraph):
    """Monotone polygonal graph through ``points``.

    A vertical segment is encoded by repeating an abscissa with two
    ordinates, e.g. ``((0, 0), (1, 2), (1, 5), (2, 6))`` jumps from 2 to 5
    at x = 1. Outside the breakpoint range the graph continues with
    ``left_slope`` / ``right_slope``; by default the slope of the outermost
    non-vertical segment.
    """

    points: tuple = ((0.0, 0.0), (1.0, 1.0))
    left_slope: float | None = None
    right_slope: float | None = None

    def __post_init__(self):
        pts = []
        for x, y in self.points:
            p = (float(x), float(y))
            if not pts or pts[-1] != p:
                pts.append(p)
        if not pts:
            raise ValueError("PiecewiseLinear graph needs at least one point")
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if np.any(np.diff(xs) < 0) or np.any(np.diff(ys) < 0):
            raise ValueError("PiecewiseLinear breakpoints must be nondecreasing in x and y")
        if np.any((np.diff(xs) == 0) & (np.diff(ys) == 0)):
            raise ValueError("duplicate breakpoint")
        object.__setattr__(self, "points", tuple(pts))

        def outer(idx):
            for k in idx:
                dx = xs[k + 1] - xs[k]
                if dx > 0:
                    return (ys[k + 1] - ys[k]) / dx
            return 0.0

        n = len(xs)
        if self.left_slope is None:
            object.__setattr__(self, "left_slope", outer(range(n - 1)))
        if self.right_slope is None:
            object.__setattr__(self, "right_slope", outer(reversed(range(n - 1))))
        if self.left_slope < 0 or self.right_slope < 0:
            raise ValueError("extrapolation slopes must be nonnegative")
        z_lo, z_hi = self.evaluate(0.0)
        if not z_lo <= 0.0 <= z_hi:
            raise ValueError("PiecewiseLinear graph must contain the origin")

    @property
    def _xy(self):
        xs = np.array([p[0] for p in self.points])
        ys = np.array([p[1] for p in self.points])
        return xs, ys

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        xs, ys = self._xy
        i_lo = np.searchsorted(xs, x, side="left")
        i_hi = np.searchsorted(xs, x, side="right")
        hit = i_lo < i_hi
        # interior interpolation on the segment [xs[k-1], xs[k]]
        k = np.clip(i_lo, 1, max(len(xs) - 1, 1))
        if len(xs) > 1:
            x0, x1 = xs[k - 1], xs[k]
            y0, y1 = ys[k - 1], ys[k]
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(x1 > x0, (x - x0) / (x1 - x0), 0.0)
            val = y0 + w * (y1 - y0)
        else:
            val = np.full_like(x, ys[0])
        val = np.where(x < xs[0], ys[0] + self.left_slope * (x - xs[0]), val)
        val = np.where(x > xs[-1], ys[-1] + self.right_slope * (x - xs[-1]), val)
        lo = np.where(hit, ys[np.clip(i_lo, 0, len(xs) - 1)], val)
        hi = np.where(hit, ys[np.clip(i_hi - 1, 0, len(xs) - 1)], val)
        return lo, hi

    def _resolvent(self, lam, y):
        # x + lam*alpha(x) is again a monotone polygon; invert it by interpolation
        y = np.asarray(y, dtype=float)
        xs, ys = self._xy
        s = xs + lam * ys
        if len(xs) > 1:
            x = np.interp(y, s, xs)
        else:
            x = np.full_like(y, xs[0])
        left = xs[0] + (y - s[0]) / (1.0 + lam * self.left_slope)
        right = xs[-1] + (y - s[-1]) / (1.0 + lam * self.right_slope)
        return np.where(y < s[0], left, np.where(y > s[-1], right, x))


def graph_eval(g: MonotoneGraph, x):
    """Closed interval ``[lo, hi]`` equal to alpha(x)."""
    lo, hi = g.evaluate(x)
    if np.ndim(lo) == 0:
        return float(lo), float(hi)
    return lo, hi


def sample_coercivity(g: MonotoneGraph, xs=None) -> float | None:
    """Largest c > 0 with ``y*x >= c*x^2 - 1/c`` for all sampled selections.

    The left side minus the right side decreases in c, so the admissible set
    is an interval (0, c*]; c* is found by bisection. A sample only certifies
    its own range (default |x| <= 1e4, log-spaced). When c* moves by more
    than 1% on the inner half of the range it is an artifact of the range,
    and None is returned.
    """
    if xs is None:
        r = np.logspace(-3, 4, 2000)
        xs = np.concatenate((-r[::-1], [0.0], r))
    xs = np.asarray(xs, dtype=float)
    full = _largest_c(g, xs)
    half = _largest_c(g, xs[np.abs(xs) <= 0.5 * np.max(np.abs(xs))])
    if full is None or half is None or half > 1.01 * full:
        return None
    return full


def _largest_c(g, xs):
    lo, hi = g.evaluate(xs)
    yx = np.minimum(lo * xs, hi * xs)

    def ok(c):
        return bool(np.all(yx >= c * xs**2 - 1.0 / c))

    c_lo, c_hi = 1e-8, 1.0
    if not ok(c_lo):
        return None
    while ok(c_hi) and c_hi < 1e8:
        c_lo, c_hi = c_hi, 2 * c_hi
    for _ in range(100):
        mid = np.sqrt(c_lo * c_hi)
        if ok(mid):
            c_lo = mid
        else:
            c_hi = mid
    return float(c_lo)


def bisect_resolvent(g: MonotoneGraph, lam: float, y, rtol: float = 1e-14, maxiter: int = 200):
    """Generic resolvent by vectorized monotone bisection.

    Solves ``x + lam*xi = y`` with ``xi`` in alpha(x). The root lies between
    0 and y because 0 belongs to alpha(0); when ``C_A`` is declared the
    bracket is further cut to ``y -/+ (lam*C_A*(1+|y|) + 1)``.
    """
    y = np.asarray(y, dtype=float)
    lo = np.minimum(0.0, y)
    hi = np.maximum(0.0, y)
    if g.C_A is not None:
        pad = lam * g.C_A * (1 + np.abs(y)) + 1.0
        lo = np.maximum(lo, y - pad)
        hi = np.minimum(hi, y + pad)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise SolverError("non-finite bracket in resolvent")
    width = rtol * (1 + np.abs(y))
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        a_lo, a_hi = g.evaluate(mid)
        too_big = mid + lam * a_lo > y
        too_small = mid + lam * a_hi < y
        hi = np.where(too_big, mid, hi)
        lo = np.where(too_small, mid, lo)
        inside = ~(too_big | too_small)
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, mid, hi)
        if np.all(hi - lo <= width):
            break
    else:
        raise SolverError("resolvent bisection did not close the bracket")
    return 0.5 * (lo + hi)


def _as_output(x, like):
    if np.ndim(like) == 0:
        return float(x)
    return x


def resolvent(g: MonotoneGraph, lam: float, y):
    """J_lam(y) = (I + lam*alpha)^{-1}(y), nonexpansive."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    x = g._resolvent(lam, y)
    if not np.all(np.isfinite(x)):
        raise SolverError("resolvent produced non-finite values")
    return _as_output(x, y)


def yosida(g: MonotoneGraph, lam: float, y):
    """alpha_lam(y) = (y - J_lam(y))/lam, a (1/lam)-Lipschitz selection."""
    y_arr = np.asarray(y, dtype=float)
    x = np.asarray(resolvent(g, lam, y_arr))
    return _as_output((y_arr - x) / lam, y)


def inverse_shifted(g: MonotoneGraph, lam: float, z):
    """Solve lam*x + alpha_lam(x) = z for x.

    Writing w = J_lam(x) and xi = alpha_lam(x) in alpha(w), the equation
    becomes lam*w + (1 + lam^2)*xi = z, i.e. w is the resolvent of alpha
    with parameter (1 + lam^2)/lam evaluated at z/lam. The answer is then
    x = w + lam*xi.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    z_arr = np.asarray(z, dtype=float)
    mu = (1.0 + lam * lam) / lam
    w = np.asarray(g._resolvent(mu, z_arr / lam))
    xi = (z_arr - lam * w) / (1.0 + lam * lam)
    x = w + lam * xi
    if not np.all(np.isfinite(x)):
        raise SolverError("inverse_shifted produced non-finite values")
    return _as_output(x, z)


@dataclass(frozen=True)
class PointwiseOperator:
    """Superposition operator on grid functions: xi in A(w) iff xi_i in alpha(w_i)."""

    graph: MonotoneGraph

    def contains(self, w, xi, tol: float = 1e-10) -> bool:
        lo, hi = self.graph.evaluate(np.asarray(w, dtype=float))
        xi = np.asarray(xi, dtype=float)
        return bool(np.all((xi >= lo - tol * (1 + np.abs(lo))) & (xi <= hi + tol * (1 + np.abs(hi)))))

    def resolvent(self, lam, w):
        return resolvent(self.graph, lam, np.asarray(w, dtype=float))

    def yosida(self, lam, w):
        return yosida(self.graph, lam, np.asarray(w, dtype=float))

    def inverse_shifted(self, lam, z):
        return inverse_shifted(self.graph, lam, np.asarray(z, dtype=float))
