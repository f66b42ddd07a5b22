"""Dirichlet problem in a strip between two graphs.

The domain is ``{Gamma_1(x2) < x1 < Gamma_2(x2)}`` with data 0 below the
lower graph and 1 above the upper one.  Graphs are flat or sinusoidal in
``x2``.  The solution is computed by monotone value iteration started from
a maximum of subsolution barriers, and the module measures the boundary
growth, monotonicity and comparison properties of the result.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import game
from .errors import (AssumptionViolation, ConfigError, HypothesisUnverified, InsufficientResolution,
                     NumericalError, ParameterViolation, PostCheckFailure)
from .fields import Growth, MaxField, ScalarField, as_points, cut_paraboloid
from .operator import QuadratureConfig, check_exponent, ifl_eval

FLAT_LIPSCHITZ = 1e-6


# ---------------------------------------------------------------------------
# geometry

@dataclass(frozen=True)
class Graph:
    """``x1 = c + a sin(omega x2 + phase)``."""

    c: float
    a: float = 0.0
    omega: float = 0.0
    phase: float = 0.0

    @property
    def flat(self):
        return self.a == 0.0 or self.omega == 0.0

    def __call__(self, x2):
        x2 = np.asarray(x2, dtype=float)
        if self.flat:
            return np.full_like(x2, self.c)
        return self.c + self.a * np.sin(self.omega * x2 + self.phase)

    def d1(self, x2):
        x2 = np.asarray(x2, dtype=float)
        if self.flat:
            return np.zeros_like(x2)
        return self.a * self.omega * np.cos(self.omega * x2 + self.phase)

    def d2(self, x2):
        x2 = np.asarray(x2, dtype=float)
        if self.flat:
            return np.zeros_like(x2)
        return -self.a * self.omega ** 2 * np.sin(self.omega * x2 + self.phase)

    @property
    def lipschitz(self):
        return abs(self.a * self.omega)

    @property
    def c11_bound(self):
        return abs(self.a * self.omega) * np.sqrt(1.0 + self.omega ** 2)

    @property
    def bounds(self):
        return (self.c - abs(self.a), self.c + abs(self.a)) if not self.flat else (self.c, self.c)

    def shifted(self, dc):
        return Graph(self.c + dc, self.a, self.omega, self.phase)

    def distance(self, p1, p2):
        """Distance from ``(p1, p2)`` to the graph, with the foot point."""
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        if self.flat:
            return np.abs(p1 - self.c), np.full_like(p1, self.c), p2.copy()
        R = np.abs(p1 - self(p2))
        ts = p2[:, None] + R[:, None] * np.linspace(-1.0, 1.0, 65)[None, :]
        d2 = (p1[:, None] - self(ts)) ** 2 + (p2[:, None] - ts) ** 2
        k = np.argmin(d2, axis=1)
        t = ts[np.arange(ts.shape[0]), k]
        best = d2[np.arange(ts.shape[0]), k]
        step = 2.0 * R / 64.0
        lo, hi = t - step, t + step
        for _ in range(8):
            g, g1, g2 = self(t), self.d1(t), self.d2(t)
            f = (t - p2) + (g - p1) * g1
            fp = 1.0 + g1 * g1 + (g - p1) * g2
            ok = fp > 0
            t_new = np.where(ok, t - f / np.where(ok, fp, 1.0), t)
            t_new = np.clip(t_new, lo, hi)
            d_new = (p1 - self(t_new)) ** 2 + (p2 - t_new) ** 2
            better = d_new <= best
            t = np.where(better, t_new, t)
            best = np.where(better, d_new, best)
        return np.sqrt(best), self(t), t

    def crossings(self, x, v, T):
        """Line parameters in ``[-T, T]`` where ``x + t v`` meets the graph."""
        x1, x2 = float(x[0]), float(x[1]) if x.size > 1 else 0.0
        v1, v2 = float(v[0]), float(v[1]) if v.size > 1 else 0.0
        if self.flat or v2 == 0.0:
            if v1 == 0.0:
                return []
            c = float(self(np.array([x2]))[0])
            t = (c - x1) / v1
            return [t] if abs(t) <= T else []

        def phi(t):
            return x1 + t * v1 - float(self(np.array([x2 + t * v2]))[0])

        n = int(min(20000, max(400, 40 * T * (abs(self.omega * v2) + 1))))
        ts = np.linspace(-T, T, n)
        vals = x1 + ts * v1 - self(x2 + ts * v2)
        out = []
        sign = np.sign(vals)
        for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
            out.append(brentq(phi, ts[i], ts[i + 1], xtol=1e-14))
        out.extend(ts[vals == 0.0].tolist())
        return out


@dataclass(frozen=True)
class ConeSpec:
    """``C+ = {v : cos(theta) < v . e1 / |v| <= 1}`` and ``C- = -C+``."""

    theta: float

    def contains(self, v, sign=1):
        v = np.atleast_2d(np.asarray(v, dtype=float)) * sign
        nv = np.linalg.norm(v, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            c = v[:, 0] / nv
        return (nv > 0) & (c > np.cos(self.theta)) & (c <= 1.0 + 1e-15)

    def distance(self, pts, vertex, sign=1):
        """Distance from points to the closed cone ``vertex + sign * C+``, with projections."""
        q = (np.atleast_2d(pts) - vertex) * sign
        r = np.linalg.norm(q, axis=1)
        lat = q.copy()
        lat[:, 0] = 0.0
        rl = np.linalg.norm(lat, axis=1)
        phi = np.arctan2(rl, q[:, 0])
        d = np.where(phi <= self.theta, 0.0,
                     np.where(phi < self.theta + np.pi / 2, r * np.sin(phi - self.theta), r))
        proj = q.copy()
        mid = (phi > self.theta) & (phi < self.theta + np.pi / 2)
        if mid.any():
            unit_lat = np.zeros_like(q)
            nz = rl > 0
            unit_lat[nz] = lat[nz] / rl[nz, None]
            u = np.cos(self.theta) * np.eye(q.shape[1])[0][None, :] + np.sin(self.theta) * unit_lat
            proj[mid] = (r * np.cos(phi - self.theta))[mid, None] * u[mid]
        far = phi >= self.theta + np.pi / 2
        proj[far] = 0.0
        return d, vertex + sign * proj


class StripDomain:
    """Strip ``{Gamma_1 < x1 < Gamma_2}`` in ``R^N`` with graphs depending on ``x2``."""

    def __init__(self, dim, lower, upper, kind="flat", period=1.0, m=None, C1=None):
        self.dim = int(dim)
        self.lower, self.upper, self.kind = lower, upper, kind
        if self.dim < 1:
            raise ConfigError("dimension must be at least 1")
        if self.dim == 1 and not (lower.flat and upper.flat):
            raise ConfigError("a one-dimensional strip must be flat")
        self.period = float(period)
        xs = np.linspace(0.0, self.period, 2049)
        sep = upper(xs) - lower(xs)
        if np.min(lower(xs)) < -1e-12:
            raise AssumptionViolation("the lower graph must be non-negative")
        if np.min(sep) <= 0.0:
            raise AssumptionViolation("the graphs touch or cross")
        self.m = float(np.min(sep)) if m is None else float(m)
        if np.min(sep) < self.m - 1e-12:
            raise AssumptionViolation(f"sampled separation {np.min(sep):.6g} is below m = {self.m}")
        self.M = float(upper.bounds[1])
        self.C1 = max(lower.c11_bound, upper.c11_bound) if C1 is None else float(C1)
        if max(lower.c11_bound, upper.c11_bound) > self.C1 + 1e-12:
            raise AssumptionViolation("derivative bounds exceed C1")
        L = max(lower.lipschitz, upper.lipschitz)
        self.L = L if L > 0 else FLAT_LIPSCHITZ
        self.theta = float(np.arctan2(1.0, self.L))
        self.C_theta = float(np.cos(np.pi / 2 - self.theta))
        self.cone = ConeSpec(self.theta)

    def spec(self):
        return {"dim": self.dim, "kind": self.kind, "lower": self.lower.__dict__,
                "upper": self.upper.__dict__, "period": self.period, "m": self.m, "C1": self.C1}

    def _x2(self, pts):
        return pts[:, 1] if self.dim > 1 else np.zeros(pts.shape[0])

    def inside(self, pts):
        pts = as_points(pts, self.dim)
        x2 = self._x2(pts)
        return (pts[:, 0] > self.lower(x2)) & (pts[:, 0] < self.upper(x2))

    def below(self, pts):
        pts = as_points(pts, self.dim)
        return pts[:, 0] <= self.lower(self._x2(pts))

    def above(self, pts):
        pts = as_points(pts, self.dim)
        return pts[:, 0] >= self.upper(self._x2(pts))

    def exterior_value(self, pts):
        pts = as_points(pts, self.dim)
        out = np.full(pts.shape[0], np.nan)
        out[self.below(pts)] = 0.0
        out[self.above(pts)] = 1.0
        return out

    def _graph_distance(self, graph, pts):
        pts = as_points(pts, self.dim)
        d, f1, f2 = graph.distance(pts[:, 0], self._x2(pts))
        foot = pts.copy()
        foot[:, 0] = f1
        if self.dim > 1:
            foot[:, 1] = f2
        return d, foot

    def dist_minus(self, pts):
        return self._graph_distance(self.lower, pts)[0]

    def dist_plus(self, pts):
        return self._graph_distance(self.upper, pts)[0]

    def boundary_crossings(self, x, v, T=16.0):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.lower.crossings(x, v, T) + self.upper.crossings(x, v, T)

    @staticmethod
    def _graph_normal(graph, x2):
        g1 = graph.d1(np.asarray(x2, dtype=float))
        n = np.stack([np.ones_like(g1), -g1], axis=-1)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def normal_minus(self, x2):
        """Unit normal of the lower graph pointing into the domain (first two coordinates)."""
        return self._graph_normal(self.lower, x2)

    def normal_plus(self, x2):
        """Unit normal of the upper graph pointing into the domain."""
        return -self._graph_normal(self.upper, x2)

    def line_problem(self, h, floor=None):
        if self.dim != 1 and not (self.lower.flat and self.upper.flat):
            raise ConfigError("the line reduction needs a flat strip")
        return game.interval_problem(self.lower.c, self.upper.c, h, _step_data(self.upper.c), floor=floor)

    def strip_problem(self, h, floor=None, n_dirs=32, far_cells=256):
        if self.dim != 2:
            raise ConfigError("strip grids are two-dimensional")
        lo = self.lower
        up = self.upper
        g1 = (lo.c, lo.a if not lo.flat else 0.0, lo.omega, lo.phase)
        g2 = (up.c, up.a if not up.flat else 0.0, up.omega, up.phase)
        return game.StripProblem(g1, g2, h, self.period, n_dirs=n_dirs, far_cells=far_cells, floor=floor)


def _step_data(c2):
    def data(x):
        return (np.asarray(x, dtype=float) >= c2).astype(float)
    return data


def build_strip(spec):
    """Build a strip from ``{"kind": "flat" | "sinusoidal", ...}``."""
    spec = dict(spec)
    kind = spec.get("kind", "flat")
    dim = int(spec.get("dim", 1 if kind == "flat" else 2))
    if kind == "flat":
        c1 = float(spec.get("c1", 0.0))
        c2 = float(spec.get("c2", c1 + float(spec.get("width", 1.0))))
        lower, upper = Graph(c1), Graph(c2)
        period = float(spec.get("period", 1.0))
    elif kind == "sinusoidal":
        a = float(spec.get("amplitude", 0.1))
        a2 = float(spec.get("amplitude2", a))
        om = float(spec.get("frequency", 2 * np.pi))
        ph = float(spec.get("phase", 0.0))
        c1 = float(spec.get("c1", abs(a)))
        c2 = float(spec.get("c2", c1 + float(spec.get("width", 1.0))))
        lower, upper = Graph(c1, a, om, ph), Graph(c2, a2, om, ph)
        period = float(spec.get("period", 2 * np.pi / om))
    else:
        raise ConfigError(f"unknown strip kind {kind!r}")
    return StripDomain(dim, lower, upper, kind, period, spec.get("m"), spec.get("C1"))


# ---------------------------------------------------------------------------
# barriers

class ParaboloidEnvelope(ScalarField):
    """Supremum of cut paraboloids whose centres run over cones.

    ``side="sub"`` gives ``A (r0^2 - dist(x, E)^2)_+`` with ``E`` the union
    of ``x0 + C+`` over vertices ``x0 = (Gamma_1(xh) + t0, xh)``; ``"super"``
    mirrors it from the upper graph.  ``S=None`` takes every ``xh``, in
    which case ``E`` is the region above the shifted graph.  Values are
    patched to 0 below the domain and 1 above it.
    """

    def __init__(self, domain, S, A, t0, side="sub"):
        if side not in ("sub", "super"):
            raise ConfigError("side must be 'sub' or 'super'")
        if A < 0 or not 0 < t0 <= domain.M + 1e-12:
            raise ParameterViolation("need A >= 0 and 0 < t0 <= M")
        self.domain, self.A, self.t0, self.side = domain, float(A), float(t0), side
        self.dim = domain.dim
        self.r0 = domain.C_theta * self.t0
        self.growth = Growth("bounded", 1.0)
        self.sign = 1 if side == "sub" else -1
        if S is None:
            self.vertices = None
        else:
            g = domain.lower if side == "sub" else domain.upper
            if self.dim == 1:
                self.vertices = np.array([[g.c + self.sign * self.t0]])
            else:
                xh = np.asarray(S, dtype=float).reshape(-1, self.dim - 1)
                x1 = g(xh[:, 0]) + self.sign * self.t0
                self.vertices = np.column_stack([x1, xh])

    def _dist(self, pts):
        dom = self.domain
        if self.vertices is None:
            graph = (dom.lower.shifted(self.t0) if self.side == "sub" else dom.upper.shifted(-self.t0))
            x2 = dom._x2(pts)
            gv = graph(x2)
            outside = pts[:, 0] < gv if self.side == "sub" else pts[:, 0] > gv
            d = np.zeros(pts.shape[0])
            proj = pts.copy()
            if outside.any():
                dd, f1, f2 = graph.distance(pts[outside, 0], x2[outside])
                d[outside] = dd
                proj[outside, 0] = f1
                if self.dim > 1:
                    proj[outside, 1] = f2
            return d, proj
        best = np.full(pts.shape[0], np.inf)
        proj = pts.copy()
        for v in self.vertices:
            d, p = dom.cone.distance(pts, v, self.sign)
            better = d < best
            best = np.where(better, d, best)
            proj[better] = p[better]
        return best, proj

    def _eval(self, pts):
        d, _ = self._dist(pts)
        bump = self.A * np.maximum(self.r0 ** 2 - d * d, 0.0)
        val = bump if self.side == "sub" else 1.0 - bump
        val = np.where(self.domain.below(pts), 0.0, val)
        return np.where(self.domain.above(pts), 1.0, val)

    def _interior(self, x):
        x = as_points(x, self.dim)
        return bool(self.domain.inside(x)[0])

    def gradient(self, x):
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        if not self._interior(x):
            return np.zeros(self.dim)
        d, proj = self._dist(x)
        if d[0] >= self.r0:
            return np.zeros(self.dim)
        return -self.sign * 2.0 * self.A * (x[0] - proj[0])

    def c11(self, x):
        return 2.0 * self.A if self._interior(x) else 0.0

    def line_breaks(self, x, v):
        if self.dim == 1:
            return [(c - float(x[0])) / float(v[0]) for c in (self.domain.lower.c, self.domain.upper.c)
                    if v[0] != 0]
        return self.domain.boundary_crossings(x, v)

    def spec(self):
        return {"name": "paraboloid_envelope", "A": self.A, "t0": self.t0, "side": self.side,
                "S": None if self.vertices is None else self.vertices.tolist()}


def paraboloid_envelope(domain, S, A, t0, side="sub", s=None, c0=None):
    """Cut-paraboloid envelope barrier; validates ``A (C_theta t0)^(2-2s) <= c0`` when given."""
    if s is not None and c0 is not None:
        check_exponent(s)
        if A * (domain.C_theta * t0) ** (2 - 2 * s) > c0 * (1 + 1e-12):
            raise ParameterViolation("A * (C_theta t0)^(2-2s) exceeds c0")
    return ParaboloidEnvelope(domain, S, A, t0, side)


class GrowthBarrier(ScalarField):
    """``eps d(x, lower)^s`` in the domain (``"sub"``) or ``1 - eps d(x, upper)^s`` (``"super"``)."""

    def __init__(self, domain, eps, s, side="sub"):
        self.domain, self.eps, self.s, self.side = domain, float(eps), float(s), side
        self.dim = domain.dim
        self.growth = Growth("bounded", 1.0)

    def _distance(self, pts):
        g = self.domain.lower if self.side == "sub" else self.domain.upper
        return self.domain._graph_distance(g, pts)

    def _eval(self, pts):
        d, _ = self._distance(pts)
        core = self.eps * d ** self.s
        val = core if self.side == "sub" else 1.0 - core
        val = np.where(self.domain.below(pts), 0.0, val)
        return np.where(self.domain.above(pts), 1.0, val)

    def gradient(self, x):
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        if not self.domain.inside(x)[0]:
            return np.zeros(self.dim)
        d, foot = self._distance(x)
        unit = (x[0] - foot[0]) / d[0]
        g = self.eps * self.s * d[0] ** (self.s - 1) * unit
        return g if self.side == "sub" else -g

    def c11(self, x):
        x = np.asarray(x, dtype=float).reshape(1, self.dim)
        if not self.domain.inside(x)[0]:
            return 0.0
        d = self._distance(x)[0][0]
        return self.eps * self.s * d ** (self.s - 2) * (1.0 + d * self.domain.C1)

    def line_breaks(self, x, v):
        if self.dim == 1:
            return [(c - float(x[0])) / float(v[0]) for c in (self.domain.lower.c, self.domain.upper.c)
                    if v[0] != 0]
        return self.domain.boundary_crossings(x, v)

    def spec(self):
        return {"name": "growth_barrier", "eps": self.eps, "s": self.s, "side": self.side}


def admissible_growth_eps(domain, s):
    """Upper limit for ``eps`` in the growth barrier."""
    lim1 = (2 * domain.M / domain.C_theta) ** (-s)
    lim2 = domain.C_theta ** 2 / (8 * domain.M ** s)
    return min(lim1, lim2)


def growth_barrier(domain, eps, s, side="sub"):
    check_exponent(s)
    if eps <= 0 or eps >= admissible_growth_eps(domain, s):
        raise ParameterViolation(f"eps = {eps} is outside (0, {admissible_growth_eps(domain, s):.4g})")
    return GrowthBarrier(domain, eps, s, side)


def combined_barrier(domain, eps, s, A, t0):
    """``g_eps`` joined with the full paraboloid envelope."""
    return MaxField([growth_barrier(domain, eps, s), paraboloid_envelope(domain, None, A, t0)])


def gain_minus_loss(domain, eps, s, x):
    """Gain integral minus loss integral of the growth barrier along the normal line at ``x``."""
    x = np.asarray(x, dtype=float).reshape(1, domain.dim)
    d, foot = domain._graph_distance(domain.lower, x)
    t = float(d[0])
    v = (x[0] - foot[0]) / t
    hits = [c for c in domain.upper.crossings(x[0], v, 4 * domain.M / domain.C_theta + 1)
            if c > 0] if domain.dim > 1 else [domain.upper.c - float(x[0, 0])]
    t_up = min(hits)
    split = eps ** (-1.0 / s) - t

    def gain_f(eta):
        return (1 - eps * (t + eta) ** s) / eta ** (1 + 2 * s)

    def loss_f(eta):
        return (eps * (t + eta) ** s - 1) / eta ** (1 + 2 * s)

    gain = quad(gain_f, t_up, split, limit=200)[0] if split > t_up else 0.0
    loss = quad(loss_f, max(split, t_up), np.inf, limit=200)[0]
    return gain - loss


@lru_cache(maxsize=None)
def cut_paraboloid_constant(s, dim=1, n_radii=12):
    """``max_x -Delta(cut paraboloid)(x) / (A r0^(2-2s))`` for ``|x| < r0`` (unit A, r0)."""
    check_exponent(s)
    u = cut_paraboloid(1.0, 1.0, np.zeros(dim))
    worst = 0.0
    for rho in np.linspace(0.0, 0.95, n_radii):
        x = np.zeros(dim)
        x[0] = rho
        worst = max(worst, -ifl_eval(u, x, s).value)
    return worst


@dataclass
class C0Calibration:
    c0: float
    analytic: float
    C_s: float
    history: list = field(default_factory=list)


def analytic_c0(domain, s):
    G = (domain.C_theta / domain.M) ** (2 * s) / (2 * s)
    C_s = cut_paraboloid_constant(s, domain.dim)
    return G / (C_s + (domain.C_theta * domain.M) ** (2 * s) * G), C_s


def _envelope_samples(domain, env, n, rng):
    x0 = env.vertices[0]
    pts = [x0.copy()]
    tries = 0
    while len(pts) < n and tries < 100 * n:
        tries += 1
        z = rng.normal(size=domain.dim)
        z *= env.r0 * rng.uniform() ** (1.0 / domain.dim) / np.linalg.norm(z)
        p = x0 + z
        if domain.inside(p[None, :])[0] and env.value(p) > 1e-3 * env.A * env.r0 ** 2:
            pts.append(p)
    return np.array(pts)


def calibrate_c0(domain, s, t0_fracs=(0.25, 0.5, 1.0), n_samples=6, iters=10, seed=0, q=None):
    """Largest ``c0`` on a bisection grid passing the subsolution residual spot-check."""
    check_exponent(s)
    q = q or QuadratureConfig(K_dir=32)
    rng = np.random.default_rng(seed)
    xh = np.zeros((1, max(domain.dim - 1, 1)))
    setups = []
    for f in t0_fracs:
        t0 = f * domain.M
        probe = ParaboloidEnvelope(domain, xh, 1.0, t0)
        setups.append((t0, _envelope_samples(domain, probe, n_samples, rng)))
    history = []

    def passes(c0):
        for t0, pts in setups:
            A = c0 / (domain.C_theta * t0) ** (2 - 2 * s)
            env = ParaboloidEnvelope(domain, xh, A, t0)
            for p in pts:
                if env.value(p) <= 0:
                    continue
                try:
                    r = ifl_eval(env, p, s, q)
                except NumericalError:
                    continue
                if r.value < -(10 * r.err_est + 1e-8):
                    history.append((c0, False))
                    return False
        history.append((c0, True))
        return True

    lo, hi = 0.0, 1.0
    if passes(hi):
        lo = hi
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if passes(mid):
                lo = mid
            else:
                hi = mid
    an, C_s = analytic_c0(domain, s)
    return C0Calibration(lo, an, C_s, history)


# ---------------------------------------------------------------------------
# solution

@dataclass
class SolutionGrid:
    domain: StripDomain
    table: game.ValueTable
    s: float
    h: float
    floor: np.ndarray
    lower_barrier: np.ndarray
    upper_barrier: np.ndarray
    barrier_params: dict
    post_residuals: Optional[list] = None

    @property
    def values(self):
        return self.table.values

    @property
    def problem(self):
        return self.table.problem

    def at(self, pts):
        pts = as_points(pts, self.domain.dim)
        if self.domain.dim == 1:
            return self.table.at(pts[:, 0])
        return self.table.at(pts[:, :2])

    def coords(self):
        return self.problem.coords()

    def node_values(self):
        """Values at every stored node (flattened, matching :meth:`coords`)."""
        return np.asarray(self.values).reshape(-1)

    def free_mask(self):
        if self.domain.dim == 1:
            return np.ones(self.problem.n, dtype=bool)
        return self.problem.inside.reshape(-1)

    def as_field(self):
        sol = self
        return _GridField(sol)


class _GridField(ScalarField):
    def __init__(self, sol):
        self.sol = sol
        self.dim = sol.domain.dim
        self.growth = Growth("bounded", 1.0)

    def _eval(self, pts):
        return self.sol.at(pts)

    def line_breaks(self, x, v):
        if self.dim == 1:
            return [(c - float(x[0])) / float(v[0]) for c in (self.sol.domain.lower.c,
                                                              self.sol.domain.upper.c) if v[0] != 0]
        return self.sol.domain.boundary_crossings(x, v)


def default_barrier_params(domain, s):
    eps_g = 0.5 * admissible_growth_eps(domain, s)
    c0, _ = analytic_c0(domain, s)
    t0 = 0.25 * domain.m
    A = c0 / (domain.C_theta * t0) ** (2 - 2 * s)
    return {"eps": eps_g, "A": A, "t0": t0, "c0": c0}


def solve_dirichlet(domain, s, h, eps_game=None, tol=1e-6, max_sweeps=200000, barrier=None,
                    use_floor=True, n_dirs=32, far_cells=256, post_check=False, post_points=12,
                    q=None):
    """Perron solution by monotone value iteration from a max-of-barriers start."""
    check_exponent(s)
    params = dict(default_barrier_params(domain, s))
    if barrier:
        params.update(barrier)
    g_low = growth_barrier(domain, params["eps"], s, "sub")
    g_up = growth_barrier(domain, params["eps"], s, "super")
    env = paraboloid_envelope(domain, None, params["A"], params["t0"], "sub", s, params.get("c0"))
    if domain.dim == 1:
        probe = domain.line_problem(h)
        pts = probe.coords()
    elif domain.dim == 2:
        probe = domain.strip_problem(h, n_dirs=n_dirs, far_cells=far_cells)
        pts = probe.coords()
    else:
        raise ConfigError("grids are available for N = 1 and N = 2")
    lower_b = np.maximum(g_low(pts), env(pts))
    floor = np.maximum(lower_b, 0.0)
    upper_b = g_up(pts)
    if domain.dim == 1:
        prob = domain.line_problem(h, floor=floor if use_floor else None)
    else:
        shape = probe.shape
        prob = domain.strip_problem(h, floor=floor.reshape(shape) if use_floor else None,
                                    n_dirs=n_dirs, far_cells=far_cells)
    eps_game = game.default_eps(h, s) if eps_game is None else eps_game
    table = game.value_iterate(prob, s, eps_game, tol=tol, max_sweeps=max_sweeps)
    sol = SolutionGrid(domain, table, s, h, floor, lower_b, upper_b, params)
    if post_check:
        res = post_verify(sol, post_points, q=q)
        sol.post_residuals = res
        post_tol = 1e-2 * h ** (-(1 - s))
        bad = [r for r in res if abs(r["residual"]) > post_tol]
        if bad:
            raise PostCheckFailure(f"{len(bad)} post-check residuals exceed {post_tol:.3g}",
                                   witnesses=sorted(bad, key=lambda r: -abs(r["residual"]))[:5])
    return sol


def post_verify(sol, n_points=12, q=None, tau=None):
    """Operator residuals of a smooth interpolant at interior points with a clear gradient."""
    from scipy.interpolate import CubicSpline
    if sol.domain.dim != 1:
        raise ConfigError("post-verification is implemented for the line reduction")
    q = q or QuadratureConfig()
    prob = sol.problem
    a, b = prob.interval
    xs = np.concatenate([[a], prob.nodes, [b]])
    vs = np.concatenate([[0.0], sol.values, [1.0]])
    spline = CubicSpline(xs, vs)
    domain = sol.domain

    def func(p):
        x = p[:, 0]
        out = np.where(x <= a, 0.0, np.where(x >= b, 1.0, spline(np.clip(x, a, b))))
        return out

    fld = _SplineField(func, spline, a, b)
    tau = tau if tau is not None else 10 * sol.h
    out = []
    for x in np.linspace(a, b, n_points + 2)[1:-1]:
        g = float(spline(x, 1))
        if abs(g) <= tau:
            out.append({"x": float(x), "residual": 0.0, "excluded": True})
            continue
        r = ifl_eval(fld, np.array([x]), sol.s, q)
        out.append({"x": float(x), "residual": r.value, "err_est": r.err_est, "excluded": False})
    return out


class _SplineField(ScalarField):
    def __init__(self, func, spline, a, b):
        self.func, self.spline, self.a, self.b = func, spline, a, b
        self.dim = 1
        self.growth = Growth("bounded", 1.0)

    def _eval(self, pts):
        return self.func(pts)

    def gradient(self, x):
        return np.array([float(self.spline(float(x[0]), 1))])

    def c11(self, x):
        return float(np.max(np.abs(self.spline(np.linspace(self.a, self.b, 200), 2))))

    def line_breaks(self, x, v):
        return [(c - float(x[0])) / float(v[0]) for c in self.spline.x]


# ---------------------------------------------------------------------------
# measurements

def _boundary_samples(domain, h, d_lo, d_hi, n_per_octave=4, n_lines=8, side="minus"):
    ratio = 2 ** (1.0 / n_per_octave)
    k = int(np.floor(np.log(d_hi / d_lo) / np.log(ratio)))
    ds = d_lo * ratio ** np.arange(k + 1)
    if domain.dim == 1:
        base = domain.lower.c if side == "minus" else domain.upper.c
        sgn = 1.0 if side == "minus" else -1.0
        return ds, (base + sgn * ds)[:, None], np.repeat(ds, 1)
    x2 = np.linspace(0.0, domain.period, n_lines, endpoint=False)
    pts, dist = [], []
    for t in x2:
        if side == "minus":
            b = np.array([float(domain.lower(np.array([t]))[0]), t])
            n = domain.normal_minus(np.array([t]))[0]
        else:
            b = np.array([float(domain.upper(np.array([t]))[0]), t])
            n = domain.normal_plus(np.array([t]))[0]
        for d in ds:
            p = np.zeros(domain.dim)
            p[:2] = b + d * n
            pts.append(p)
            dist.append(d)
    return ds, np.array(pts), np.array(dist)


@dataclass
class ExponentFit:
    sigma_minus: float
    sigma_plus: float
    sigma_interior: float
    bands: int
    details: dict


def fit_boundary_exponents(U, domain=None, h=None, d_max=None, n_per_octave=4):
    """Boundary growth exponents and an interior Hoelder-exponent fit.

    ``sigma_minus`` is the log-log slope of ``U`` against ``d(x, lower)`` over
    ``[2h, 0.1 m]`` along inward normals (``sigma_plus`` likewise for
    ``1 - U`` at the upper graph).  ``sigma_interior`` is the log-log slope
    of the modulus of continuity of ``U`` on the closed domain over a dyadic
    ladder of scales.  Distance bands are half-octaves.
    """
    from .harness import modulus_ladder
    if isinstance(U, SolutionGrid):
        domain, h, ev = U.domain, U.h, U.at
    else:
        if domain is None or h is None:
            raise ConfigError("fitting a field needs the domain and h")
        ev = U
    d_lo = 2 * h
    d_hi = 0.1 * domain.m if d_max is None else d_max
    if d_hi <= d_lo:
        raise InsufficientResolution("the fitting window [2h, 0.1 m] is empty")
    bands = int(np.floor(2 * np.log2(d_hi / d_lo) + 1e-9))
    if bands < 4:
        raise InsufficientResolution(f"only {bands} distance bands in [2h, 0.1 m]")
    fits = {}
    for side in ("minus", "plus"):
        _, pts, dist = _boundary_samples(domain, h, d_lo, d_hi, n_per_octave, side=side)
        vals = np.asarray(ev(pts), dtype=float)
        y = vals if side == "minus" else 1.0 - vals
        ok = y > 0
        if ok.sum() < 4:
            fits[side] = np.nan
            continue
        fits[side] = float(np.polyfit(np.log(dist[ok]), np.log(y[ok]), 1)[0])
    # interior modulus along e1 lines through the closed domain
    if domain.dim == 1:
        xs = np.arange(domain.lower.c, domain.upper.c + 0.5 * h, h)
        prof = [np.asarray(ev(xs[:, None]), dtype=float)]
    else:
        prof = []
        for t in np.linspace(0.0, domain.period, 8, endpoint=False):
            lo = float(domain.lower(np.array([t]))[0])
            up = float(domain.upper(np.array([t]))[0])
            xs = np.arange(lo, up + 1e-12, h)
            p = np.zeros((xs.size, domain.dim))
            p[:, 0] = xs
            p[:, 1] = t
            prof.append(np.asarray(ev(p), dtype=float))
    deltas = h * 2.0 ** np.arange(1, int(np.floor(np.log2(domain.m / (4 * h)))) + 1)
    osc = np.zeros(deltas.size)
    for pr in prof:
        osc = np.maximum(osc, modulus_ladder(pr, h, deltas, gamma=0.0))
    ok = osc > 0
    sigma_int = float(np.polyfit(np.log(deltas[ok]), np.log(osc[ok]), 1)[0]) if ok.sum() >= 2 else np.nan
    return ExponentFit(fits["minus"], fits["plus"], sigma_int, bands,
                       {"deltas": deltas.tolist(), "oscillation": osc.tolist(), "window": [d_lo, d_hi]})


@dataclass
class MonotonicityReport:
    beta_max: float
    alpha: float
    n_pairs: int
    violations: list
    min_increment: float


def _grid_lines(U, domain, h):
    """Values on e1 grid lines with per-node distances to both graphs."""
    if isinstance(U, SolutionGrid):
        if domain is None:
            domain = U.domain
        h = U.h
        if domain.dim == 1:
            prob = U.problem
            xs = prob.nodes
            vals = U.values
            return [(xs[:, None], vals)], domain, h
        prob = U.problem
        X1, X2 = prob.mesh()
        lines = []
        for j in range(prob.shape[1]):
            p = np.column_stack([X1[:, j], X2[:, j]])
            lines.append((p, U.values[:, j]))
        return lines, domain, h
    if domain is None or h is None:
        raise ConfigError("checking a field needs the domain and h")
    if domain.dim == 1:
        xs = np.arange(domain.lower.c + h, domain.upper.c - 0.5 * h, h)
        return [(xs[:, None], np.asarray(U(xs[:, None]), dtype=float))], domain, h
    lines = []
    for t in np.arange(0.0, domain.period - 1e-12, h):
        xs = np.arange(domain.lower.bounds[0] - h, domain.upper.bounds[1] + h, h)
        p = np.zeros((xs.size, domain.dim))
        p[:, 0], p[:, 1] = xs, t
        lines.append((p, np.asarray(U(p), dtype=float)))
    return lines, domain, h


def check_uniform_monotonicity(U, beta=None, alpha=None, h_range=(1, 2, 4), s=None, domain=None,
                               h=None, tol=1e-9):
    """Largest ``beta`` with ``U(x) + beta k^alpha <= U(x + k e1)`` over grid pairs.

    Pairs use steps ``k = j h`` for ``j`` in ``h_range`` and base points whose
    distance to the boundary exceeds ``k``.  ``alpha`` defaults to ``1 + s``.
    """
    if alpha is None:
        if s is None:
            s = getattr(U, "s", None)
        if s is None:
            raise ConfigError("need alpha or s")
        alpha = 1.0 + s
    lines, domain, h = _grid_lines(U, domain, h)
    ratios, viol = [], []
    n_pairs = 0
    min_inc = np.inf
    for pts, vals in lines:
        dm = domain.dist_minus(pts)
        dp = domain.dist_plus(pts)
        ins = domain.inside(pts)
        for j in h_range:
            k = j * h
            if j >= vals.size:
                continue
            base = ins[:-j] & (dm[:-j] > k) & (dp[:-j] > k)
            if not base.any():
                continue
            inc = vals[j:][base] - vals[:-j][base]
            n_pairs += inc.size
            min_inc = min(min_inc, float(inc.min()))
            ratios.append(inc / k ** alpha)
            need = 0.0 if beta is None else beta * k ** alpha
            bad = np.flatnonzero(inc < need - tol)
            for b in bad[:20]:
                viol.append({"x": pts[:-j][base][b].tolist(), "step": k, "increment": float(inc[b])})
    if not ratios:
        raise InsufficientResolution("no admissible pairs for the monotonicity check")
    r = np.concatenate(ratios)
    return MonotonicityReport(max(0.0, float(r.min())), float(alpha), n_pairs, viol, float(min_inc))


def check_cone_monotonicity(sol, radius_cells=4, tol=1e-10):
    """Violations of ``U(x + y) >= U(x)`` for grid vectors ``y`` in the open cone C+."""
    V = np.asarray(sol.values)
    L = sol.domain.L
    out = []
    n_checked = 0
    if V.ndim == 1:
        d = np.diff(V)
        n_checked = d.size
        for i in np.flatnonzero(d < -tol):
            out.append({"i": int(i), "shift": [1], "drop": float(-d[i])})
        return out, n_checked
    n1, n2 = V.shape
    for k1 in range(1, radius_cells + 1):
        for k2 in range(-radius_cells, radius_cells + 1):
            if not k1 > L * abs(k2):
                continue
            shifted = np.roll(V, -k2, axis=1)[k1:, :]
            drop = V[:-k1, :] - shifted
            n_checked += drop.size
            for i, j in zip(*np.nonzero(drop > tol)):
                out.append({"i": int(i), "j": int(j), "shift": [k1, k2], "drop": float(drop[i, j])})
    return out, n_checked


def barrier_sandwich(sol, tol=1e-12):
    """Counts of grid nodes violating ``g_eps <= U <= 1 - g'_eps`` in the domain."""
    vals = sol.node_values()
    free = sol.free_mask()
    g_lo = np.asarray(sol.lower_barrier).reshape(-1)
    g_up = np.asarray(sol.upper_barrier).reshape(-1)
    below = np.flatnonzero(free & (vals < g_lo - tol))
    above = np.flatnonzero(free & (vals > g_up + tol))
    return {"lower_violations": int(below.size), "upper_violations": int(above.size),
            "min_gap_lower": float(np.min((vals - g_lo)[free])),
            "min_gap_upper": float(np.min((g_up - vals)[free]))}


@dataclass
class ComparisonVerdict:
    holds: bool
    max_gap: float
    witness: Optional[list]
    skipped: int
    details: dict


def comparison_check(u_sub, w_sup, interior, exterior, s, tol=1e-8, residual_tol=None, q=None,
                     check_residuals=True):
    """Check ``u_sub <= w_sup`` at interior samples after validating the hypotheses.

    Raises :class:`HypothesisUnverified` when the exterior ordering fails or
    either function fails its residual spot-check.
    """
    interior = np.atleast_2d(np.asarray(interior, dtype=float))
    exterior = np.atleast_2d(np.asarray(exterior, dtype=float))
    gap_ext = u_sub(exterior) - w_sup(exterior)
    if np.any(gap_ext > tol):
        raise HypothesisUnverified(f"exterior ordering fails by {float(gap_ext.max()):.3g}")
    skipped = 0
    details = {"sub_residuals": [], "sup_residuals": []}
    if check_residuals:
        q = q or QuadratureConfig()
        for p in interior:
            for fld, sign, key in ((u_sub, 1.0, "sub_residuals"), (w_sup, -1.0, "sup_residuals")):
                try:
                    r = ifl_eval(fld, p, s, q)
                except NumericalError:
                    skipped += 1
                    continue
                rt = residual_tol if residual_tol is not None else 10 * r.err_est + 1e-6
                details[key].append(r.value)
                if sign * r.value < -rt:
                    raise HypothesisUnverified(
                        f"{'sub' if sign > 0 else 'super'}solution residual check fails at {p.tolist()}")
        if skipped >= 2 * len(interior):
            raise HypothesisUnverified("no interior sample admitted a residual check")
    gap = u_sub(interior) - w_sup(interior)
    k = int(np.argmax(gap))
    holds = bool(gap[k] <= tol)
    return ComparisonVerdict(holds, float(gap[k]), None if holds else interior[k].tolist(), skipped, details)
