"""Two-obstacle problem with obstacles depending on ``x1``.

The solution lies between a lower obstacle ``G-`` and an upper obstacle
``G+``; it is a subsolution where it is above ``G-`` and a supersolution
where it is below ``G+``.  Obstacles are monotone along ``e1``: ``G+``
decays to 0 as ``x1 -> -inf`` and ``G-`` rises to 1 as ``x1 -> +inf``.

The solver reduces to the line (the obstacles depend on ``x1`` only) and
runs a projected monotone value iteration started from ``G-``.  The module
also audits the structural assumptions on the obstacles, builds the
paraboloid barriers and measures coincidence, Lipschitz and detachment
behaviour of the computed solution.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import game
from .dirichlet import ConeSpec, cut_paraboloid_constant
from .errors import (AssumptionViolation, ConfigError, InsufficientResolution, ParameterViolation,
                     PostCheckFailure)
from .fields import Growth, ScalarField, as_points
from .operator import QuadratureConfig, check_exponent, ifl_eval


# ---------------------------------------------------------------------------
# obstacles

class X1Field(ScalarField):
    """``f(x1)`` on ``R^N`` with analytic first and second derivatives."""

    def __init__(self, f, df, ddf, dim=1, kinks=(), bound=1.0):
        self.f, self.df, self.ddf = f, df, ddf
        self.dim = int(dim)
        self.kinks = tuple(float(k) for k in kinks)
        self.growth = Growth("bounded", float(bound))

    def _eval(self, pts):
        return np.asarray(self.f(pts[:, 0]), dtype=float)

    def gradient(self, x):
        g = np.zeros(self.dim)
        g[0] = float(self.df(np.array([float(x[0])]))[0])
        return g

    def c11(self, x):
        t = float(x[0])
        if any(abs(t - k) < 1e-12 for k in self.kinks):
            return None
        return abs(float(self.ddf(np.array([t]))[0]))

    def line_breaks(self, x, v):
        if abs(v[0]) < 1e-15:
            return []
        return [(k - float(x[0])) / float(v[0]) for k in self.kinks]


def _upper_model(g):
    def f(t):
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        m = t < -1.0
        out[m] = np.abs(t[m]) ** (-g)
        return out

    def df(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = t < -1.0
        out[m] = g * np.abs(t[m]) ** (-g - 1)
        return out

    def ddf(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = t < -1.0
        out[m] = g * (g + 1) * np.abs(t[m]) ** (-g - 2)
        return out

    return f, df, ddf


def _lower_model(g):
    fu, dfu, ddfu = _upper_model(g)
    return (lambda t: 1.0 - fu(-np.asarray(t, dtype=float)),
            lambda t: dfu(-np.asarray(t, dtype=float)),
            lambda t: -ddfu(-np.asarray(t, dtype=float)))


@dataclass
class ObstaclePair:
    """Obstacles with the constants used by the existence and regularity arguments.

    ``A_rule(x1, side)`` gives the opening of the touching paraboloid at a
    point with first coordinate ``x1``; ``side`` is ``"plus"`` (paraboloid
    below ``G+``) or ``"minus"`` (paraboloid above ``G-``).
    """

    plus: X1Field
    minus: X1Field
    L0: float
    l_M: Callable[[float], float]
    L_M: Callable[[float], float]
    gamma1: Optional[float]
    gamma2: Optional[float]
    M0: float
    rho0: float
    alpha_decay: Optional[float]
    A_rule: Callable[[float, str], float]
    theta: float = np.pi / 4
    name: str = "custom"
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.plus.dim

    @property
    def cone(self):
        return ConeSpec(self.theta)

    @property
    def C_theta(self):
        return 1.0 if self.dim == 1 else float(np.sin(self.theta))

    def profile(self, side):
        fld = self.plus if side == "plus" else self.minus
        return fld.f, fld.df, fld.ddf

    def spec(self):
        return {"kind": self.name, **self.params, "dim": self.dim, "theta": self.theta}


def model_obstacles(gamma1, gamma2, dim=1, theta=np.pi / 4, rho0=0.5):
    """``G+ = |x1|^-g1`` for ``x1 <= -1`` (else 1) and ``G- = 1 - x1^-g2`` for ``x1 >= 1`` (else 0)."""
    if not (gamma1 > 0 and gamma2 > 0):
        raise ConfigError("decay powers must be positive")
    if not 0 < rho0 < 1:
        raise ConfigError("rho0 must lie in (0, 1)")
    g1, g2 = float(gamma1), float(gamma2)
    plus = X1Field(*_upper_model(g1), dim=dim, kinks=(-1.0,))
    minus = X1Field(*_lower_model(g2), dim=dim, kinks=(1.0,))
    slope_factor = 1.0 if dim == 1 else float(np.cos(theta))

    def l_M(M):
        # smallest slope on the non-flat part of |x1| <= M
        M = max(float(M), 1.0)
        return slope_factor * min(g1 * M ** (-g1 - 1), g2 * M ** (-g2 - 1))

    def L_M(M):
        M = float(M)
        if 2 * M <= 1.0:
            return 0.0
        t = max(M, 1.0)
        return max(g1 * t ** (-g1 - 1), g2 * t ** (-g2 - 1))

    kappa = {"plus": g1 * (g1 + 1) / 2, "minus": g2 * (g2 + 1) / 2}
    gam = {"plus": g1, "minus": g2}

    def A_rule(x1, side):
        return kappa[side] * abs(float(x1)) ** (-gam[side] - 2)

    # rho0 > (1 + g / (2 (g + 1))) |x1|^-g decides where the paraboloid bound starts
    M0 = max(max((1 + g / (2 * (g + 1))) / rho0, 1.0) ** (1 / g) for g in (g1, g2)) * 1.01
    M0 = max(M0, 2.0)
    return ObstaclePair(plus, minus, max(g1, g2), l_M, L_M, g1, g2, M0, float(rho0),
                        None, A_rule, float(theta), "model", {"gamma1": g1, "gamma2": g2})


def touching_A(pair, x1, side, window=8.0, n=801, A_max=1e3, iters=60):
    """Smallest opening for which the paraboloid at ``x1`` stays on the correct side of the obstacle."""
    f, df, _ = pair.profile(side)
    t = np.linspace(x1 - window, x1 + window, n)
    base = f(np.array([x1]))[0]
    g = df(np.array([x1]))[0]
    sgn = -1.0 if side == "plus" else 1.0
    tang = base + g * (t - x1)

    def ok(A):
        p = tang + sgn * A * (t - x1) ** 2
        return np.all(p <= f(t) + 1e-14) if side == "plus" else np.all(p >= f(t) - 1e-14)

    if ok(0.0):
        return 0.0
    if not ok(A_max):
        raise AssumptionViolation(f"no touching paraboloid at x1 = {x1} up to A = {A_max}")
    lo, hi = 0.0, A_max
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def profile_obstacles(plus, dplus, ddplus, minus, dminus, ddminus, L0, dim=1, theta=np.pi / 4,
                      rho0=0.5, M0=4.0, kinks_plus=(), kinks_minus=(), name="custom", params=None):
    """Obstacle pair from vectorised profiles; constants are measured on a sample grid."""
    pf = X1Field(plus, dplus, ddplus, dim=dim, kinks=kinks_plus)
    mf = X1Field(minus, dminus, ddminus, dim=dim, kinks=kinks_minus)
    slope_factor = 1.0 if dim == 1 else float(np.cos(theta))

    def l_M(M):
        t = np.linspace(-M, M, 4001)
        vals = []
        for f, df, upper in ((plus, dplus, True), (minus, dminus, False)):
            act = f(t) < 1.0 if upper else f(t) > 0.0
            if act.any():
                vals.append(np.min(np.abs(df(t[act]))))
        return slope_factor * (min(vals) if vals else 0.0)

    def L_M(M):
        out = 0.0
        for a, b in ((-2 * M, -M), (M, 2 * M)):
            t = np.linspace(a, b, 2001)
            out = max(out, float(np.max(np.abs(dplus(t)))) + float(np.max(np.abs(dminus(t)))))
        return out

    pair = ObstaclePair(pf, mf, float(L0), l_M, L_M, None, None, float(M0), float(rho0), None,
                        None, float(theta), name, dict(params or {}))
    pair.A_rule = lambda x1, side: touching_A(pair, x1, side)
    return pair


def constant_obstacles(lower=0.0, upper=1.0, dim=1):
    """Flat pair; it violates the limit assumptions and serves as a degenerate case."""
    lo, up = float(lower), float(upper)
    z = lambda t: np.zeros_like(np.asarray(t, dtype=float))
    return profile_obstacles(lambda t: np.full_like(np.asarray(t, dtype=float), up), z, z,
                             lambda t: np.full_like(np.asarray(t, dtype=float), lo), z, z,
                             L0=0.0, dim=dim, name="constant", params={"lower": lo, "upper": up})


def build_obstacles(spec):
    kind = spec.get("kind", "model")
    dim = int(spec.get("dim", 1))
    theta = float(spec.get("theta", np.pi / 4))
    if kind == "model":
        return model_obstacles(float(spec.get("gamma1", 1.0)), float(spec.get("gamma2", 1.0)),
                               dim=dim, theta=theta, rho0=float(spec.get("rho0", 0.5)))
    if kind == "constant":
        return constant_obstacles(float(spec.get("lower", 0.0)), float(spec.get("upper", 1.0)), dim)
    raise ConfigError(f"unknown obstacle kind {kind!r}")


# ---------------------------------------------------------------------------
# assumption audit

def _paraboloid_terms(pair, x1, side):
    """``(A, level)`` where level is ``G+ + |grad|^2/4A`` or ``1 - G- + |grad|^2/4A``."""
    f, df, _ = pair.profile(side)
    A = pair.A_rule(x1, side)
    v = f(np.array([x1]))[0]
    g = df(np.array([x1]))[0]
    base = v if side == "plus" else 1.0 - v
    level = base + (g * g / (4 * A) if A > 0 else np.inf)
    return A, level


def audit_obstacles(pair, s, window=40.0, n_samples=400, seed=0):
    """Evaluate each structural inequality on samples; returns a JSON-ready report."""
    check_exponent(s)
    rng = np.random.default_rng(seed)
    fp, dfp, _ = pair.profile("plus")
    fm, dfm, _ = pair.profile("minus")
    report = {}
    t = np.linspace(-window, window, 8001)
    gp, gm = fp(t), fm(t)
    bad = np.flatnonzero((gm < 0) | (gp > 1) | (gm >= gp))
    report["ordering"] = {"pass": bad.size == 0, "witnesses": t[bad[:5]].tolist()}

    far = 10.0 ** np.arange(2, 9)
    lim_p, lim_m = fp(-far), fm(far)
    ok = bool(lim_p[-1] < 1e-2 and lim_m[-1] > 1 - 1e-2 and np.all(np.diff(lim_p) <= 1e-15)
              and np.all(np.diff(lim_m) >= -1e-15))
    report["limits"] = {"pass": ok, "plus_far": lim_p.tolist(), "minus_far": lim_m.tolist()}

    # strict monotonicity away from 0 and 1
    wit = []
    for M in (2.0, 5.0, 10.0):
        lM = pair.l_M(M)
        for f, act_fn in ((fp, lambda v: v < 1.0), (fm, lambda v: v > 0.0)):
            x = rng.uniform(-M, M, n_samples)
            y = x - rng.uniform(1e-3, 1.0, n_samples)
            keep = (np.abs(y) <= M) & act_fn(f(x)) & act_fn(f(y))
            r = np.abs(f(x[keep]) - f(y[keep])) / (x[keep] - y[keep])
            low = np.flatnonzero(r < lM * (1 - 1e-9))
            wit += [{"M": M, "x": float(x[keep][i]), "y": float(y[keep][i]), "ratio": float(r[i])}
                    for i in low[:3]]
    report["bound_from_below"] = {"pass": not wit and pair.l_M(10.0) > 0, "witnesses": wit}

    wit, Ls = [], []
    for M in (1.0, 2.0, 5.0, 10.0, 20.0, 40.0):
        LM = pair.L_M(M)
        Ls.append(LM)
        for sgn in (-1, 1):
            x = sgn * rng.uniform(M, 2 * M, n_samples)
            y = sgn * rng.uniform(M, 2 * M, n_samples)
            d = np.abs(x - y)
            keep = d > 1e-9
            r = (np.abs(fp(x) - fp(y)) + np.abs(fm(x) - fm(y)))[keep] / d[keep]
            hi = np.flatnonzero(r > LM * (1 + 1e-9) + 1e-15)
            wit += [{"M": M, "x": float(x[keep][i]), "y": float(y[keep][i]), "ratio": float(r[i])}
                    for i in hi[:3]]
    decays = all(b <= a + 1e-15 for a, b in zip(Ls[1:], Ls[2:])) and Ls[-1] < Ls[1]
    report["lipschitz_decay"] = {"pass": not wit and decays, "L_M": Ls, "witnesses": wit}

    ladder = pair.M0 * 2.0 ** np.arange(0, 12, 0.5)
    for side, sgn in (("minus", 1.0), ("plus", -1.0)):
        R, lev, wit_touch = [], [], []
        for t1 in ladder:
            try:
                A, level = _paraboloid_terms(pair, sgn * t1, side)
            except AssumptionViolation as exc:
                wit_touch.append({"x1": float(sgn * t1), "error": str(exc)})
                R.append(np.inf)
                lev.append(np.inf)
                continue
            R.append(A ** s * level ** (1 - s) if np.isfinite(level) else np.inf)
            lev.append(level)
            if not _touches(pair, sgn * t1, side, A):
                wit_touch.append({"x1": float(sgn * t1), "A": A})
        R, lev = np.array(R), np.array(lev)
        if np.all(np.isfinite(R)) and np.all(R > 0):
            slopes = -np.diff(np.log(R)) / np.diff(np.log(ladder))
            alpha = float(slopes.min())
            C = float(np.max(R * ladder ** alpha))
        else:
            alpha, C = float("nan"), float("nan")
        report[f"paraboloid_{side}_a"] = {"pass": bool(alpha > 2 * s), "alpha_verified": alpha,
                                          "C": C, "witnesses": wit_touch}
        badb = np.flatnonzero(~(lev < pair.rho0))
        report[f"paraboloid_{side}_b"] = {"pass": badb.size == 0, "rho0": pair.rho0,
                                          "max_level": float(np.max(lev)),
                                          "witnesses": [float(sgn * ladder[i]) for i in badb[:5]]}
    alphas = [report[f"paraboloid_{k}_a"]["alpha_verified"] for k in ("plus", "minus")]
    pair.alpha_decay = float(np.nanmin(alphas)) if np.any(np.isfinite(alphas)) else None
    report["pass"] = all(v["pass"] for v in report.values() if isinstance(v, dict))
    return report


def _touches(pair, x1, side, A, window=None, n=2001):
    f, df, _ = pair.profile(side)
    w = window or max(4.0, abs(x1))
    t = np.linspace(x1 - w, x1 + w, n)
    v = f(np.array([x1]))[0]
    g = df(np.array([x1]))[0]
    if side == "plus":
        return bool(np.all(v + g * (t - x1) - A * (t - x1) ** 2 <= f(t) + 1e-12))
    return bool(np.all(v + g * (t - x1) + A * (t - x1) ** 2 >= f(t) - 1e-12))


# ---------------------------------------------------------------------------
# barriers

def _half_level(pair, rho0):
    """Smallest ``x1`` beyond which ``G- >= (1 + rho0) / 2``."""
    fm = pair.minus.f
    target = 0.5 * (1 + rho0)
    hi = 1.0
    while fm(np.array([hi]))[0] < target:
        hi *= 2
        if hi > 1e12:
            raise AssumptionViolation("lower obstacle never reaches (1 + rho0) / 2")
    lo = -hi
    return brentq(lambda t: fm(np.array([t]))[0] - target, lo, hi, xtol=1e-12)


def barrier_threshold(pair, s, t_max=1e4, n=400):
    """Distance ``M~`` beyond which single-point paraboloid barriers are sub/supersolutions.

    Uses the lower bound ``gain - C_s A r0^(2-2s)`` where the gain comes from
    the region ``G- >= (1 + rho0)/2`` seen at cone-reduced distance.
    """
    check_exponent(s)
    C_s = cut_paraboloid_constant(s, pair.dim)
    M_half = _half_level(pair, pair.rho0)
    ts = np.geomspace(max(pair.M0, 1.0), t_max, n)
    fp, dfp, _ = pair.profile("plus")
    ok = np.zeros(n, dtype=bool)
    for k, t in enumerate(ts):
        x1 = -t
        A, level = _paraboloid_terms(pair, x1, "plus")
        if not (A > 0 and level < pair.rho0):
            continue
        g = dfp(np.array([x1]))[0]
        r0 = np.sqrt(level / A)
        far_edge = x1 + g / (2 * A) - r0
        D = max(M_half - far_edge, 1e-12)
        gain = (0.5 * (1 + pair.rho0) - level) / (2 * s) * (pair.C_theta / D) ** (2 * s)
        loss = C_s * A ** s * level ** (1 - s)
        ok[k] = gain >= loss
    if not ok[-1]:
        raise AssumptionViolation("barrier gain never dominates on the sampled range")
    bad = np.flatnonzero(~ok)
    return float(ts[bad[-1] + 1]) if bad.size else float(ts[0])


class ObstacleBarrier(ScalarField):
    """``P+ = max(sup over S of the cone envelope of p+, 0) v G-`` or the mirror ``P-``."""

    def __init__(self, pair, S, side="sub"):
        if side not in ("sub", "super"):
            raise ConfigError("side must be 'sub' or 'super'")
        self.pair, self.side = pair, side
        self.dim = pair.dim
        self.growth = Growth("bounded", 1.0)
        self.cone = ConeSpec(pair.theta)
        S = np.zeros((0, self.dim)) if S is None else np.atleast_2d(np.asarray(S, dtype=float))
        if S.size and S.shape[1] != self.dim:
            raise ConfigError("barrier centres must match the obstacle dimension")
        self.S = S.reshape(-1, self.dim)
        pside = "plus" if side == "sub" else "minus"
        f, df, _ = pair.profile(pside)
        self.items = []
        for xt in self.S:
            A = pair.A_rule(xt[0], pside)
            if A <= 0:
                raise ParameterViolation("barrier paraboloids need a positive opening")
            v = f(np.array([xt[0]]))[0]
            g = df(np.array([xt[0]]))[0]
            shift = np.zeros(self.dim)
            if side == "sub":
                shift[0] = g / (2 * A)
                extreme = v + g * g / (4 * A)
            else:
                shift[0] = -g / (2 * A)
                extreme = v - g * g / (4 * A)
            self.items.append((xt + shift, A, extreme))

    def _pieces(self, pts):
        """Envelope value per centre, shape ``(m, |S|)``, with cone distances and projections."""
        out, projs = [], []
        sign = 1 if self.side == "sub" else -1
        for vtx, A, ext in self.items:
            d, proj = self.cone.distance(pts, vtx, sign)
            if self.side == "sub":
                out.append(np.maximum(ext - A * d * d, 0.0))
            else:
                out.append(np.minimum(ext + A * d * d, 1.0))
            projs.append((d, proj))
        return out, projs

    def envelope(self, pts):
        pts = as_points(pts, self.dim)
        if not self.items:
            return np.full(pts.shape[0], 0.0 if self.side == "sub" else 1.0)
        vals, _ = self._pieces(pts)
        stack = np.column_stack(vals)
        return stack.max(axis=1) if self.side == "sub" else stack.min(axis=1)

    def _eval(self, pts):
        env = self.envelope(pts)
        if self.side == "sub":
            return np.maximum(env, self.pair.minus(pts))
        return np.minimum(env, self.pair.plus(pts))

    def _active(self, x):
        pts = np.asarray(x, dtype=float).reshape(1, self.dim)
        obst = self.pair.minus if self.side == "sub" else self.pair.plus
        ob = float(obst(pts)[0])
        if not self.items:
            return None, None, ob
        vals, projs = self._pieces(pts)
        vals = np.array([float(v[0]) for v in vals])
        k = int(np.argmax(vals) if self.side == "sub" else np.argmin(vals))
        return k, projs[k], ob if (self.side == "sub" and ob >= vals[k]) or \
            (self.side == "super" and ob <= vals[k]) else None

    def gradient(self, x):
        k, proj, ob = self._active(x)
        obst = self.pair.minus if self.side == "sub" else self.pair.plus
        if k is None or ob is not None:
            return obst.gradient(x)
        vtx, A, ext = self.items[k]
        d, p = proj
        val = ext - A * d[0] ** 2 if self.side == "sub" else ext + A * d[0] ** 2
        if (self.side == "sub" and val <= 0) or (self.side == "super" and val >= 1) or d[0] == 0:
            return np.zeros(self.dim)
        q = np.asarray(x, dtype=float) - p[0]
        return (-2 * A * q) if self.side == "sub" else (2 * A * q)

    def c11(self, x):
        k, _, ob = self._active(x)
        obst = self.pair.minus if self.side == "sub" else self.pair.plus
        if k is None or ob is not None:
            return obst.c11(x)
        return 2 * self.items[k][1]

    def line_breaks(self, x, v):
        if self.dim != 1 or abs(v[0]) < 1e-15:
            return []
        pts = []
        for vtx, A, ext in self.items:
            r0 = np.sqrt(abs(ext) / A) if A > 0 else 0.0
            pts += [vtx[0], vtx[0] - r0] if self.side == "sub" else [vtx[0], vtx[0] + np.sqrt(
                max(1 - ext, 0.0) / A)]
        obst = self.pair.minus if self.side == "sub" else self.pair.plus
        pts += list(obst.kinks)
        # crossings with the obstacle
        t = np.linspace(-60, 60, 6001)
        diff = self.envelope(t[:, None]) - obst(t[:, None])
        idx = np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)
        for i in idx[:8]:
            pts.append(brentq(lambda z: float(self.envelope(np.array([[z]]))[0] - obst(np.array([[z]]))[0]),
                              t[i], t[i + 1]))
        return [(p - float(x[0])) / float(v[0]) for p in pts]

    def spec(self):
        return {"name": "obstacle_barrier", "side": self.side, "S": self.S.tolist()}


def obstacle_barriers(pair, S, side="sub", s=None, M_tilde=None):
    """Paraboloid barrier from centres ``S``; checks the half-space constraint when ``s`` or ``M_tilde`` is given."""
    S = np.zeros((0, pair.dim)) if S is None else np.atleast_2d(np.asarray(S, dtype=float))
    if S.size == 0:
        return pair.minus if side == "sub" else pair.plus
    if M_tilde is None and s is not None:
        M_tilde = barrier_threshold(pair, s)
    if M_tilde is not None:
        x1 = S[:, 0]
        if side == "sub" and np.any(x1 >= -M_tilde):
            raise ParameterViolation(f"sub barrier centres must satisfy x1 < -{M_tilde:.4g}")
        if side == "super" and np.any(x1 <= M_tilde):
            raise ParameterViolation(f"super barrier centres must satisfy x1 > {M_tilde:.4g}")
    return ObstacleBarrier(pair, S, side)


# ---------------------------------------------------------------------------
# solver

@dataclass
class ObstacleSolution:
    pair: ObstaclePair
    s: float
    h: float
    W: float
    nodes: np.ndarray
    values: np.ndarray
    tol_contact: np.ndarray
    table: Optional[game.ValueTable] = None
    post_residuals: Optional[list] = None

    @property
    def lower(self):
        return self.pair.minus.f(self.nodes)

    @property
    def upper(self):
        return self.pair.plus.f(self.nodes)

    @property
    def flags(self):
        """``'plus'``, ``'minus'`` or ``'free'`` per node."""
        out = np.full(self.nodes.size, "free", dtype=object)
        out[np.abs(self.values - self.lower) <= self.tol_contact] = "minus"
        out[np.abs(self.values - self.upper) <= self.tol_contact] = "plus"
        return out

    def coords(self):
        return self.nodes[:, None]

    def at(self, x1):
        """Linear interpolation, obstacles outside the window."""
        x1 = np.asarray(x1, dtype=float).reshape(-1)
        out = np.interp(x1, self.nodes, self.values)
        out = np.where(x1 < self.nodes[0], self.pair.plus.f(x1), out)
        return np.where(x1 > self.nodes[-1], self.pair.minus.f(x1), out)

    def as_field(self):
        return _SolutionField(self)


class _SolutionField(ScalarField):
    def __init__(self, sol, smooth=False):
        self.sol = sol
        self.dim = sol.pair.dim
        self.growth = Growth("bounded", 1.0)
        self.spline = CubicSpline(sol.nodes, sol.values) if smooth else None

    def _eval(self, pts):
        x1 = pts[:, 0]
        if self.spline is None:
            return self.sol.at(x1)
        out = self.spline(np.clip(x1, self.sol.nodes[0], self.sol.nodes[-1]))
        out = np.where(x1 < self.sol.nodes[0], self.sol.pair.plus.f(x1), out)
        return np.where(x1 > self.sol.nodes[-1], self.sol.pair.minus.f(x1), out)

    def gradient(self, x):
        if self.spline is None:
            return None
        g = np.zeros(self.dim)
        g[0] = float(self.spline(float(x[0]), 1))
        return g

    def c11(self, x):
        if self.spline is None:
            return None
        return float(np.max(np.abs(self.spline(self.sol.nodes, 2))))

    def line_breaks(self, x, v):
        if abs(v[0]) < 1e-15:
            return []
        return [(c - float(x[0])) / float(v[0]) for c in (self.sol.nodes[0], self.sol.nodes[-1])]


def contact_tolerance(pair, nodes, h, tol):
    """``max(10 tol, h^2 A)`` with ``A`` the local curvature of the nearer obstacle."""
    A = 0.5 * np.maximum(np.abs(pair.plus.ddf(nodes)), np.abs(pair.minus.ddf(nodes)))
    return np.maximum(10 * tol, h * h * A)


def obstacle_line_problem(pair, h, W):
    n = int(round(2 * W / h)) + 1
    if abs((n - 1) * h - 2 * W) > 1e-9 * W:
        raise ConfigError("the window half-width must be a multiple of h")
    nodes = -W + h * np.arange(n)
    fp, fm = pair.plus.f, pair.minus.f

    def exterior(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < 0, fp(x), fm(x))

    return game.LineProblem(-W, h, n, exterior, lower=fm(nodes), upper=fp(nodes))


def solve_obstacle(pair, s, h=1 / 64, W=20.0, eps=None, tol=1e-10, max_sweeps=500000,
                   check_assumptions=True, post_check=False, post_points=12, q=None):
    """Projected monotone iteration ``V <- clamp(update(V), G-, G+)`` from ``V = G-``."""
    check_exponent(s)
    if check_assumptions:
        rep = audit_obstacles(pair, s, window=W)
        if not rep["pass"]:
            failed = [k for k, v in rep.items() if isinstance(v, dict) and not v["pass"]]
            raise AssumptionViolation(f"obstacle assumptions fail: {', '.join(failed)}")
    prob = obstacle_line_problem(pair, h, W)
    eps = game.default_eps(h, s) if eps is None else eps
    table = game.value_iterate(prob, s, eps, tol=tol, max_sweeps=max_sweeps)
    sol = ObstacleSolution(pair, s, h, W, prob.nodes, table.values,
                           contact_tolerance(pair, prob.nodes, h, tol), table)
    if post_check:
        res = post_verify_obstacle(sol, post_points, q)
        sol.post_residuals = res
        bad = [r for r in res if not r["pass"]]
        if bad:
            raise PostCheckFailure(f"{len(bad)} one-sided residuals fail",
                                   witnesses=sorted(bad, key=lambda r: -abs(r["residual"]))[:5])
    return sol


def solution_from_values(pair, nodes, values, s=0.75, tol=1e-10):
    """Wraps externally produced grid values so the measurement tools apply."""
    nodes = np.asarray(nodes, dtype=float)
    h = float(nodes[1] - nodes[0])
    return ObstacleSolution(pair, s, h, float(-nodes[0]), nodes, np.asarray(values, dtype=float),
                            contact_tolerance(pair, nodes, h, tol))


def post_verify_obstacle(sol, n_points=12, q=None, tau=None):
    """One-sided residuals of a spline interpolant at free nodes with a clear gradient."""
    q = q or QuadratureConfig()
    fld = _SolutionField(sol, smooth=True)
    tau = tau if tau is not None else 10 * sol.h
    post_tol = 1e-2 * sol.h ** (-(1 - sol.s))
    flags = sol.flags
    free = np.flatnonzero(flags == "free")
    out = []
    if free.size == 0:
        return out
    picks = free[np.linspace(0, free.size - 1, min(n_points, free.size)).astype(int)]
    for i in picks:
        x = np.zeros(sol.pair.dim)
        x[0] = sol.nodes[i]
        if abs(fld.gradient(x)[0]) <= tau:
            out.append({"x": float(x[0]), "residual": 0.0, "excluded": True, "pass": True})
            continue
        r = ifl_eval(fld, x, sol.s, q).value
        above = sol.values[i] > sol.lower[i] + sol.tol_contact[i]
        below = sol.values[i] < sol.upper[i] - sol.tol_contact[i]
        ok = (not above or r >= -post_tol) and (not below or r <= post_tol)
        out.append({"x": float(x[0]), "residual": r, "excluded": False, "pass": bool(ok)})
    return out


# ---------------------------------------------------------------------------
# measurements

def find_coincidence_M(sol):
    """Smallest ``M`` with contact on ``G-`` for ``x1 > M`` and on ``G+`` for ``x1 < -M``."""
    flags = sol.flags
    x = sol.nodes
    not_minus = np.flatnonzero(flags != "minus")
    not_plus = np.flatnonzero(flags != "plus")
    if not_minus.size and not_minus[-1] == x.size - 1:
        return float("inf")
    if not_plus.size and not_plus[0] == 0:
        return float("inf")
    right = x[not_minus[-1]] if not_minus.size else -np.inf
    left = x[not_plus[0]] if not_plus.size else np.inf
    return float(max(right, -left, 0.0))


def two_cone_constant(theta, dim=2):
    """``A_theta = 1 / sin(theta)``; the half-line cone in 1-D gives 1."""
    return 1.0 if dim == 1 else 1.0 / np.sin(theta)


def two_cone_point(x, z, theta):
    """Point ``w`` with ``x - w, z - w`` in the closed cone, minimising ``|x-w| + |z-w|``.

    Works in the plane spanned by ``e1`` and ``z - x``.
    """
    x, z = np.asarray(x, dtype=float), np.asarray(z, dtype=float)
    d = z - x
    cone = ConeSpec(theta)
    if np.linalg.norm(d) == 0 or cone.distance(d[None, :], np.zeros_like(d))[0][0] == 0:
        return x.copy()
    if cone.distance(-d[None, :], np.zeros_like(d))[0][0] == 0:
        return z.copy()
    e1 = np.zeros_like(d)
    e1[0] = 1.0
    lat = d - d[0] * e1
    u = lat / np.linalg.norm(lat)
    d1, d2 = d[0], float(d @ u)
    c, sn = np.cos(theta), np.sin(theta)
    # z - x = b e_plus - a e_minus with e_pm = c e1 +- sn u
    a = 0.5 * (d2 / sn - d1 / c)
    b = 0.5 * (d2 / sn + d1 / c)
    return x - a * (c * e1 - sn * u)


@dataclass
class LipschitzReport:
    lip_est: float
    A_theta: float
    L0: float
    bound: float
    passed: bool


def check_lipschitz(sol, pair=None, cone=None):
    """Largest neighbour difference quotient against ``A_theta L0 (1 + 0.1)``."""
    pair = pair or sol.pair
    theta = cone.theta if cone is not None else pair.theta
    lip = float(np.max(np.abs(np.diff(sol.values))) / sol.h) if sol.values.size > 1 else 0.0
    A = two_cone_constant(theta, pair.dim)
    bound = A * pair.L0 * 1.1
    return LipschitzReport(lip, A, pair.L0, bound, bool(lip <= bound))


@dataclass
class DetachmentFit:
    slope: float
    x_contact: float
    r: np.ndarray
    gap: np.ndarray


def detachment_exponent(sol, pair=None, side="plus", r_max=None, gap_tol=None):
    """Log-log slope of the gap to the obstacle leaving the contact set along its gradient."""
    pair = pair or sol.pair
    flags = sol.flags
    x, U, h = sol.nodes, sol.values, sol.h
    gap_tol = gap_tol if gap_tol is not None else 1e3 * np.finfo(float).eps
    if side == "plus":
        idx = np.flatnonzero(flags == "plus")
        # last contact node whose right neighbour is free: the gradient of G+ points to +e1
        cand = [i for i in idx if i + 1 < x.size and flags[i + 1] != "plus"]
        if not cand:
            raise InsufficientResolution("no contact boundary with the upper obstacle")
        i0 = cand[0]
        step = 1
        gap_of = lambda j: sol.upper[j] - U[j]
    elif side == "minus":
        idx = np.flatnonzero(flags == "minus")
        cand = [i for i in idx if i - 1 >= 0 and flags[i - 1] != "minus"]
        if not cand:
            raise InsufficientResolution("no contact boundary with the lower obstacle")
        i0 = cand[-1]
        step = -1
        gap_of = lambda j: U[j] - sol.lower[j]
    else:
        raise ConfigError("side must be 'plus' or 'minus'")
    r_max = r_max if r_max is not None else 32 * h
    kmax = int(np.floor(r_max / h + 1e-9))
    ks = np.arange(2, kmax + 1)
    js = i0 + step * ks
    keep = (js >= 0) & (js < x.size)
    ks, js = ks[keep], js[keep]
    gaps = np.array([gap_of(j) for j in js])
    good = gaps > gap_tol
    if good.sum() < 3:
        raise InsufficientResolution("gaps to the obstacle are below tolerance")
    r = ks[good] * h
    slope = float(np.polyfit(np.log(r), np.log(gaps[good]), 1)[0])
    return DetachmentFit(slope, float(x[i0]), r, gaps[good])


def linear_monotonicity(sol, M):
    """Smallest ``(U(x + h) - U(x)) / h`` over nodes with ``|x1| <= M``."""
    m = np.abs(sol.nodes[:-1]) <= M
    if not m.any():
        raise InsufficientResolution("no nodes in the band")
    return float(np.min(np.diff(sol.values)[m]) / sol.h)


@dataclass
class SigmaSets:
    x1: np.ndarray
    sigma_plus: np.ndarray
    sigma_minus: np.ndarray
    nonflat: np.ndarray
    M_beta: float
    M_beta_analytic: float
    inclusion: bool
    flat_band: tuple


def analytic_M_beta(pair, beta, M_hi=1e8):
    """Smallest ``M`` with ``L_M' <= beta`` for every ``M' >= M``."""
    if pair.L_M(M_hi) > beta:
        return float("inf")
    ms = np.geomspace(1e-3, M_hi, 4000)
    above = np.flatnonzero(np.array([pair.L_M(m) for m in ms]) > beta)
    if not above.size:
        return 0.0
    lo, hi = ms[above[-1]], ms[above[-1] + 1]
    for _ in range(200):
        mid = np.sqrt(lo * hi)
        lo, hi = (lo, mid) if pair.L_M(mid) <= beta else (mid, hi)
        if hi / lo < 1 + 1e-13:
            break
    return hi


def sigma_sets(pair, h, beta, y=None, W=None):
    """Grid description of the sets where the raised shifted obstacle stays above the obstacle.

    ``sigma_plus = {G+(x - y h) + beta h >= G+(x)}`` and likewise for ``G-``.
    Where both obstacles are flat both sets contain every point, so ``M_beta``
    is measured on the part of the intersection where an obstacle varies.
    """
    if not 0 < h < 1:
        raise ConfigError("h must lie in (0, 1)")
    y1 = 1.0 if y is None else float(np.asarray(y, dtype=float).reshape(-1)[0])
    if y is not None and pair.dim > 1 and not pair.cone.contains(np.asarray(y, dtype=float))[0]:
        raise ConfigError("y must lie in the monotonicity cone")
    Mb = analytic_M_beta(pair, beta)
    W = W if W is not None else max(4 * (Mb if np.isfinite(Mb) else 10.0), 20.0)
    W = np.ceil(W / h) * h
    x1 = np.arange(-W, W + 0.5 * h, h)
    fp, fm = pair.plus.f, pair.minus.f
    sp = fp(x1 - y1 * h) + beta * h >= fp(x1)
    sm = fm(x1 - y1 * h) + beta * h >= fm(x1)
    nonflat = (fp(x1) < 1.0) | (fm(x1) > 0.0)
    both = sp & sm & nonflat
    M_grid = float(np.min(np.abs(x1[both]))) if both.any() else float("inf")
    incl = bool(np.all(np.abs(x1[both]) >= Mb - h)) if np.isfinite(Mb) else True
    flat = ~nonflat
    band = (float(x1[flat].min()), float(x1[flat].max())) if flat.any() else ()
    return SigmaSets(x1, sp, sm, nonflat, M_grid, Mb, incl, band)
