"""Regularity and stability tooling shared by the solvers.

Hoelder seminorms and modulus ladders, sup/inf convolutions, pointwise
max/min of fields, blow-up rescaling, viscosity spot checks with fitted
quadratic patches, and stability probes for sequences of fields.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, HypothesisUnverified, NumericalError, UnboundedSearch
from .fields import Growth, MaxField, MinField, Quadric, ScalarField, as_points
from .operator import QuadratureConfig, check_exponent, compose_truncated, ifl_eval


# ---------------------------------------------------------------------------
# Hoelder seminorms

@dataclass
class HolderEstimate:
    gamma: float
    seminorm: float
    deltas: np.ndarray
    modulus: np.ndarray
    argmax: Optional[tuple] = None

    def as_rows(self):
        return [(float(d), float(m)) for d, m in zip(self.deltas, self.modulus)]


def modulus_ladder(values, h, deltas, gamma=0.0):
    """``max |v_i - v_j| / |x_i - x_j|^gamma`` over grid pairs with ``|x_i - x_j| <= delta``."""
    v = np.asarray(values, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    kmax = int(min(v.size - 1, np.floor(deltas.max() / h + 1e-9)))
    best = np.zeros(kmax + 1)
    for k in range(1, kmax + 1):
        best[k] = np.max(np.abs(v[k:] - v[:-k])) / (k * h) ** gamma
    cum = np.maximum.accumulate(best)
    idx = np.minimum(np.floor(deltas / h + 1e-9).astype(int), kmax)
    return cum[idx]


def _pair_ratios(f, X, Y, gamma):
    d = np.linalg.norm(X - Y, axis=1)
    keep = d > 0
    X, Y, d = X[keep], Y[keep], d[keep]
    r = np.abs(f(X) - f(Y)) / d ** gamma
    return r, d, X, Y


def holder_seminorm(f, gamma, region, budget=100000, seed=0, h=None, n_levels=None):
    """Sampled ``[f]_{C^{0,gamma}}`` with its modulus ladder at ``delta = 2^-k``.

    ``f`` is a field, or a 1-D array of grid values with spacing ``h``
    (all pairs are then used).  ``region`` is a box ``(lo, hi)`` or an array
    of points.  Random pairs are stratified by log distance; all
    nearest-neighbour pairs of a regular grid on the box are added.
    """
    if not 0 < gamma <= 1:
        raise ConfigError("gamma must lie in (0, 1]")
    if not isinstance(f, ScalarField):
        if h is None:
            raise ConfigError("grid values need the spacing h")
        v = np.asarray(f, dtype=float)
        diam = h * (v.size - 1)
        K = n_levels or max(1, int(np.floor(np.log2(diam / h))) + 1)
        deltas = np.array([2.0 ** -k for k in range(0, K + 8) if 2.0 ** -k >= h])
        deltas = deltas[deltas <= max(diam, h)]
        if deltas.size == 0 or deltas[0] < diam:
            deltas = np.concatenate([[diam], deltas])
        mod = modulus_ladder(v, h, deltas, gamma)
        return HolderEstimate(gamma, float(mod.max()), deltas, mod)
    rng = np.random.default_rng(seed)
    dim = f.dim
    if isinstance(region, tuple):
        lo = np.atleast_1d(np.asarray(region[0], dtype=float))
        hi = np.atleast_1d(np.asarray(region[1], dtype=float))
        diam = float(np.linalg.norm(hi - lo))
        n_str = 16
        per = max(1, budget // (2 * n_str))
        Xs, Ys = [], []
        edges = diam * np.logspace(-4, 0, n_str + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            X = lo + (hi - lo) * rng.uniform(size=(per, dim))
            u = rng.normal(size=(per, dim))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            r = np.exp(rng.uniform(np.log(a), np.log(b), size=per))
            Y = X + r[:, None] * u
            ok = np.all((Y >= lo) & (Y <= hi), axis=1)
            Xs.append(X[ok])
            Ys.append(Y[ok])
        n_side = 257 if dim == 1 else (65 if dim == 2 else 9)
        axes = [np.linspace(lo[i], hi[i], n_side) for i in range(dim)]
        G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        for ax in range(dim):
            A = np.take(G, np.arange(n_side - 1), axis=ax).reshape(-1, dim)
            B = np.take(G, np.arange(1, n_side), axis=ax).reshape(-1, dim)
            Xs.append(A)
            Ys.append(B)
        X = np.vstack(Xs)
        Y = np.vstack(Ys)
    else:
        P = as_points(region, dim)
        n = P.shape[0]
        diam = float(np.max(np.linalg.norm(P - P.mean(axis=0), axis=1)) * 2)
        if n * (n - 1) // 2 <= budget:
            i, j = np.triu_indices(n, 1)
        else:
            i = rng.integers(0, n, budget)
            j = rng.integers(0, n, budget)
        X, Y = P[i], P[j]
    r, d, X, Y = _pair_ratios(f, X, Y, gamma)
    K = n_levels or 20
    deltas = np.array([2.0 ** -k for k in range(-int(np.ceil(np.log2(max(diam, 1.0)))), K)])
    order = np.argsort(d)
    d_sorted = d[order]
    run = np.maximum.accumulate(r[order])
    idx = np.searchsorted(d_sorted, deltas, side="right") - 1
    mod = np.where(idx >= 0, run[np.clip(idx, 0, None)], 0.0)
    k = int(np.argmax(r)) if r.size else None
    arg = None if k is None else (X[k].tolist(), Y[k].tolist())
    return HolderEstimate(gamma, float(r.max()) if r.size else 0.0, deltas, mod, arg)


@dataclass
class DecayReport:
    decays: bool
    monotone: bool
    ratio: float
    estimate: HolderEstimate


def modulus_decay_check(f, gamma, region, delta_small, factor=0.8, **kw):
    """Does the modulus at ``delta_small`` fall below ``factor`` times the global seminorm?"""
    est = holder_seminorm(f, gamma, region, **kw)
    order = np.argsort(est.deltas)
    mono = bool(np.all(np.diff(est.modulus[order]) >= -1e-12))
    k = np.searchsorted(est.deltas[order], delta_small, side="right") - 1
    k = max(k, 0)
    small = float(est.modulus[order][k])
    ratio = small / est.seminorm if est.seminorm > 0 else 0.0
    return DecayReport(bool(ratio < factor), mono, ratio, est)


# ---------------------------------------------------------------------------
# sup / inf convolutions

def _search_radius(u, x0, eps, u0):
    g = u.growth
    if g.kind == "bounded":
        return np.sqrt(eps * 2.0 * g.C) + 1e-12
    if g.alpha > 2 or (g.alpha == 2 and g.C * eps >= 1):
        raise UnboundedSearch("growth too fast for a finite sup-convolution search")
    R = 1.0
    for _ in range(80):
        if g.C * (1 + np.linalg.norm(x0) + R) ** g.alpha - u0 < R * R / eps:
            return R
        R *= 2
    raise UnboundedSearch("could not bound the sup-convolution search radius")


class ConvolutionField(ScalarField):
    """``sup_x {u(x) + eps - |x - x0|^2 / eps}`` (``kind="sup"``) or its mirrored inf version."""

    def __init__(self, base, eps, kind="sup", n_grid=None):
        if eps <= 0:
            raise ConfigError("eps must be positive")
        if kind not in ("sup", "inf"):
            raise ConfigError("kind must be 'sup' or 'inf'")
        self.base, self.eps, self.kind = base, float(eps), kind
        self.dim = base.dim
        self.growth = base.growth
        self.sign = 1.0 if kind == "sup" else -1.0
        self.n_grid = n_grid or (801 if self.dim == 1 else 41)
        self._cache = {}

    def _objective(self, x, x0):
        return self.sign * self.base.value(x) + self.eps - np.sum((x - x0) ** 2) / self.eps

    def argmax(self, x0):
        x0 = np.asarray(x0, dtype=float).reshape(self.dim)
        key = tuple(x0.tolist())
        if key in self._cache:
            return self._cache[key]
        u0 = self.sign * self.base.value(x0)
        R = _search_radius(self.base, x0, self.eps, u0)
        if self.dim == 1:
            xs = x0[0] + np.linspace(-R, R, self.n_grid)
            pts = xs[:, None]
        else:
            ax = np.linspace(-R, R, self.n_grid)
            G = np.stack(np.meshgrid(*([ax] * self.dim), indexing="ij"), axis=-1).reshape(-1, self.dim)
            pts = x0 + G[np.sum(G * G, axis=1) <= R * R]
        vals = self.sign * self.base(pts) + self.eps - np.sum((pts - x0) ** 2, axis=1) / self.eps
        k = int(np.argmax(vals))
        best_x, best_v = pts[k], float(vals[k])
        # simplex sized to the search grid; the default one scales with |x| and collapses near 0
        step = 2 * R / (self.n_grid - 1)
        simplex = best_x + np.vstack([np.zeros(self.dim), step * np.eye(self.dim)])
        res = minimize(lambda z: -self._objective(z, x0), best_x, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 400,
                                "initial_simplex": simplex})
        if -res.fun > best_v and np.linalg.norm(res.x - x0) <= R:
            best_x, best_v = res.x, float(-res.fun)
        self._cache[key] = (np.asarray(best_x, dtype=float), best_v)
        return self._cache[key]

    def _eval(self, pts):
        return np.array([self.sign * self.argmax(p)[1] for p in pts])

    def touching_paraboloid(self, x0):
        """Paraboloid of opening ``2/eps`` touching the convolution at ``x0`` (below for sup)."""
        xs, v = self.argmax(x0)
        base_val = self.sign * self.base.value(xs)
        c = self.sign * (base_val + self.eps)
        Q = -self.sign * np.eye(self.dim) / self.eps
        return Quadric(Q, c, xs)

    def check_touching(self, x0, n_offsets=10, radius=None, tol=1e-9, seed=0):
        """Verify the touching paraboloid stays on the correct side at nearby offsets."""
        x0 = np.asarray(x0, dtype=float).reshape(self.dim)
        P = self.touching_paraboloid(x0)
        rng = np.random.default_rng(seed)
        radius = radius or 0.1 * np.sqrt(self.eps)
        off = rng.normal(size=(n_offsets, self.dim))
        off *= radius / np.linalg.norm(off, axis=1, keepdims=True)
        pts = x0 + off * rng.uniform(0.1, 1.0, size=(n_offsets, 1))
        gap = self.sign * (self(pts) - P(pts))
        at = abs(self.value(x0) - P.value(x0))
        return bool(np.all(gap >= -tol) and at <= tol)


def sup_convolution(u, eps, **kw):
    return ConvolutionField(u, eps, "sup", **kw)


def inf_convolution(w, eps, **kw):
    return ConvolutionField(w, eps, "inf", **kw)


# ---------------------------------------------------------------------------
# combinations and rescaling

def combine_max(u1, u2):
    return MaxField([u1, u2])


def combine_min(w1, w2):
    return MinField([w1, w2])


class BlowupField(ScalarField):
    """``x -> lam^(1-2s) [u(xc + lam R x) - u(xc)]``.

    This map preserves the ``C^{0,2s-1}`` seminorm exactly.
    """

    preserves_seminorm = True

    def __init__(self, base, xc, lam, R, s):
        if lam <= 0:
            raise ConfigError("lambda must be positive")
        self.base, self.s, self.lam = base, float(s), float(lam)
        self.dim = base.dim
        self.xc = np.atleast_1d(np.asarray(xc, dtype=float))
        self.R = np.eye(self.dim) if R is None else np.atleast_2d(np.asarray(R, dtype=float))
        self.k = self.lam ** (1 - 2 * self.s)
        self.u_c = base.value(self.xc)
        g = base.growth
        self.growth = Growth("power", self.k * (abs(self.u_c) + g.C * (1 + np.linalg.norm(self.xc) + self.lam) ** max(g.exponent, 0)),
                             max(g.exponent, 0.0)) if g.kind == "power" else Growth("bounded", 2 * self.k * g.C)

    def _map(self, pts):
        return self.xc + self.lam * pts @ self.R.T

    def _eval(self, pts):
        return self.k * (self.base._eval(self._map(pts)) - self.u_c)

    def gradient(self, x):
        g = self.base.gradient(self._map(np.atleast_2d(x))[0])
        return None if g is None else self.k * self.lam * self.R.T @ g

    def c11(self, x):
        m = self.base.c11(self._map(np.atleast_2d(x))[0])
        return None if m is None else self.k * self.lam ** 2 * m

    def line_breaks(self, x, v):
        y = self._map(np.atleast_2d(x))[0]
        return [t / self.lam for t in self.base.line_breaks(y, self.R @ np.asarray(v, dtype=float))]

    def metadata(self):
        return {"xc": self.xc.tolist(), "lambda": self.lam, "R": self.R.tolist(), "s": self.s,
                "preserves_seminorm_exponent": 2 * self.s - 1}


def blowup_rescale(u, xc, lam, R=None, s=0.75):
    check_exponent(s)
    return BlowupField(u, xc, lam, R, s)


def compose_blowups(xc1, lam1, R1, xc2, lam2, R2):
    """Parameters of the single rescale equal to rescaling by 1 and then by 2."""
    R1 = np.atleast_2d(R1)
    R2 = np.atleast_2d(R2)
    return np.asarray(xc1) + lam1 * R1 @ np.asarray(xc2), lam1 * lam2, R1 @ R2


# ---------------------------------------------------------------------------
# viscosity spot checks

@dataclass
class SpotCheck:
    x: list
    side: str
    value: float
    err_est: float
    passed: bool
    touching: bool
    kappa: float


def viscosity_spot_check(u, x, s, side="sub", r_patch=0.05, q=None, tol=None, n_ring=8):
    """Fit a quadratic patch touching ``u`` at ``x`` and evaluate the patched operator.

    ``side="sub"`` touches from above and requires a value ``>= -tol``;
    ``"super"`` touches from below and requires ``<= tol``.
    """
    q = q or QuadratureConfig()
    x = np.asarray(x, dtype=float).reshape(u.dim)
    dim = u.dim
    if dim == 1:
        Y = np.linspace(-r_patch, r_patch, 4 * n_ring + 1)[:, None]
    else:
        rings = [r_patch * f for f in (0.25, 0.5, 0.75, 1.0)]
        Y = [np.zeros(dim)]
        for r in rings:
            for _ in range(n_ring):
                z = np.random.default_rng(len(Y)).normal(size=dim)
                Y.append(r * z / np.linalg.norm(z))
        Y = np.array(Y)
    Y = Y[np.linalg.norm(Y, axis=1) > 0]
    u0 = u.value(x)
    vals = u(x + Y) - u0
    iu = np.triu_indices(dim)
    quad_cols = np.column_stack([Y[:, i] * Y[:, j] * (1.0 if i == j else 2.0) for i, j in zip(*iu)])
    design = np.hstack([Y, quad_cols])
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    g = coef[:dim]
    H = np.zeros((dim, dim))
    for c, (i, j) in zip(coef[dim:], zip(*iu)):
        H[i, j] = H[j, i] = c
    model = Y @ g + np.einsum("ij,jk,ik->i", Y, H, Y)
    r2 = np.sum(Y * Y, axis=1)
    sgn = 1.0 if side == "sub" else -1.0
    kappa = max(0.0, float(np.max(sgn * (vals - model) / r2))) * 1.01 + 1e-12
    Q = H + sgn * kappa * np.eye(dim)
    phi = Quadric(Q, u0, x, g)
    touching = bool(np.all(sgn * (phi(x + Y) - u(x + Y)) >= -1e-12))
    comp = compose_truncated(u, phi, x, r_patch)
    r = ifl_eval(comp, x, s, q)
    t = tol if tol is not None else 10 * r.err_est + 1e-6
    ok = r.value >= -t if side == "sub" else r.value <= t
    return SpotCheck(x.tolist(), side, r.value, r.err_est, bool(ok), touching, kappa)


def residual_check(u, x, s, side="sub", q=None, tol=None):
    """Direct operator residual for fields with analytic regularity data."""
    r = ifl_eval(u, x, s, q)
    t = tol if tol is not None else 10 * r.err_est + 1e-6
    return (r.value >= -t) if side == "sub" else (r.value <= t), r


def max_subsolution_hook(u1, u2, samples, s, q=None):
    """If both inputs pass the subsolution check at every sample, so must their maximum."""
    samples = np.atleast_2d(samples)
    both = all(residual_check(u, p, s, "sub", q)[0] for u in (u1, u2) for p in samples)
    m = combine_max(u1, u2)
    results = [residual_check(m, p, s, "sub", q) for p in samples]
    return both, all(ok for ok, _ in results), [r.value for _, r in results]


# ---------------------------------------------------------------------------
# stability of limits

@dataclass
class StabilityReport:
    passed: bool
    sup_diffs: list
    member_checks: list
    limit_residuals: list
    envelope: dict


def stability_probe(sequence, limit, samples, s, window, envelope, q=None, conv_tol=1e-3,
                    far_radii=(10.0, 100.0, 1000.0)):
    """Check the hypotheses of the stability theorem on a sequence and spot-check the limit.

    ``window`` is a box ``(lo, hi)`` where uniform convergence is measured;
    ``envelope = (C, alpha)`` is the common growth bound with ``alpha < 2s``.
    Raises :class:`HypothesisUnverified` when a hypothesis fails.
    """
    check_exponent(s)
    C, alpha = envelope
    if not alpha < 2 * s:
        raise HypothesisUnverified("growth exponent must be below 2s")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    dim = limit.dim
    lo = np.atleast_1d(np.asarray(window[0], dtype=float))
    hi = np.atleast_1d(np.asarray(window[1], dtype=float))
    ax = [np.linspace(lo[i], hi[i], 201 if dim == 1 else 41) for i in range(dim)]
    W = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, dim)
    far = []
    for r in far_radii:
        for e in np.vstack([np.eye(dim), -np.eye(dim)]):
            far.append(r * e)
    far = np.vstack([W, np.array(far), samples])
    bound = C * (1 + np.linalg.norm(far, axis=1)) ** alpha
    diffs, checks = [], []
    for un in sequence:
        if np.any(np.abs(un(far)) > bound * (1 + 1e-12)):
            raise HypothesisUnverified("a sequence member violates the common growth envelope")
        diffs.append(float(np.max(np.abs(un(W) - limit(W)))))
        member = []
        for p in samples:
            g = un.gradient(p)
            if g is not None and np.linalg.norm(g) == 0:
                continue
            try:
                ok, r = residual_check(un, p, s, "sub", q)
            except NumericalError:
                continue
            member.append(ok)
        if not all(member):
            raise HypothesisUnverified("a sequence member fails the subsolution spot-check")
        checks.append(len(member))
    if diffs[-1] > conv_tol:
        raise HypothesisUnverified(f"uniform convergence not observed on the window ({diffs[-1]:.3g})")
    lim_res = []
    for p in samples:
        try:
            ok, r = residual_check(limit, p, s, "sub", q)
        except NumericalError:
            continue
        lim_res.append({"x": p.tolist(), "value": r.value, "ok": bool(ok)})
    passed = bool(lim_res) and all(r["ok"] for r in lim_res)
    return StabilityReport(passed, diffs, checks, lim_res,
                           {"C": C, "alpha": alpha, "integrable_tail_exponent": 1 + 2 * s - alpha})
