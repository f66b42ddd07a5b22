"""Planar geometry where the weak definition loses comparison.

Three points ``A, B, C`` form an equilateral triangle centred at the
origin.  ``S`` is the Reuleaux triangle on them thickened by ``r``: its
boundary alternates small arcs ``l`` (radius ``r`` about a vertex) and
large arcs ``L`` (radius ``side + r`` about the opposite vertex), meeting
tangentially.  Every normal line of an arc centred at a vertex passes
through that vertex.  The data sets ``F`` are annulus sectors of opening
``pi/3`` beyond each vertex, outside the unit disc ``Omega``, so each such
normal line crosses the data set of its vertex.

On this geometry ``u = 0`` satisfies the weak sub- and supersolution
conditions: the data are non-negative and every point of ``Omega`` lies on
a line missing the data.  At the same time ``eps * phi(d(x, dS))`` is a
strong subsolution for small ``eps``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import (AmbiguousGradient, AuditFailure, CertificationFailure, ConfigError,
                     GeometryInfeasible, NoPositiveEpsilon, RegularityFailure)
from .fields import Growth, ScalarField, _line_sphere
from .operator import (QuadratureConfig, check_exponent, ifl_eval, one_sided_integral,
                       second_difference_integral)

VERTEX_ANGLES = np.array([np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3])
HALF_OPENING = np.pi / 6


def smoothstep(t):
    """Quintic ramp: 0 for ``t <= 0``, 1 for ``t >= 1``, C^2 in between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t * t * t * (10 - 15 * t + 6 * t * t)


def smoothstep_d1(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 30 * t * t * (1 - t) ** 2, 0.0)


def smoothstep_d2(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    return np.where(inside, 60 * t * (1 - t) * (1 - 2 * t), 0.0)


SMOOTHSTEP_D1_MAX = 15.0 / 8.0
SMOOTHSTEP_D2_MAX = 10.0 / np.sqrt(3.0)


def rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


# ---------------------------------------------------------------------------
# geometry

@dataclass
class TriangleGeometry:
    a: float
    r: float
    rho1: float
    rho2: float
    delta: float
    rho: float
    vertices: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = self.a * np.column_stack([np.cos(VERTEX_ANGLES), np.sin(VERTEX_ANGLES)])

    @property
    def side(self):
        return self.a * np.sqrt(3.0)

    @property
    def R(self):
        """Radius of the large arcs, fixed by tangency with the small ones."""
        return self.side + self.r

    def params(self):
        return {"a": self.a, "r": self.r, "rho1": self.rho1, "rho2": self.rho2,
                "delta": self.delta, "rho": self.rho}

    # -- the Reuleaux core K and the thickened set S ------------------------
    def _arc_distance(self, pts):
        """Distance from points to each large Reuleaux arc, shape ``(m, 3)``."""
        out = np.empty((pts.shape[0], 3))
        for k, c in enumerate(self.vertices):
            q = pts - c
            nq = np.linalg.norm(q, axis=1)
            axis = -c / np.linalg.norm(c)
            cosang = (q @ axis) / np.where(nq > 0, nq, 1.0)
            on_arc = (nq > 0) & (cosang >= np.cos(HALF_OPENING) - 1e-15)
            ends = [self.vertices[j] for j in range(3) if j != k]
            d_end = np.min([np.linalg.norm(pts - e, axis=1) for e in ends], axis=0)
            out[:, k] = np.where(on_arc, np.abs(nq - self.side), d_end)
        return out

    def in_core(self, pts):
        pts = np.atleast_2d(pts)
        return np.all([np.linalg.norm(pts - c, axis=1) <= self.side for c in self.vertices], axis=0)

    def core_distance(self, pts):
        """Signed distance to the Reuleaux core (negative inside)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = self.in_core(pts)
        d_in = np.min([self.side - np.linalg.norm(pts - c, axis=1) for c in self.vertices], axis=0)
        d_out = np.min(self._arc_distance(pts), axis=1)
        return np.where(inside, -d_in, d_out)

    def core_projection(self, pts):
        """Nearest point of the core for points outside it."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        best = np.full(pts.shape[0], np.inf)
        proj = pts.copy()
        for k, c in enumerate(self.vertices):
            q = pts - c
            nq = np.linalg.norm(q, axis=1)
            axis = -c / np.linalg.norm(c)
            cosang = (q @ axis) / np.where(nq > 0, nq, 1.0)
            on_arc = (nq > 0) & (cosang >= np.cos(HALF_OPENING) - 1e-15)
            cand = c + self.side * q / np.where(nq > 0, nq, 1.0)[:, None]
            d = np.where(on_arc, np.abs(nq - self.side), np.inf)
            upd = d < best
            best[upd], proj[upd] = d[upd], cand[upd]
        for v in self.vertices:
            d = np.linalg.norm(pts - v, axis=1)
            upd = d < best
            best[upd], proj[upd] = d[upd], v
        return proj

    def boundary_distance(self, pts):
        """``d(x, dS)`` inside ``S``; negative outside."""
        return self.r - self.core_distance(pts)

    def in_S(self, pts):
        return self.boundary_distance(pts) > 0

    def inward_normal(self, pts):
        """Unit gradient of ``d(x, dS)`` at points of ``S`` outside the core."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        q = self.core_projection(pts) - pts
        return q / np.linalg.norm(q, axis=1)[:, None]

    # -- data sets ------------------------------------------------------------
    def sector_frame(self, pts, k):
        return np.atleast_2d(pts) @ rotation(-VERTEX_ANGLES[k]).T

    def sector_depth(self, pts, k):
        """Distance to the boundary of the sector ``F_k`` for points inside it, else 0."""
        p = self.sector_frame(pts, k)
        rad = np.linalg.norm(p, axis=1)
        ang = np.arctan2(p[:, 1], p[:, 0])
        inside = (rad >= self.rho1) & (rad <= self.rho2) & (np.abs(ang) <= HALF_OPENING)
        ds = [rad - self.rho1, self.rho2 - rad]
        for sgn in (1.0, -1.0):
            u = np.array([np.cos(sgn * HALF_OPENING), np.sin(sgn * HALF_OPENING)])
            t = np.clip(p @ u, self.rho1, self.rho2)
            ds.append(np.linalg.norm(p - t[:, None] * u, axis=1))
        return np.where(inside, np.min(ds, axis=0), 0.0)

    def line_hits_sector(self, x, v, k, margin, thick=0.0):
        """Does ``x + t v`` meet ``{rho1+m <= |p| <= rho2-m, n.p >= m}`` thickened by ``thick``?

        The set is inside ``F_k`` at depth ``margin``; it contains the
        points of depth above ``margin`` whenever ``margin < rho1``.
        ``x`` is a point, ``v`` an array of unit directions.
        """
        m = margin - thick
        p0 = self.sector_frame(x, k)[0]
        V = np.atleast_2d(v) @ rotation(-VERTEX_ANGLES[k]).T
        lo = np.full(V.shape[0], -np.inf)
        hi = np.full(V.shape[0], np.inf)
        for sgn in (1.0, -1.0):
            # inward normal of the edge at angle sgn * HALF_OPENING
            n = np.array([np.sin(HALF_OPENING), -sgn * np.cos(HALF_OPENING)])
            a0, a1 = p0 @ n - m, V @ n
            with np.errstate(divide="ignore", invalid="ignore"):
                t = -a0 / a1
            lo = np.where(a1 > 0, np.maximum(lo, t), lo)
            hi = np.where(a1 < 0, np.minimum(hi, t), hi)
            dead = (a1 == 0) & (a0 < 0)
            hi = np.where(dead, -np.inf, hi)
        b = V @ p0
        c0 = p0 @ p0
        r_out = self.rho2 - m
        r_in = self.rho1 + m
        disc_o = b * b - (c0 - r_out * r_out)
        ok = disc_o >= 0
        so = np.sqrt(np.maximum(disc_o, 0.0))
        lo = np.maximum(lo, -b - so)
        hi = np.minimum(hi, -b + so)
        ok &= lo <= hi
        disc_i = b * b - (c0 - r_in * r_in)
        si = np.sqrt(np.maximum(disc_i, 0.0))
        t1, t2 = -b - si, -b + si
        # remove the open interval (t1, t2) where the line is inside the inner circle
        covered = (disc_i > 0) & (t1 <= lo) & (t2 >= hi)
        return ok & ~covered

    # -- audits ----------------------------------------------------------------
    def junctions(self):
        """Junction points of each small arc with the two large arcs meeting it."""
        out = []
        for k, c in enumerate(self.vertices):
            for j in range(3):
                if j == k:
                    continue
                b = self.vertices[j]
                out.append((k, j, c + self.r * (c - b) / np.linalg.norm(c - b)))
        return out

    def tangency_residual(self):
        """Largest misalignment of arc normals, and of radii, at the junctions."""
        worst = 0.0
        for k, j, p in self.junctions():
            n_small = (p - self.vertices[k]) / self.r
            n_large = (p - self.vertices[j]) / self.R
            cross = abs(n_small[0] * n_large[1] - n_small[1] * n_large[0])
            worst = max(worst, cross, abs(np.linalg.norm(p - self.vertices[j]) - self.R),
                        abs(np.linalg.norm(p - self.vertices[k]) - self.r))
        return worst

    def boundary_samples(self, n, seed=0):
        """Points of ``dS`` with the vertex whose circle carries them."""
        rng = np.random.default_rng(seed)
        pts, centres = [], []
        per = np.array([self.r, self.R]) * (np.pi / 3)
        probs = np.array([per[0], per[1]] * 3) / (3 * per.sum())
        which = rng.choice(6, size=n, p=probs)
        for w in which:
            k = w // 2
            c = self.vertices[k]
            radial = c / np.linalg.norm(c)
            if w % 2 == 0:
                ang = np.arctan2(radial[1], radial[0]) + rng.uniform(-HALF_OPENING, HALF_OPENING)
                pts.append(c + self.r * np.array([np.cos(ang), np.sin(ang)]))
            else:
                ang = np.arctan2(-radial[1], -radial[0]) + rng.uniform(-HALF_OPENING, HALF_OPENING)
                pts.append(c + self.R * np.array([np.cos(ang), np.sin(ang)]))
            centres.append(k)
        return np.array(pts), np.array(centres)

    def perpendicular_audit(self, n=1000, margin=None, seed=0):
        """Each normal line of ``dS`` must reach depth ``margin`` inside its sector."""
        margin = 2 * self.delta if margin is None else margin
        pts, ks = self.boundary_samples(n, seed)
        fails = []
        for p, k in zip(pts, ks):
            v = p - self.vertices[k]
            v = v / np.linalg.norm(v)
            if not self.line_hits_sector(p[None, :], v[None, :], k, margin)[0]:
                fails.append(p.tolist())
        return {"n": int(n), "failures": len(fails), "witnesses": fails[:5], "margin": margin}

    def spec(self):
        return {"kind": "triangle", **self.params()}


def build_geometry(params=None):
    """Geometry with audited tangential junctions; raises when the radii do not fit."""
    p = {"a": 0.45, "r": 0.2, "rho1": 1.25, "rho2": 1.75, "delta": 0.03, "rho": 0.1}
    p.update(params or {})
    g = TriangleGeometry(**{k: float(v) for k, v in p.items()})
    if g.a <= 0 or g.r <= 0 or g.delta <= 0 or g.rho <= 0:
        raise GeometryInfeasible("radii and margins must be positive")
    if g.a + g.r >= 1.0:
        raise GeometryInfeasible("S must lie inside the unit disc: a + r < 1")
    if g.rho1 <= 1.0 + g.delta:
        raise GeometryInfeasible("the data sectors must stay outside the unit disc")
    if g.rho2 - g.rho1 <= 4 * g.delta:
        raise GeometryInfeasible("the annulus is too thin to hold a plateau of the data")
    if g.tangency_residual() > 1e-8:
        raise GeometryInfeasible("arc junctions are not tangential")
    return g


# ---------------------------------------------------------------------------
# data and subsolution

class DataField(ScalarField):
    """``f = sum_k f_k``, each 1 at depth ``>= 2 delta`` in ``F_k`` and 0 at depth ``<= delta``."""

    dim = 2

    def __init__(self, geom):
        self.geom = geom
        self.growth = Growth("bounded", 1.0)

    def _eval(self, pts):
        g = self.geom
        out = np.zeros(pts.shape[0])
        for k in range(3):
            out += smoothstep((g.sector_depth(pts, k) - g.delta) / g.delta)
        return out

    def gradient(self, x):
        # the data vanish on a neighbourhood of the closed unit disc
        if np.linalg.norm(x) < self.geom.rho1 + self.geom.delta:
            return np.zeros(2)
        return None

    def c11(self, x):
        if np.linalg.norm(x) < self.geom.rho1 + self.geom.delta:
            return 0.0
        return None

    def line_breaks(self, x, v):
        g = self.geom
        x = np.asarray(x, dtype=float)
        out = []
        for rad in (g.rho1, g.rho1 + g.delta, g.rho1 + 2 * g.delta, g.rho2 - 2 * g.delta,
                    g.rho2 - g.delta, g.rho2):
            out += _line_sphere(x, v, np.zeros(2), rad)
        for k in range(3):
            for sgn in (1.0, -1.0):
                ang = VERTEX_ANGLES[k] + sgn * HALF_OPENING
                n = np.array([-np.sin(ang), np.cos(ang)])
                den = float(v @ n)
                if abs(den) < 1e-14:
                    continue
                for off in (0.0, g.delta, 2 * g.delta):
                    for side in (1.0, -1.0):
                        out.append((side * off - float(x @ n)) / den)
        return out

    def spec(self):
        return {"name": "triangle_data", **self.geom.params()}


def build_data_f(geom, n_audit=1000, seed=0):
    """Smooth data on the three sectors; audits that normal lines reach the plateau."""
    rep = geom.perpendicular_audit(n_audit, seed=seed)
    if rep["failures"]:
        raise AuditFailure(f"{rep['failures']} normal lines miss the data plateau")
    return DataField(geom)


class RampField(ScalarField):
    """``eps * phi(d(x, dS) / rho)`` on ``S`` and 0 elsewhere."""

    dim = 2

    def __init__(self, geom, eps=1.0):
        self.geom, self.eps = geom, float(eps)
        self.growth = Growth("bounded", abs(self.eps))

    def scaled(self, eps):
        return RampField(self.geom, eps)

    def _eval(self, pts):
        d = self.geom.boundary_distance(pts)
        return self.eps * smoothstep(d / self.geom.rho)

    def gradient(self, x):
        x = np.asarray(x, dtype=float).reshape(1, 2)
        d = float(self.geom.boundary_distance(x)[0])
        if d <= 0 or d >= self.geom.rho:
            return np.zeros(2)
        n = self.geom.inward_normal(x)[0]
        return self.eps * float(smoothstep_d1(d / self.geom.rho)) / self.geom.rho * n

    def c11(self, x):
        g = self.geom
        if g.rho >= g.r:
            return None
        return abs(self.eps) * (SMOOTHSTEP_D2_MAX / g.rho ** 2
                                + SMOOTHSTEP_D1_MAX / (g.rho * (g.r - g.rho)))

    def line_breaks(self, x, v):
        g = self.geom
        x = np.asarray(x, dtype=float)
        out = []
        for c in g.vertices:
            for rad in (g.r, g.r - g.rho, g.R, g.R - g.rho):
                if rad > 0:
                    out += _line_sphere(x, v, c, rad)
        return out

    def spec(self):
        return {"name": "ramp", "eps": self.eps, **self.geom.params()}


def build_subsolution(geom, rho=None, eps=1.0, n_check=200, seed=0):
    """``eps * phi_rho(d(x, dS))``; checks second differences against the C^{1,1} budget."""
    if rho is not None:
        geom = TriangleGeometry(**{**geom.params(), "rho": float(rho)})
    u = RampField(geom, eps)
    budget = u.c11(np.zeros(2))
    if budget is None:
        raise RegularityFailure(f"ramp width {geom.rho} reaches the curvature radius {geom.r}")
    rng = np.random.default_rng(seed)
    hstep = 1e-3 * geom.rho
    pts, _ = geom.boundary_samples(n_check, seed)
    depth = rng.uniform(0, 1.5 * geom.rho, n_check)
    inner = pts + depth[:, None] * geom.inward_normal(pts - 1e-9 * geom.inward_normal(pts))
    worst = 0.0
    for e in (np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0]) / np.sqrt(2)):
        dd = (u(inner + hstep * e) + u(inner - hstep * e) - 2 * u(inner)) / hstep ** 2
        worst = max(worst, float(np.max(np.abs(dd))))
    if worst > 2 * budget * 1.05:
        raise RegularityFailure(f"second differences {worst:.3g} exceed the budget {2 * budget:.3g}")
    return u


class ExhibitField(ScalarField):
    """``u + f``: the candidate inside ``Omega`` patched with the data outside."""

    dim = 2

    def __init__(self, u, f):
        self.u, self.f = u, f
        self.growth = Growth("bounded", 1.0 + abs(getattr(u, "eps", 0.0)))

    def _eval(self, pts):
        return self.u(pts) + self.f(pts)

    def gradient(self, x):
        return self.u.gradient(x)

    def c11(self, x):
        return self.u.c11(x)

    def line_breaks(self, x, v):
        return self.u.line_breaks(x, v) + self.f.line_breaks(x, v)


# ---------------------------------------------------------------------------
# certificates

@dataclass
class CertificateReport:
    samples: np.ndarray
    verdicts: list
    worst_margin: float
    params: dict

    @property
    def n_certified(self):
        return sum(1 for v in self.verdicts if v["certified"])

    @property
    def all_certified(self):
        return self.n_certified == len(self.verdicts)

    def as_dict(self):
        return {"n_samples": len(self.verdicts), "n_certified": self.n_certified,
                "worst_margin": self.worst_margin, "params": self.params,
                "verdicts": self.verdicts}


def disc_samples(n, seed=0, radius=1.0, include_centre=True):
    """Uniform points in the open disc (first point the centre)."""
    rng = np.random.default_rng(seed)
    out = [np.zeros(2)] if include_centre else []
    while len(out) < n:
        p = rng.uniform(-radius, radius, 2)
        if p @ p < radius * radius:
            out.append(p)
    return np.array(out[:n])


def free_line(geom, x, K_dir, thick=True):
    """First line direction through ``x`` (angles ``k pi / K``) missing the data, with its clearance margin."""
    ang = np.pi * np.arange(K_dir) / K_dir
    V = np.column_stack([np.cos(ang), np.sin(ang)])
    tau = (geom.rho2 + np.linalg.norm(x)) * (np.pi / K_dir) / 2 if thick else 0.0
    hit = np.zeros(K_dir, dtype=bool)
    for k in range(3):
        hit |= geom.line_hits_sector(np.asarray(x)[None, :], V, k, geom.delta, tau)
    free = np.flatnonzero(~hit)
    if not free.size:
        return None, tau
    return V[free[0]], tau


def certify_zero_weak_solution(geom, f, n_samples=1000, seed=0, K_dir=720, max_refine=2, s=0.75,
                               samples=None, q=None, weak_sub_integrals=True):
    """Weak-solution certificate for ``u = 0`` on ``Omega``.

    The supersolution side needs one line through each sample that misses
    the data (the symmetric integral then vanishes); the subsolution side
    holds because the data are non-negative, and a symmetric integral along
    a direction into a data sector is recorded as a witness.
    """
    check_exponent(s)
    q = q or QuadratureConfig(tol=1e-6)
    pts = disc_samples(n_samples, seed) if samples is None else np.atleast_2d(samples)
    if np.any(np.linalg.norm(pts, axis=1) >= 1.0):
        raise ConfigError("samples must lie in the open unit disc")
    verdicts = []
    failures = []
    zero = ExhibitField(RampField(geom, 0.0), f)
    for i, x in enumerate(pts):
        K = K_dir
        v, tau = free_line(geom, x, K)
        refine = 0
        while v is None and refine < max_refine:
            K *= 2
            refine += 1
            v, tau = free_line(geom, x, K)
        rec = {"index": i, "x": x.tolist(), "certified": v is not None, "K_dir": K}
        if v is None:
            failures.append(rec)
            verdicts.append(rec)
            continue
        rec["direction"] = v.tolist()
        rec["clearance"] = float(geom.delta - tau)
        if weak_sub_integrals:
            # symmetric integral along the free line vanishes; along a sector axis it is >= 0
            sup_val = second_difference_integral(zero, x, v, s, q)
            axis = geom.vertices[0] - x
            axis /= np.linalg.norm(axis)
            sub_val = second_difference_integral(zero, x, axis, s, q)
            rec["super_value"] = float(sup_val.value)
            rec["sub_value"] = float(sub_val.value)
            rec["certified"] = bool(sup_val.value <= 0.0 and sub_val.value >= -sub_val.err_est)
            if not rec["certified"]:
                failures.append(rec)
        verdicts.append(rec)
    if failures:
        raise CertificationFailure(f"{len(failures)} samples without a certificate", witnesses=failures[:5])
    worst = min(v["clearance"] for v in verdicts)
    return CertificateReport(pts, verdicts, float(worst),
                             {"K_dir": K_dir, "seed": seed, "s": s, **geom.params()})


def s_samples(geom, n, seed=0):
    """Uniform points of ``S``."""
    rng = np.random.default_rng(seed)
    ext = geom.a + geom.r
    out = []
    while len(out) < n:
        p = rng.uniform(-ext, ext, (4 * n, 2))
        p = p[geom.in_S(p)]
        out.extend(p.tolist())
    return np.array(out[:n])


def ramp_drop_bound(geom, d, s):
    """Lower bound over all directions of ``int_0^inf (u1(x+tz) - u1(x)) / t^(1+2s) dt`` on the plateau.

    ``d(., dS)`` is 1-Lipschitz, so ``u1(x + t z) >= phi((d - t) / rho)``;
    the bound needs ``d >= rho`` where the ramp is flat.
    """
    from scipy.integrate import quad
    rho = geom.rho
    if d < rho:
        raise ConfigError("the drop bound applies on the plateau d >= rho")
    tail = -d ** (-2 * s) / (2 * s)

    def g(t):
        # phi(1 - z) = 1 - phi(z) avoids cancellation near t = 0
        return -float(smoothstep((t - d + rho) / rho)) / t ** (1 + 2 * s)

    val, _ = quad(g, d - rho, d, limit=200, epsabs=1e-12, epsrel=1e-10)
    return val + tail


def _sector_directions(geom, x):
    mid = 0.5 * (geom.rho1 + geom.rho2)
    c = mid * np.column_stack([np.cos(VERTEX_ANGLES), np.sin(VERTEX_ANGLES)])
    d = c - x
    return d / np.linalg.norm(d, axis=1)[:, None]


def certify_positive_subsolution(geom, f, s=0.75, n_samples=1000, seed=0, eps_cap=None, tol=0.0,
                                 q=None, samples=None, bisection_steps=40, n_spot=20):
    """Largest ``eps`` for which the ramp is a strong subsolution at every sample of ``S``.

    Along a fixed line the integrals of ``eps * u1 + f`` are affine in
    ``eps``.  Where the ramp gradient is nonzero the residual is
    ``eps * I_u + I_f`` along the gradient.  At zero-gradient points the
    sup over directions is bounded below by a direction into a data sector
    and the inf by the depth bound of :func:`ramp_drop_bound`, which gives
    an affine lower bound of the operator value.  The branch follows the
    exact ramp gradient, which vanishes exactly on the plateau ``d >= rho``.
    A spot subset is re-evaluated with the full operator at the final ``eps``.
    """
    check_exponent(s)
    q = q or QuadratureConfig(tol=1e-6)
    u1 = RampField(geom, 1.0)
    data = ExhibitField(RampField(geom, 0.0), f)
    pts = s_samples(geom, n_samples, seed) if samples is None else np.atleast_2d(samples)
    if not np.all(geom.in_S(pts)):
        raise ConfigError("samples must lie in S")
    depth = geom.boundary_distance(pts)
    lines = []   # per sample: list of (slope, intercept) pairs that must all stay >= -tol
    info = []
    for x, d in zip(pts, depth):
        rec = {}
        pieces = []
        if d < geom.rho:
            # the ramp gradient is nonzero: evaluate along it
            v = geom.inward_normal(x[None, :])[0]
            I_u = second_difference_integral(u1, x, v, s, q).value
            I_f = second_difference_integral(data, x, v, s, q).value
            pieces.append((I_u, I_f))
            rec = {"branch": "strong", "direction": v.tolist()}
        else:
            lb = ramp_drop_bound(geom, d, s)
            best = None
            for y in _sector_directions(geom, x):
                a = _one_sided(u1, x, y, s, q)
                b = _one_sided(data, x, y, s, q)
                if best is None or b > best[1]:
                    best = (a, b, y)
            pieces.append((best[0] + lb, best[1]))
            rec = {"branch": "zero", "direction": best[2].tolist()}
        lines.append(pieces)
        info.append(rec)

    def residual(i, eps):
        return min(a * eps + b for a, b in lines[i])

    margins0 = np.array([residual(i, 0.0) for i in range(len(pts))])
    if eps_cap is None:
        eps_cap = 1e-2 * max(float(margins0.min()), 0.0)
    if eps_cap <= 0:
        raise NoPositiveEpsilon("the data give no positive contribution at some sample")

    def ok(eps):
        return all(residual(i, eps) >= -tol for i in range(len(pts)))

    if ok(eps_cap):
        eps_max = eps_cap
    else:
        hi, k = eps_cap, 0
        while not ok(hi / 2):
            hi /= 2
            k += 1
            if k >= 20:
                raise NoPositiveEpsilon("no eps down to eps_cap / 2^20 passes")
        lo, hi = hi / 2, hi
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if ok(mid) else (lo, mid)
        eps_max = lo
    verdicts = []
    for i, (x, rec) in enumerate(zip(pts, info)):
        r = residual(i, eps_max)
        verdicts.append({"index": i, "x": x.tolist(), "branch": rec["branch"], "depth": float(depth[i]),
                         "direction": rec.get("direction"), "residual": float(r),
                         "margin_at_zero": float(margins0[i]), "certified": bool(r >= -tol)})
    spot = []
    if n_spot:
        fld = ExhibitField(RampField(geom, eps_max), f)
        for i in np.linspace(0, len(pts) - 1, min(n_spot, len(pts))).astype(int):
            try:
                val = ifl_eval(fld, pts[i], s, q)
            except AmbiguousGradient:
                continue
            spot.append({"index": int(i), "value": float(val.value), "err_est": float(val.err_est),
                         "bound": verdicts[i]["residual"]})
    worst = min(v["residual"] for v in verdicts)
    rep = CertificateReport(pts, verdicts, float(worst),
                            {"eps_cap": eps_cap, "eps_max": eps_max, "seed": seed, "s": s,
                             "spot_checks": spot, **geom.params()})
    return eps_max, rep


def _one_sided(u, x, y, s, q):
    qz = QuadratureConfig(**{**q.__dict__, "tau_grad": np.inf})
    return one_sided_integral(u, x, y, s, qz).value


def comparison_failure(geom, f, zero_report, eps_max, sub_report):
    """The three facts that together contradict comparison for the weak definition."""
    u = RampField(geom, eps_max)
    pts = sub_report.samples
    facts = {
        "ordered": bool(eps_max > 0 and np.all(u(pts) > 0)),
        "zero_is_weak_solution": zero_report.all_certified,
        "ramp_is_subsolution": sub_report.all_certified,
    }
    facts["comparison_fails"] = all(facts.values())
    return facts


def figure_rows(geom, n_boundary=600, reports=()):
    """Plot-ready rows: boundary of ``S``, sector outlines and sample verdicts."""
    rows = []
    pts, ks = geom.boundary_samples(n_boundary, seed=1)
    for p, k in zip(pts, ks):
        rows.append({"layer": "boundary_S", "x": p[0], "y": p[1], "tag": int(k)})
    t = np.linspace(-HALF_OPENING, HALF_OPENING, 60)
    for k in range(3):
        R = rotation(VERTEX_ANGLES[k])
        outline = [(geom.rho1 * np.cos(a), geom.rho1 * np.sin(a)) for a in t]
        outline += [(geom.rho2 * np.cos(a), geom.rho2 * np.sin(a)) for a in t[::-1]]
        outline.append(outline[0])
        for p in outline:
            q = R @ np.array(p)
            rows.append({"layer": "sector", "x": q[0], "y": q[1], "tag": k})
    for name, rep in reports:
        for v in rep.verdicts:
            rows.append({"layer": name, "x": v["x"][0], "y": v["x"][1], "tag": int(v["certified"])})
    return rows
