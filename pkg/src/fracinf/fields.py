"""Scalar fields on R^N with growth classes and local C^{1,1} data.

A field is evaluated on an array of points of shape ``(m, N)``.  Besides
values, fields may report an analytic gradient, a local second-order
constant ``M`` (the C^{1,1} control at a point) and the parameters along a
line where their restriction stops being smooth.  The quadrature uses the
last one to seed its partition.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Growth:
    """``|u(x)| <= C`` (bounded) or ``|u(x)| <= C (1 + |x|)**alpha`` (power)."""

    kind: str
    C: float
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("bounded", "power"):
            raise ConfigError(f"unknown growth kind {self.kind!r}")
        if self.C < 0:
            raise ConfigError("growth constant must be non-negative")

    @property
    def exponent(self):
        return 0.0 if self.kind == "bounded" else self.alpha

    def bound(self, r):
        if self.kind == "bounded":
            return self.C * np.ones_like(np.asarray(r, dtype=float))
        return self.C * (1.0 + np.asarray(r, dtype=float)) ** self.alpha

    @staticmethod
    def combine(growths, weights):
        total = sum(abs(w) * g.C for g, w in zip(growths, weights))
        if all(g.kind == "bounded" for g in growths):
            return Growth("bounded", total)
        return Growth("power", total, max(g.exponent for g in growths))


def as_points(pts, dim):
    arr = np.asarray(pts, dtype=float)
    if arr.ndim == 1:
        if dim == 1 and arr.size != 1:
            arr = arr[:, None]
        else:
            arr = arr.reshape(1, dim)
    if arr.shape[-1] != dim:
        raise ConfigError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr


def _line_sphere(x, v, centre, radius):
    """Parameters t with |x + t v - centre| = radius (v a unit vector)."""
    d = x - centre
    b = float(d @ v)
    c = float(d @ d) - radius * radius
    disc = b * b - c
    if disc < 0:
        return []
    root = np.sqrt(disc)
    return [-b - root, -b + root]


class ScalarField:
    """Base class; subclasses implement ``_eval``."""

    dim = 1
    growth = Growth("bounded", 0.0)

    def __call__(self, pts):
        return self._eval(as_points(pts, self.dim))

    def value(self, x):
        return float(self._eval(as_points(np.asarray(x, dtype=float).reshape(1, self.dim), self.dim))[0])

    def _eval(self, pts):
        raise NotImplementedError

    def gradient(self, x):
        """Analytic gradient at ``x`` or ``None``."""
        return None

    def c11(self, x):
        """Local second-order constant at ``x`` or ``None`` when not C^{1,1} there."""
        return None

    def line_breaks(self, x, v):
        """Signed line parameters where ``t -> u(x + t v)`` is not smooth."""
        return []

    def spec(self):
        return None

    # arithmetic sugar used by the tests and harness
    def __add__(self, other):
        if isinstance(other, ScalarField):
            return SumField([self, other], [1.0, 1.0])
        return SumField([self, Constant(float(other), self.dim)], [1.0, 1.0])

    def __mul__(self, k):
        return SumField([self], [float(k)])

    __rmul__ = __mul__

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            return SumField([self, other], [1.0, -1.0])
        return self + (-float(other))


class Constant(ScalarField):
    def __init__(self, c, dim=1):
        self.c = float(c)
        self.dim = int(dim)
        self.growth = Growth("bounded", abs(self.c))

    def _eval(self, pts):
        return np.full(pts.shape[0], self.c)

    def gradient(self, x):
        return np.zeros(self.dim)

    def c11(self, x):
        return 0.0

    def spec(self):
        return {"name": "constant", "c": self.c, "dim": self.dim}


class Affine(ScalarField):
    def __init__(self, a, b=0.0):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.b = float(b)
        self.dim = self.a.size
        self.growth = Growth("power", float(np.linalg.norm(self.a)) + abs(self.b), 1.0)

    def _eval(self, pts):
        return pts @ self.a + self.b

    def gradient(self, x):
        return self.a.copy()

    def c11(self, x):
        return 0.0

    def spec(self):
        return {"name": "affine", "a": self.a.tolist(), "b": self.b}


class Cusp(ScalarField):
    """``A |x - x0|**gamma + B``; with ``gamma = 2s - 1`` it is annihilated away from ``x0``."""

    def __init__(self, A, B, x0, gamma):
        self.A, self.B, self.gamma = float(A), float(B), float(gamma)
        self.x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        self.dim = self.x0.size
        c = abs(self.A) * (1.0 + np.linalg.norm(self.x0)) ** self.gamma + abs(self.B)
        self.growth = Growth("power", c, self.gamma)

    def _eval(self, pts):
        r = np.linalg.norm(pts - self.x0, axis=1)
        return self.A * r ** self.gamma + self.B

    def gradient(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        r = np.linalg.norm(d)
        if r == 0:
            return None
        return self.A * self.gamma * r ** (self.gamma - 2) * d

    def c11(self, x):
        r = np.linalg.norm(np.asarray(x, dtype=float) - self.x0)
        if r == 0:
            return None
        return abs(self.A) * self.gamma * max(1.0, 1.0 - self.gamma) * (0.5 * r) ** (self.gamma - 2)

    def line_breaks(self, x, v):
        d = self.x0 - np.asarray(x, dtype=float)
        t = float(d @ v)
        if np.linalg.norm(d - t * v) <= 1e-12 * max(1.0, np.linalg.norm(d)):
            return [t]
        return []

    def spec(self):
        return {"name": "cusp", "A": self.A, "B": self.B, "x0": self.x0.tolist(), "gamma": self.gamma}


class HalfProfile(ScalarField):
    """``((x_1)_+)**power``; with ``power = s`` it solves the equation on ``x_1 > 0``."""

    def __init__(self, power, dim=1):
        self.power = float(power)
        self.dim = int(dim)
        self.growth = Growth("power", 1.0, self.power)

    def _eval(self, pts):
        return np.maximum(pts[:, 0], 0.0) ** self.power

    def gradient(self, x):
        x1 = float(np.asarray(x, dtype=float)[0])
        g = np.zeros(self.dim)
        if x1 > 0:
            g[0] = self.power * x1 ** (self.power - 1)
        elif x1 == 0:
            return None
        return g

    def c11(self, x):
        x1 = float(np.asarray(x, dtype=float)[0])
        if x1 > 0:
            return 0.5 * self.power * abs(1 - self.power) * (0.5 * x1) ** (self.power - 2)
        if x1 < 0:
            return 0.0
        return None

    def line_breaks(self, x, v):
        if v[0] == 0:
            return []
        return [-float(x[0]) / float(v[0])]

    def spec(self):
        return {"name": "half_profile", "power": self.power, "dim": self.dim}


class Quadric(ScalarField):
    """``c + g.(x-x0) + (x-x0)^T Q (x-x0)``, optionally floored at zero (``cut``)."""

    def __init__(self, Q, c=0.0, x0=None, g=None, cut=False):
        self.Q = np.atleast_2d(np.asarray(Q, dtype=float))
        self.dim = self.Q.shape[0]
        self.Q = 0.5 * (self.Q + self.Q.T)
        self.c = float(c)
        self.x0 = np.zeros(self.dim) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
        self.g = np.zeros(self.dim) if g is None else np.atleast_1d(np.asarray(g, dtype=float))
        self.cut = bool(cut)
        evals = np.linalg.eigvalsh(self.Q)
        self._norm = float(np.max(np.abs(evals)))
        if cut and np.all(evals < 0) and np.allclose(self.g, 0):
            self.growth = Growth("bounded", max(abs(self.c), 0.0))
        else:
            self.growth = Growth("power", abs(self.c) + np.linalg.norm(self.g) + self._norm * (1 + np.linalg.norm(self.x0)) ** 2, 2.0)

    def _raw(self, pts):
        d = pts - self.x0
        return self.c + d @ self.g + np.einsum("ij,jk,ik->i", d, self.Q, d)

    def _eval(self, pts):
        raw = self._raw(pts)
        return np.maximum(raw, 0.0) if self.cut else raw

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        raw = float(self._raw(x[None, :])[0])
        grad = self.g + 2.0 * self.Q @ (x - self.x0)
        if self.cut:
            if raw < 0:
                return np.zeros(self.dim)
            if raw == 0:
                return None
        return grad

    def c11(self, x):
        if not self.cut:
            return self._norm
        raw = float(self._raw(np.asarray(x, dtype=float)[None, :])[0])
        if raw > 0:
            return self._norm
        if raw < 0:
            return 0.0
        return None

    def line_breaks(self, x, v):
        if not self.cut:
            return []
        x = np.asarray(x, dtype=float)
        d = x - self.x0
        a2 = float(v @ self.Q @ v)
        a1 = float(self.g @ v + 2.0 * d @ self.Q @ v)
        a0 = float(self._raw(x[None, :])[0])
        if a2 == 0:
            return [] if a1 == 0 else [-a0 / a1]
        disc = a1 * a1 - 4 * a2 * a0
        if disc < 0:
            return []
        r = np.sqrt(disc)
        return [(-a1 - r) / (2 * a2), (-a1 + r) / (2 * a2)]

    def spec(self):
        return {"name": "quadric", "Q": self.Q.tolist(), "c": self.c, "x0": self.x0.tolist(),
                "g": self.g.tolist(), "cut": self.cut}


def cut_paraboloid(A, r0, x0):
    """``-A(|x - x0|^2 - r0^2) v 0``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    return Quadric(-A * np.eye(x0.size), c=A * r0 * r0, x0=x0, cut=True)


def exhibit_p():
    """``(1 - 2x^2 - y^2) v 0``, the standard discontinuity exhibit."""
    return Quadric(np.diag([-2.0, -1.0]), c=1.0, cut=True)


class CappedQuadratic(ScalarField):
    """``min(A |x - x0|^2, cap)``."""

    def __init__(self, A, cap, x0):
        self.A, self.cap = float(A), float(cap)
        self.x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        self.dim = self.x0.size
        self.growth = Growth("bounded", abs(self.cap))

    def _eval(self, pts):
        r2 = np.sum((pts - self.x0) ** 2, axis=1)
        return np.minimum(self.A * r2, self.cap)

    def gradient(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        r2 = float(d @ d)
        if self.A * r2 < self.cap:
            return 2 * self.A * d
        if self.A * r2 > self.cap:
            return np.zeros(self.dim)
        return None

    def c11(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        r2 = float(d @ d)
        if self.A * r2 == self.cap:
            return None
        return abs(self.A) if self.A * r2 < self.cap else 0.0

    def line_breaks(self, x, v):
        if self.A <= 0:
            return []
        return _line_sphere(np.asarray(x, dtype=float), v, self.x0, np.sqrt(self.cap / self.A))

    def spec(self):
        return {"name": "capped_quadratic", "A": self.A, "cap": self.cap, "x0": self.x0.tolist()}


class GaussianBumps(ScalarField):
    """``sum_i a_i exp(-|x - c_i|^2 / w_i^2)``."""

    def __init__(self, amps, centres, widths):
        self.amps = np.atleast_1d(np.asarray(amps, dtype=float))
        self.centres = np.atleast_2d(np.asarray(centres, dtype=float))
        self.widths = np.atleast_1d(np.asarray(widths, dtype=float))
        self.dim = self.centres.shape[1]
        self.growth = Growth("bounded", float(np.sum(np.abs(self.amps))))

    def _eval(self, pts):
        d2 = np.sum((pts[:, None, :] - self.centres[None, :, :]) ** 2, axis=2)
        return np.exp(-d2 / self.widths[None, :] ** 2) @ self.amps

    def gradient(self, x):
        d = np.asarray(x, dtype=float)[None, :] - self.centres
        e = self.amps * np.exp(-np.sum(d * d, axis=1) / self.widths ** 2)
        return np.sum((-2.0 * e / self.widths ** 2)[:, None] * d, axis=0)

    def c11(self, x):
        return float(np.sum(np.abs(self.amps) / self.widths ** 2))

    def spec(self):
        return {"name": "bumps", "amps": self.amps.tolist(), "centres": self.centres.tolist(),
                "widths": self.widths.tolist()}


class SumField(ScalarField):
    def __init__(self, fields, weights=None):
        self.fields = list(fields)
        self.weights = [1.0] * len(self.fields) if weights is None else [float(w) for w in weights]
        dims = {f.dim for f in self.fields}
        if len(dims) != 1:
            raise ConfigError("summands must share a dimension")
        self.dim = dims.pop()
        self.growth = Growth.combine([f.growth for f in self.fields], self.weights)

    def _eval(self, pts):
        out = np.zeros(pts.shape[0])
        for f, w in zip(self.fields, self.weights):
            out += w * f._eval(pts)
        return out

    def gradient(self, x):
        total = np.zeros(self.dim)
        for f, w in zip(self.fields, self.weights):
            g = f.gradient(x)
            if g is None:
                return None
            total += w * g
        return total

    def c11(self, x):
        total = 0.0
        for f, w in zip(self.fields, self.weights):
            m = f.c11(x)
            if m is None:
                return None
            total += abs(w) * m
        return total

    def line_breaks(self, x, v):
        out = []
        for f in self.fields:
            out.extend(f.line_breaks(x, v))
        return out

    def spec(self):
        parts = [f.spec() for f in self.fields]
        if any(p is None for p in parts):
            return None
        return {"name": "sum", "weights": list(self.weights), "fields": parts}


class RigidField(ScalarField):
    """``x -> u(R x + t)`` for an orthogonal ``R``."""

    def __init__(self, base, R, t):
        self.base = base
        self.R = np.atleast_2d(np.asarray(R, dtype=float))
        self.t = np.atleast_1d(np.asarray(t, dtype=float))
        self.dim = base.dim
        g = base.growth
        if g.kind == "bounded":
            self.growth = g
        else:
            self.growth = Growth("power", g.C * (1 + np.linalg.norm(self.t)) ** g.alpha, g.alpha)

    def _map(self, x):
        return self.R @ np.asarray(x, dtype=float) + self.t

    def _eval(self, pts):
        return self.base._eval(pts @ self.R.T + self.t)

    def gradient(self, x):
        g = self.base.gradient(self._map(x))
        return None if g is None else self.R.T @ g

    def c11(self, x):
        return self.base.c11(self._map(x))

    def line_breaks(self, x, v):
        return self.base.line_breaks(self._map(x), self.R @ v)


class RescaledField(ScalarField):
    """``x -> lam**(1-2s) u(lam x)``, the blow-up scaling."""

    def __init__(self, base, lam, s):
        self.base, self.lam, self.s = base, float(lam), float(s)
        self.dim = base.dim
        self.k = self.lam ** (1 - 2 * self.s)
        g = base.growth
        self.growth = Growth(g.kind, self.k * g.C * max(1.0, self.lam) ** g.exponent, g.alpha)

    def _eval(self, pts):
        return self.k * self.base._eval(self.lam * pts)

    def gradient(self, x):
        g = self.base.gradient(self.lam * np.asarray(x, dtype=float))
        return None if g is None else self.k * self.lam * g

    def c11(self, x):
        m = self.base.c11(self.lam * np.asarray(x, dtype=float))
        return None if m is None else self.k * self.lam ** 2 * m

    def line_breaks(self, x, v):
        return [t / self.lam for t in self.base.line_breaks(self.lam * np.asarray(x, dtype=float), v)]


class FunctionField(ScalarField):
    """Wraps a vectorised callable ``f(points) -> values``."""

    def __init__(self, func, dim, growth, grad=None, c11=None, breaks=None):
        self.func, self.dim, self.growth = func, int(dim), growth
        self._grad, self._c11, self._breaks = grad, c11, breaks

    def _eval(self, pts):
        return np.asarray(self.func(pts), dtype=float)

    def gradient(self, x):
        return None if self._grad is None else np.asarray(self._grad(np.asarray(x, dtype=float)), dtype=float)

    def c11(self, x):
        return None if self._c11 is None else self._c11(np.asarray(x, dtype=float))

    def line_breaks(self, x, v):
        return [] if self._breaks is None else list(self._breaks(np.asarray(x, dtype=float), v))


class TruncatedField(ScalarField):
    """``phi`` on the open ball ``B_r(x0)`` and ``u`` outside."""

    def __init__(self, u, phi, x0, r):
        if u.dim != phi.dim:
            raise ConfigError("u and phi must share a dimension")
        if r <= 0:
            raise ConfigError("truncation radius must be positive")
        self.u, self.phi, self.r = u, phi, float(r)
        self.x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        self.dim = u.dim
        # phi only matters on a bounded ball, so its growth class is irrelevant
        patch = float(phi.growth.bound(np.linalg.norm(self.x0) + self.r))
        if u.growth.kind == "bounded":
            self.growth = Growth("bounded", max(u.growth.C, patch))
        else:
            self.growth = Growth("power", max(u.growth.C, patch), u.growth.alpha)

    def _inside(self, pts):
        return np.sum((pts - self.x0) ** 2, axis=1) < self.r * self.r

    def _eval(self, pts):
        inside = self._inside(pts)
        out = np.empty(pts.shape[0])
        if inside.any():
            out[inside] = self.phi._eval(pts[inside])
        if (~inside).any():
            out[~inside] = self.u._eval(pts[~inside])
        return out

    def _near(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float) - self.x0) < self.r

    def gradient(self, x):
        return self.phi.gradient(x) if self._near(x) else self.u.gradient(x)

    def c11(self, x):
        return self.phi.c11(x) if self._near(x) else self.u.c11(x)

    def line_breaks(self, x, v):
        x = np.asarray(x, dtype=float)
        return (_line_sphere(x, v, self.x0, self.r) + list(self.phi.line_breaks(x, v))
                + list(self.u.line_breaks(x, v)))


class _ExtremumField(ScalarField):
    """Pointwise max (``sign=1``) or min (``sign=-1``) of fields."""

    sign = 1.0

    def __init__(self, fields):
        self.fields = list(fields)
        dims = {f.dim for f in self.fields}
        if len(dims) != 1:
            raise ConfigError("combined fields must share a dimension")
        self.dim = dims.pop()
        gs = [f.growth for f in self.fields]
        if all(g.kind == "bounded" for g in gs):
            self.growth = Growth("bounded", max(g.C for g in gs))
        else:
            self.growth = Growth("power", max(g.C for g in gs), max(g.exponent for g in gs))

    def _eval(self, pts):
        vals = np.vstack([f._eval(pts) for f in self.fields])
        return vals.max(axis=0) if self.sign > 0 else vals.min(axis=0)

    def _active(self, x):
        vals = np.array([f.value(x) for f in self.fields]) * self.sign
        order = np.argsort(vals)[::-1]
        if len(vals) > 1 and vals[order[0]] - vals[order[1]] <= 1e-12 * (1 + abs(vals[order[0]])):
            return None
        return self.fields[order[0]]

    def gradient(self, x):
        f = self._active(x)
        return None if f is None else f.gradient(x)

    def c11(self, x):
        f = self._active(x)
        return None if f is None else f.c11(x)

    def line_breaks(self, x, v):
        out = []
        for f in self.fields:
            out.extend(f.line_breaks(x, v))
        return out


class MaxField(_ExtremumField):
    sign = 1.0


class MinField(_ExtremumField):
    sign = -1.0


_BUILDERS = {
    "constant": lambda p: Constant(p["c"], p.get("dim", 1)),
    "affine": lambda p: Affine(p["a"], p.get("b", 0.0)),
    "cusp": lambda p: Cusp(p.get("A", 1.0), p.get("B", 0.0), p["x0"], p["gamma"] if "gamma" in p else 2 * p["s"] - 1),
    "half_profile": lambda p: HalfProfile(p["power"] if "power" in p else p["s"], p.get("dim", 1)),
    "quadric": lambda p: Quadric(p["Q"], p.get("c", 0.0), p.get("x0"), p.get("g"), p.get("cut", False)),
    "cut_paraboloid": lambda p: cut_paraboloid(p["A"], p["r0"], p["x0"]),
    "exhibit_p": lambda p: exhibit_p(),
    "capped_quadratic": lambda p: CappedQuadratic(p["A"], p["cap"], p["x0"]),
    "bumps": lambda p: GaussianBumps(p["amps"], p["centres"], p["widths"]),
    "sum": lambda p: SumField([field_from_spec(f) for f in p["fields"]], p.get("weights")),
}


def field_from_spec(spec):
    """Build a field from ``{"name": ..., **params}``."""
    try:
        builder = _BUILDERS[spec["name"]]
    except KeyError as exc:
        raise ConfigError(f"unknown field primitive {spec.get('name')!r}") from exc
    try:
        return builder(spec)
    except KeyError as exc:
        raise ConfigError(f"field {spec['name']!r} is missing parameter {exc}") from exc


FIELD_NAMES = tuple(sorted(_BUILDERS))
