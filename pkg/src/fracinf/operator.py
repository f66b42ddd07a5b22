"""Pointwise evaluation of the infinity fractional Laplacian.

For a field ``u`` and exponent ``s`` in (1/2, 1):

* when ``grad u(x) != 0`` the value is the one-dimensional fractional
  second-difference integral along ``v = grad u / |grad u|``;
* when ``grad u(x) == 0`` it is ``sup_y L(u, y, x) + inf_z L(u, -z, x)``
  with the one-sided integral ``L(u, y, x) = int_0^inf (u(x + t y) - u(x)) / t^(1+2s) dt``.

No normalising constant is applied; :func:`generator_factor` gives the
factor ``2(1 - s)`` for callers who want the game-generator scaling.

Every radial integral is split in three pieces.  On ``[0, delta_in]`` the
integrand is replaced by its quadratic model (second differences are
``O(t^2)`` for C^{1,1} data); ``[delta_in, R_out]`` is integrated by
adaptive Gauss-Kronrod; the tail ``[R_out, inf)`` is integrated after the
substitution ``t = R_out * w**(-p / 2s)`` which maps it to ``(0, 1]`` and
removes the algebraic growth singularity.  The tail estimate falls back to
the analytic growth envelope when the compactified quadrature does not
converge.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (AmbiguousGradient, ConfigError, DivergentIntegral, GrowthViolation,
                     MissingRegularity, ParameterViolation)
from .fields import ScalarField, TruncatedField
from .quadrature import adaptive_gk, geometric_breaks

NONZERO = "nonzero_grad"
ZERO = "zero_grad"
_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)


def check_exponent(s):
    s = float(s)
    if not 0.5 < s < 1.0:
        raise ParameterViolation(f"exponent s must lie in (1/2, 1), got {s}")
    return s


def generator_factor(s):
    """Constant ``2(1-s)`` relating the operator to the game generator."""
    return 2.0 * (1.0 - check_exponent(s))


@dataclass(frozen=True)
class QuadratureConfig:
    delta_in: float = 1e-3
    R_out: float = 1e3
    n_inner: int = 2
    n_mid: int = 4000
    K_dir: int = 64
    tau_grad: Optional[float] = None
    h_grad: float = 1e-6
    tol: float = 1e-4
    golden_iters: int = 14

    def __post_init__(self):
        if not 0 < self.delta_in < self.R_out:
            raise ConfigError("need 0 < delta_in < R_out")
        if self.K_dir < 8:
            raise ConfigError("K_dir must be at least 8")
        if self.tau_grad is not None and self.tau_grad <= 0:
            raise ConfigError("tau_grad must be positive")
        if self.tol <= 0 or self.h_grad <= 0:
            raise ConfigError("tol and h_grad must be positive")


@dataclass
class Estimate:
    value: float
    err_est: float


@dataclass
class OperatorResult:
    value: float
    err_est: float
    branch: str
    v_star: Optional[np.ndarray] = None
    y_star: Optional[np.ndarray] = None
    z_star: Optional[np.ndarray] = None
    details: dict = field(default_factory=dict)

    def as_dict(self):
        out = {"value": self.value, "err_est": self.err_est, "branch": self.branch}
        for key in ("v_star", "y_star", "z_star"):
            vec = getattr(self, key)
            out[key] = None if vec is None else [float(c) for c in vec]
        return out


# ---------------------------------------------------------------------------
# direction sets

def sphere_directions(dim, K):
    """Deterministic quasi-uniform unit vectors (both signs present)."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2 * np.pi * np.arange(K) / K
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if dim == 3:
        half = max(K // 2, 4)
        i = np.arange(half) + 0.5
        z = 1 - i / half
        phi = np.pi * (1 + 5 ** 0.5) * i
        r = np.sqrt(1 - z * z)
        pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
        return np.vstack([pts, -pts])
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37][:dim]
    half = max(K // 2, 2 * dim)
    pts = np.empty((half, dim))
    for j, p in enumerate(primes):
        for i in range(half):
            f, r, n = 1.0, 0.0, i + 1
            while n > 0:
                f /= p
                r += f * (n % p)
                n //= p
            pts[i, j] = 2 * r - 1
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    pts = np.vstack([np.eye(dim), pts])
    return np.vstack([pts, -pts])


def _angle_dir(theta):
    return np.array([np.cos(theta), np.sin(theta)])


# ---------------------------------------------------------------------------
# radial integrals

def _tail_envelope(u, x, s, R, symmetric):
    g = u.growth
    alpha = g.exponent
    if alpha >= 2 * s:
        raise GrowthViolation(f"growth exponent {alpha} is not below 2s = {2 * s}")
    ux = abs(float(u.value(x)))
    nsides = 2.0 if symmetric else 1.0
    base = (nsides * ux) * R ** (-2 * s) / (2 * s)
    if g.kind == "bounded":
        return nsides * g.C * R ** (-2 * s) / (2 * s) + base
    rx = float(np.linalg.norm(x))
    # (1 + |x| + t)^alpha <= (2 t)^alpha once t >= 1 + |x|
    if R >= 1 + rx:
        far = nsides * g.C * 2 ** alpha * R ** (alpha - 2 * s) / (2 * s - alpha)
    else:
        far = np.inf
    return far + base


def _regularity_probe(D, delta, s):
    """Slope of log|D| against log t near zero; must exceed 2s."""
    etas = delta * 2.0 ** -np.arange(0, 7)
    vals = np.abs(D(etas))
    if np.all(vals <= 1e-300 + 1e-14 * etas ** 2):
        return 0.0
    good = vals > 0
    if good.sum() < 3:
        return 0.0
    slope = np.polyfit(np.log(etas[good]), np.log(vals[good]), 1)[0]
    if slope <= 2 * s:
        raise MissingRegularity(
            f"second differences decay like t^{slope:.3f}; not summable against t^-(1+2s)")
    mags = vals / etas ** 2
    return float(np.max(mags))


def _radial_integral(u, x, v, s, q, symmetric):
    s = check_exponent(s)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    ux = float(u.value(x))

    if symmetric:
        def D(eta):
            eta = np.asarray(eta, dtype=float)
            plus = u(x[None, :] + eta[:, None] * v[None, :])
            minus = u(x[None, :] - eta[:, None] * v[None, :])
            return plus + minus - 2.0 * ux
    else:
        def D(eta):
            eta = np.asarray(eta, dtype=float)
            return u(x[None, :] + eta[:, None] * v[None, :]) - ux

    delta, R = q.delta_in, q.R_out
    M = u.c11(x)
    if M is None:
        M = _regularity_probe(D, delta, s)

    # inner piece: quadratic model, error from the model at half the radius
    w_in = delta ** (2 - 2 * s) / (2 - 2 * s)
    c_full = float(D(np.array([delta]))[0]) / delta ** 2
    c_half = float(D(np.array([0.5 * delta]))[0]) / (0.25 * delta ** 2)
    inner = c_full * w_in
    roundoff = 64 * np.finfo(float).eps * max(1.0, abs(ux)) / delta ** 2 * w_in
    err_in = abs(c_full - c_half) * w_in + roundoff
    bound_in = (2.0 if symmetric else 1.0) * M * w_in
    err_in = min(err_in, bound_in) if bound_in > 0 else err_in

    raw = u.line_breaks(x, v)
    if symmetric:
        brk = sorted({abs(float(t)) for t in raw})
    else:
        brk = sorted({float(t) for t in raw if t > 0})

    def g_mid(eta):
        return D(eta) * eta ** (-1.0 - 2.0 * s)

    mid, err_mid, _ = adaptive_gk(g_mid, geometric_breaks(delta, R, extra=brk), q.tol / 3.0, q.n_mid)

    # tail on (0, 1] after t = R w^(-p/2s)
    alpha = u.growth.exponent
    envelope = _tail_envelope(u, x, s, R, symmetric)
    p = 2 * s / (2 * s - alpha) if alpha > 0 else 1.0

    def g_tail(w):
        eta = R * w ** (-p / (2 * s))
        return D(eta) * p * w ** (p - 1) * R ** (-2 * s) / (2 * s)

    tail_brk = [1.0e-12, 1.0]
    for b in brk:
        if b > R:
            tail_brk.append((R / b) ** (2 * s / p))
    tail_brk.extend(2.0 ** -np.arange(1, 30))
    tail, err_tail, _ = adaptive_gk(g_tail, sorted(tail_brk), q.tol / 3.0, 600)
    # contribution of w in (0, 1e-12): bounded by the envelope at that depth
    eta_deep = R * 1e-12 ** (-p / (2 * s))
    err_tail += _tail_envelope(u, x, s, eta_deep, symmetric) if np.isfinite(eta_deep) else 0.0
    if not np.isfinite(err_tail) or err_tail > envelope:
        tail, err_tail = 0.0, envelope

    value = inner + mid + tail
    err = err_in + err_mid + err_tail
    return Estimate(float(value), float(err))


def second_difference_integral(u, x, v, s, q=None):
    """``int_0^inf [u(x+tv) + u(x-tv) - 2u(x)] / t^(1+2s) dt`` with an error estimate."""
    q = q or QuadratureConfig()
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1) > 1e-9:
        raise ConfigError("direction must be a unit vector")
    return _radial_integral(u, x, v, s, q, symmetric=True)


def _gradient(u, x, q):
    g = u.gradient(x)
    if g is not None:
        return np.asarray(g, dtype=float), True
    h = q.h_grad
    x = np.asarray(x, dtype=float)
    eye = np.eye(u.dim)
    pts = np.vstack([x + h * eye, x - h * eye])
    vals = u(pts)
    return (vals[:u.dim] - vals[u.dim:]) / (2 * h), False


def _threshold(u, x, q):
    if q.tau_grad is not None:
        return q.tau_grad
    M = u.c11(x)
    return 10.0 * q.h_grad * (M if M else 1.0)


def one_sided_integral(u, x, y, s, q=None):
    """``L(u, y, x) = int_0^inf (u(x+ty) - u(x)) / t^(1+2s) dt``; needs a critical point."""
    q = q or QuadratureConfig()
    x = np.asarray(x, dtype=float)
    grad, _ = _gradient(u, x, q)
    if np.linalg.norm(grad) > _threshold(u, x, q):
        raise DivergentIntegral("one-sided integral diverges at a point with nonzero gradient")
    y = np.asarray(y, dtype=float)
    return _radial_integral(u, x, y / np.linalg.norm(y), s, q, symmetric=False)


def _extremise(fun, dirs, dim, q, want_max):
    """Discrete extremum over ``dirs`` followed by a golden-section pass in 2-D."""
    ests = [fun(d) for d in dirs]
    vals = np.array([e.value for e in ests])
    k = int(np.argmax(vals) if want_max else np.argmin(vals))
    best_dir, best = dirs[k], ests[k]
    if dim != 2:
        return best_dir, best
    K = len(dirs)
    th0 = np.arctan2(dirs[k][1], dirs[k][0])
    lo, hi = th0 - 2 * np.pi / K, th0 + 2 * np.pi / K
    sign = 1.0 if want_max else -1.0
    cache = {}

    def f(th):
        if th not in cache:
            cache[th] = fun(_angle_dir(th))
        return cache[th]

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    for _ in range(q.golden_iters):
        if sign * f(c).value > sign * f(d).value:
            b, d = d, c
            c = b - _GOLDEN * (b - a)
        else:
            a, c = c, d
            d = a + _GOLDEN * (b - a)
    for th, est in cache.items():
        if sign * est.value > sign * best.value:
            best, best_dir = est, _angle_dir(th)
    return best_dir, best


def ifl_eval(u, x, s, q=None):
    """Evaluate the infinity fractional Laplacian of ``u`` at ``x``."""
    q = q or QuadratureConfig()
    s = check_exponent(s)
    x = np.asarray(x, dtype=float).reshape(u.dim)
    grad, analytic = _gradient(u, x, q)
    gnorm = float(np.linalg.norm(grad))
    tau = _threshold(u, x, q)
    if 0.5 * tau <= gnorm <= 2 * tau and tau > 0:
        raise AmbiguousGradient(
            f"|grad u| = {gnorm:.3e} is within the ambiguity band around tau_grad = {tau:.3e}")
    if gnorm > tau:
        v = grad / gnorm
        est = second_difference_integral(u, x, v, s, q)
        return OperatorResult(est.value, est.err_est, NONZERO, v_star=v,
                              details={"grad_norm": gnorm, "analytic_gradient": analytic})
    dirs = sphere_directions(u.dim, q.K_dir)

    def L(d):
        return _radial_integral(u, x, d, s, q, symmetric=False)

    # only probe regularity once, via the first call
    y_star, sup_est = _extremise(L, dirs, u.dim, q, want_max=True)
    w_star, inf_est = _extremise(L, dirs, u.dim, q, want_max=False)
    value = sup_est.value + inf_est.value
    err = sup_est.err_est + inf_est.err_est
    return OperatorResult(float(value), float(err), ZERO, y_star=y_star, z_star=-w_star,
                          details={"grad_norm": gnorm, "sup_L": sup_est.value, "inf_L": inf_est.value,
                                   "analytic_gradient": analytic})


def ifl_eval_weak(u, x, s, q=None, side="sub"):
    """Weak-form value: extremum over directions of the symmetric integral.

    At points with a nonzero gradient the strong evaluation is returned.
    """
    if side not in ("sub", "super"):
        raise ConfigError("side must be 'sub' or 'super'")
    q = q or QuadratureConfig()
    s = check_exponent(s)
    x = np.asarray(x, dtype=float).reshape(u.dim)
    grad, _ = _gradient(u, x, q)
    gnorm = float(np.linalg.norm(grad))
    tau = _threshold(u, x, q)
    if gnorm > 2 * tau:
        return ifl_eval(u, x, s, q)
    if 0.5 * tau <= gnorm <= 2 * tau and tau > 0:
        raise AmbiguousGradient("gradient inside the ambiguity band")
    dirs = sphere_directions(u.dim, q.K_dir)
    half = dirs[: max(1, len(dirs) // 2)] if u.dim == 2 else dirs

    def S(d):
        return _radial_integral(u, x, d, s, q, symmetric=True)

    d_star, est = _extremise(S, half, u.dim, q, want_max=(side == "sub"))
    return OperatorResult(est.value, est.err_est, ZERO, y_star=d_star, details={"side": side})


def compose_truncated(u, phi, x0, r):
    """Field equal to ``phi`` on ``B_r(x0)`` and to ``u`` outside."""
    x0 = np.asarray(x0, dtype=float)
    if not isinstance(u, ScalarField) or not isinstance(phi, ScalarField):
        raise ConfigError("compose_truncated expects ScalarField arguments")
    if phi.c11(x0) is None:
        raise MissingRegularity("the patch must be C^{1,1} at the centre")
    return TruncatedField(u, phi, x0, r)
