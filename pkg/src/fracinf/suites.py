"""Invariant suites run by ``fracinf verify``.

Each suite returns ``{"pass": bool, ...}`` with the measured quantities.
They are quick sanity sweeps; the test-suite holds the full checks.
"""
import numpy as np

from .fields import (Constant, Cusp, GaussianBumps, HalfProfile, RescaledField, RigidField, SumField,
                     exhibit_p)
from .harness import (blowup_rescale, holder_seminorm, inf_convolution, sup_convolution)
from .operator import QuadratureConfig, ifl_eval


def fundamental(q=None, s_values=(0.6, 0.75, 0.9), n_cusp=4, seed=0, tol=5e-3):
    """Cusp and half-profile residuals away from their singular sets."""
    q = q or QuadratureConfig()
    rng = np.random.default_rng(seed)
    worst, rows = 0.0, []
    for s in s_values:
        cusp = Cusp(1.0, 0.0, [0.0], 2 * s - 1)
        for r in rng.uniform(0.5, 2.0, n_cusp) * rng.choice([-1.0, 1.0], n_cusp):
            v = ifl_eval(cusp, [r], s, q).value
            rows.append({"field": "cusp", "s": s, "x": float(r), "value": v})
            worst = max(worst, abs(v))
        prof = HalfProfile(s, 1)
        for x in (0.25, 0.5, 1.0):
            v = ifl_eval(prof, [x], s, q).value
            rows.append({"field": "half_profile", "s": s, "x": x, "value": v})
            worst = max(worst, abs(v))
    return {"pass": bool(worst <= tol), "worst": worst, "rows": rows}


def _random_bumps(rng, dim=2, k=3):
    return GaussianBumps(rng.uniform(-1, 1, k), rng.uniform(-1, 1, (k, dim)), rng.uniform(0.5, 1.5, k))


def operator_laws(q=None, n_fields=5, s=0.75, seed=0):
    """Constant shift, rigid motion and blow-up scaling on random smooth fields."""
    q = q or QuadratureConfig()
    rng = np.random.default_rng(seed)
    bad = []
    for i in range(n_fields):
        u = _random_bumps(rng)
        x = rng.uniform(-0.5, 0.5, 2)
        base = ifl_eval(u, x, s, q)
        shifted = ifl_eval(SumField([u, Constant(rng.uniform(-3, 3), 2)]), x, s, q)
        th = rng.uniform(0, 2 * np.pi)
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        t = rng.uniform(-1, 1, 2)
        # u(R y + t) at y = R^T (x - t) is u at x
        rig = ifl_eval(RigidField(u, R, t), R.T @ (x - t), s, q)
        lam = rng.uniform(0.5, 2.0)
        sc = ifl_eval(RescaledField(u, lam, s), x / lam, s, q)
        tol = 2 * (base.err_est + max(shifted.err_est, rig.err_est, sc.err_est)) + 1e-6
        for name, val in (("shift", shifted.value), ("rigid", rig.value), ("scaling", sc.value / lam)):
            if abs(val - base.value) > tol:
                bad.append({"field": i, "law": name, "diff": abs(val - base.value), "tol": tol})
    return {"pass": not bad, "violations": bad, "n_fields": n_fields}


def harness(seed=0, s=0.75):
    """Convolution ordering and touching, blow-up seminorm preservation."""
    rng = np.random.default_rng(seed)
    u = GaussianBumps([1.0, -0.5], [[0.0], [0.7]], [0.4, 0.3])
    pts = rng.uniform(-1, 1, (8, 1))
    eps = 0.05
    up, lo = sup_convolution(u, eps), inf_convolution(u, eps)
    ordered = bool(np.all(lo(pts) <= u(pts) + 1e-12) and np.all(u(pts) <= up(pts) + 1e-12))
    touching = all(up.check_touching(p, seed=k) for k, p in enumerate(pts))
    gamma = 2 * s - 1
    before = holder_seminorm(u, gamma, ([-1.0], [1.0]), budget=4000, seed=seed).seminorm
    lam = 0.5
    bu = blowup_rescale(u, [0.1], lam, s=s)
    after = holder_seminorm(bu, gamma, ([(-1.0 - 0.1) / lam], [(1.0 - 0.1) / lam]),
                            budget=4000, seed=seed).seminorm
    preserved = abs(after - before) <= 0.05 * before
    return {"pass": bool(ordered and touching and preserved), "ordered": ordered,
            "touching": bool(touching), "seminorm_before": before, "seminorm_after": after}


def exhibit_limits(q=None, s=0.75, hs=(0.1, 0.05, 0.025)):
    """Values of the operator on ``(1 - 2x^2 - y^2) v 0`` approaching the vertex along each axis.

    The approach values are extrapolated to ``h = 0`` with the quadratic
    through the three samples; the vertex itself uses the zero-gradient branch.
    """
    q = q or QuadratureConfig()
    p = exhibit_p()
    hs = np.asarray(hs, dtype=float)
    out = {}
    for name, axis in (("along_x", 0), ("along_y", 1)):
        vals = []
        for h in hs:
            x = np.zeros(2)
            x[axis] = h
            vals.append(ifl_eval(p, x, s, q).value)
        coef = np.polyfit(hs, vals, len(hs) - 1)
        out[name] = {"h": hs.tolist(), "values": vals, "limit": float(coef[-1])}
    r = ifl_eval(p, np.zeros(2), s, q)
    out["vertex"] = {"limit": r.value, "err_est": r.err_est}
    lims = [out[k]["limit"] for k in ("along_x", "along_y", "vertex")]
    gap = min(abs(a - b) for i, a in enumerate(lims) for b in lims[i + 1:])
    out["min_gap"] = gap
    out["pass"] = bool(gap > 10 * q.tol)
    return out


SUITE_FUNCS = {"fundamental": fundamental, "operator_laws": operator_laws, "harness": harness}
