import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracinf import dirichlet as D
from fracinf.errors import (AssumptionViolation, HypothesisUnverified, NoConvergence,
                            ParameterViolation)
from fracinf.fields import Affine, Constant, HalfProfile
from fracinf.operator import QuadratureConfig, ifl_eval

S = 0.75


@pytest.fixture(scope="module")
def flat():
    return D.build_strip({"kind": "flat"})


@pytest.fixture(scope="module")
def sol64(flat):
    return D.solve_dirichlet(flat, S, 1 / 64, tol=1e-10)


# ---------------------------------------------------------------------------
# geometry

def test_flat_strip_geometry(flat):
    pts = np.array([[0.1], [0.5], [0.9]])
    assert np.allclose(flat.dist_minus(pts), pts[:, 0])
    assert flat.L == D.FLAT_LIPSCHITZ
    assert flat.theta == pytest.approx(np.pi / 2, abs=1e-5)
    ext = flat.exterior_value(np.array([[-0.3], [0.0], [1.0], [2.0]]))
    assert ext.tolist() == [0.0, 0.0, 1.0, 1.0]


def test_sinusoidal_angle_matches_definition():
    a, om = 0.1, 2 * np.pi
    dom = D.build_strip({"kind": "sinusoidal", "amplitude": a, "frequency": om})
    assert dom.theta == pytest.approx(np.arctan2(1.0, a * om))
    assert dom.C_theta == pytest.approx(np.sin(dom.theta))


def test_touching_graphs_are_rejected():
    with pytest.raises(AssumptionViolation):
        D.build_strip({"kind": "sinusoidal", "amplitude": 0.5, "amplitude2": -0.5, "c1": 0.5, "width": 0.5})


def test_graph_distance_against_dense_sampling():
    g = D.Graph(0.2, 0.1, 2 * np.pi, 0.3)
    rng = np.random.default_rng(0)
    p1, p2 = rng.uniform(0.3, 1.0, 20), rng.uniform(0, 1, 20)
    d, f1, f2 = g.distance(p1, p2)
    ts = np.linspace(-2, 3, 200001)
    for i in range(20):
        ref = np.min(np.hypot(p1[i] - g(ts), p2[i] - ts))
        assert d[i] == pytest.approx(ref, abs=1e-6)


@given(st.floats(0.2, 1.4), st.floats(-2, 2), st.floats(-2, 2))
def test_cone_distance_against_sampled_cone(theta, a, b):
    cone = D.ConeSpec(theta)
    p = np.array([[a, b]])
    d, proj = cone.distance(p, np.zeros(2))
    # the projection lies in the closed cone and realises the distance
    assert np.linalg.norm(p[0] - proj[0]) == pytest.approx(d[0], abs=1e-12)
    ang = np.linspace(-theta, theta, 2001)
    r = np.linspace(0, 6, 601)
    R, A = np.meshgrid(r, ang)
    pts = np.column_stack([(R * np.cos(A)).ravel(), (R * np.sin(A)).ravel()])
    ref = np.min(np.linalg.norm(pts - p, axis=1))
    assert d[0] <= ref + 1e-12
    assert d[0] >= ref - 0.02


def test_cone_membership():
    cone = D.ConeSpec(np.pi / 4)
    assert cone.contains([[1.0, 0.5]])[0]
    assert not cone.contains([[1.0, 1.5]])[0]
    assert cone.contains([[-1.0, 0.2]], sign=-1)[0]


# ---------------------------------------------------------------------------
# barriers

def test_single_vertex_envelope_peak(flat):
    A, t0 = 0.3, 0.5
    env = D.paraboloid_envelope(flat, np.zeros((1, 1)), A, t0)
    assert env.value(env.vertices[0]) == pytest.approx(A * flat.C_theta ** 2 * t0 ** 2)


def test_zero_amplitude_envelope_is_indicator(flat):
    env = D.paraboloid_envelope(flat, None, 0.0, 0.5)
    xs = np.linspace(-0.5, 1.5, 41)[:, None]
    assert np.array_equal(env(xs), (xs[:, 0] >= 1.0).astype(float))


def test_envelope_precondition(flat):
    with pytest.raises(ParameterViolation):
        D.paraboloid_envelope(flat, None, 10.0, 0.5, s=S, c0=0.1)
    with pytest.raises(ParameterViolation):
        D.paraboloid_envelope(flat, None, 1.0, 5.0)


def test_envelope_is_a_subsolution(flat):
    c0, _ = D.analytic_c0(flat, S)
    t0 = 0.5
    A = c0 / (flat.C_theta * t0) ** (2 - 2 * S)
    env = D.paraboloid_envelope(flat, None, A, t0, s=S, c0=c0)
    q = QuadratureConfig()
    for x in np.random.default_rng(1).uniform(0.02, 0.98, 50):
        r = ifl_eval(env, [x], S, q)
        assert r.value >= -(10 * r.err_est + 1e-6)


def test_calibrated_c0(flat):
    cal = D.calibrate_c0(flat, S)
    assert cal.c0 > 0
    assert cal.analytic <= cal.c0
    wide = D.calibrate_c0(D.build_strip({"kind": "flat", "width": 2.0}), S)
    assert wide.c0 <= cal.c0


def test_cut_paraboloid_constant_dominates_centre_value():
    # at the centre the operator equals -(1/(1-s) + 1/s) exactly
    assert D.cut_paraboloid_constant(S) >= 1 / (1 - S) + 1 / S - 1e-3


def test_growth_barrier(flat):
    eps = 0.5 * D.admissible_growth_eps(flat, S)
    g = D.growth_barrier(flat, eps, S)
    xs = np.linspace(0.05, 0.95, 10)[:, None]
    assert np.allclose(g(xs), eps * xs[:, 0] ** S)
    for x in xs:
        r = ifl_eval(g, x, S)
        assert r.value >= -(10 * r.err_est + 1e-6)
        assert D.gain_minus_loss(flat, eps, S, x) > 0
    with pytest.raises(ParameterViolation):
        D.growth_barrier(flat, 2 * D.admissible_growth_eps(flat, S), S)
    small = D.growth_barrier(flat, 1e-9, S)
    assert np.max(small(xs)) < 1e-8


# ---------------------------------------------------------------------------
# solution

def test_solution_basic_properties(sol64, flat):
    h = sol64.h
    assert abs(float(sol64.at([[0.5]])[0]) - 0.5) <= 2 * h
    assert np.all(np.diff(sol64.values) >= -1e-10)
    assert np.all((sol64.values >= 0) & (sol64.values <= 1))
    assert sol64.at(np.array([[-0.5], [0.0]])).tolist() == [0.0, 0.0]
    assert sol64.at(np.array([[1.0], [3.0]])).tolist() == [1.0, 1.0]
    sand = D.barrier_sandwich(sol64)
    assert sand["lower_violations"] == 0 and sand["upper_violations"] == 0
    viol, n = D.check_cone_monotonicity(sol64)
    assert n > 0 and not viol


def test_mesh_stability(sol64, flat):
    fine = D.solve_dirichlet(flat, S, 1 / 128, tol=1e-10)
    xs = sol64.problem.nodes[:, None]
    assert np.max(np.abs(sol64.at(xs) - fine.at(xs))) <= sol64.h


def test_no_convergence(flat):
    with pytest.raises(NoConvergence):
        D.solve_dirichlet(flat, S, 1 / 64, tol=1e-12, max_sweeps=5)


def test_post_verify_residual_is_small_mid_strip(sol64):
    res = D.post_verify(sol64, n_points=5)
    mid = [r for r in res if abs(r["x"] - 0.5) < 1e-9][0]
    assert not mid["excluded"]
    assert abs(mid["residual"]) <= 1e-2 * sol64.h ** (-(1 - S))


# ---------------------------------------------------------------------------
# measurements

def test_exponent_fit_recovers_known_powers(flat):
    fit = D.fit_boundary_exponents(HalfProfile(S, 1), domain=flat, h=1 / 128)
    assert fit.sigma_minus == pytest.approx(S, abs=0.02)
    lin = D.fit_boundary_exponents(Affine([1.0]), domain=flat, h=1 / 128)
    assert lin.sigma_minus == pytest.approx(1.0, abs=0.02)


def test_exponent_fit_needs_bands(flat):
    from fracinf.errors import InsufficientResolution
    with pytest.raises(InsufficientResolution):
        D.fit_boundary_exponents(HalfProfile(S, 1), domain=flat, h=0.04)


def test_uniform_monotonicity(sol64, flat):
    rep = D.check_uniform_monotonicity(sol64)
    assert rep.beta_max > 0 and rep.alpha == 1 + S
    const = D.check_uniform_monotonicity(Constant(0.3), alpha=1 + S, domain=flat, h=1 / 64)
    assert const.beta_max == 0.0
    lin = D.check_uniform_monotonicity(Affine([1.0]), alpha=1 + S, domain=flat, h=1 / 64)
    assert lin.beta_max >= (4 / 64) ** (-S) - 1e-9 and not lin.violations


def test_comparison_checks(flat):
    rng = np.random.default_rng(3)
    interior = rng.uniform(0.05, 0.95, (8, 1))
    exterior = np.array([[-1.0], [-0.1], [1.1], [2.0]])
    c0, _ = D.analytic_c0(flat, S)
    A = c0 / (flat.C_theta * 0.5) ** (2 - 2 * S)
    Pp = D.paraboloid_envelope(flat, None, A, 0.5, "sub")
    Pm = D.paraboloid_envelope(flat, None, A, 0.5, "super")
    assert D.comparison_check(Pp, Pm, interior, exterior, S).holds
    assert D.comparison_check(Pp, Pp, interior, exterior, S, check_residuals=False).holds
    with pytest.raises(HypothesisUnverified):
        D.comparison_check(Pm, Pp, interior, np.array([[0.5]]), S, check_residuals=False)
