import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from fracinf.errors import (AmbiguousGradient, ConfigError, DivergentIntegral,
                            GrowthViolation, MissingRegularity, ParameterViolation)
from fracinf.fields import (Affine, CappedQuadratic, Constant, Cusp, GaussianBumps, HalfProfile,
                            Quadric, RigidField, RescaledField, cut_paraboloid, field_from_spec)
from fracinf.operator import (QuadratureConfig, check_exponent, compose_truncated, ifl_eval,
                              ifl_eval_weak, one_sided_integral, second_difference_integral,
                              sphere_directions)

from helpers import cosine_field, random_bumps

Q = QuadratureConfig()
E1 = np.array([1.0])


def test_exponent_range():
    assert check_exponent(0.75) == 0.75
    for bad in (0.5, 1.0, 0.2, 1.3):
        with pytest.raises(ParameterViolation):
            check_exponent(bad)


def test_quadrature_config_validation():
    with pytest.raises(ConfigError):
        QuadratureConfig(delta_in=2.0, R_out=1.0)
    with pytest.raises(ConfigError):
        QuadratureConfig(K_dir=4)
    with pytest.raises(ConfigError):
        QuadratureConfig(tau_grad=0.0)


def test_constant_integrals_are_exactly_zero():
    c = Constant(3.7, 1)
    assert second_difference_integral(c, [0.2], E1, 0.75).value == 0.0
    assert one_sided_integral(c, [0.2], E1, 0.75).value == 0.0


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
def test_affine_second_difference_vanishes(s):
    u = Affine([0.3, -1.2], 0.5)
    v = np.array([0.6, 0.8])
    est = second_difference_integral(u, [0.4, 0.1], v, s)
    assert abs(est.value) <= 1e-10 + est.err_est


def test_cusp_along_its_axis_is_annihilated():
    cusp = Cusp(1.0, 0.0, [0.0], 0.5)
    est = second_difference_integral(cusp, [1.0], E1, 0.75)
    assert abs(est.value) < Q.tol


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
def test_cut_paraboloid_centre_matches_closed_form(s):
    # symmetric second difference of (1 - t^2) v 0 at 0 is -2 t^2 on [0,1] and -2 beyond
    u = cut_paraboloid(1.0, 1.0, [0.0])
    est = second_difference_integral(u, [0.0], E1, s)
    exact = -1.0 / (1 - s) - 1.0 / s
    ref = 2 * (quad(lambda t: -t ** (1 - 2 * s), 0, 1)[0] + quad(lambda t: -t ** (-1 - 2 * s), 1, np.inf)[0])
    assert ref == pytest.approx(exact, rel=1e-8)
    assert est.value == pytest.approx(exact, abs=max(Q.tol, 2 * est.err_est))
    assert est.err_est < 10 * Q.tol


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
def test_one_sided_capped_quadratic_matches_closed_form(s):
    u = CappedQuadratic(1.0, 1.0, [0.0])
    est = one_sided_integral(u, [0.0], E1, s)
    exact = 1.0 / (2 - 2 * s) + 1.0 / (2 * s)
    ref = quad(lambda t: t ** (1 - 2 * s), 0, 1)[0] + quad(lambda t: t ** (-1 - 2 * s), 1, np.inf)[0]
    assert ref == pytest.approx(exact, rel=1e-8)
    assert est.value > 0
    assert est.value == pytest.approx(exact, abs=max(Q.tol, 2 * est.err_est))


def test_one_sided_integral_rejects_nonzero_gradient():
    with pytest.raises(DivergentIntegral):
        one_sided_integral(Affine([1.0]), [0.0], E1, 0.75)


def test_cusp_tip_is_rejected():
    cusp = Cusp(1.0, 0.0, [0.0], 0.5)
    with pytest.raises((DivergentIntegral, MissingRegularity)):
        one_sided_integral(cusp, [0.0], E1, 0.75, QuadratureConfig(tau_grad=1e9))


def test_fast_growth_is_rejected():
    u = Quadric(np.eye(1), 0.0)
    with pytest.raises(GrowthViolation):
        second_difference_integral(u, [0.5], E1, 0.75)


def test_direction_must_be_unit():
    with pytest.raises(ConfigError):
        second_difference_integral(Constant(1.0, 2), [0, 0], np.array([1.0, 1.0]), 0.75)


@pytest.mark.parametrize("s", [0.6, 0.75, 0.9])
@pytest.mark.parametrize("x1", [0.25, 0.5, 1.0])
def test_half_profile_solves_the_equation(s, x1):
    r = ifl_eval(HalfProfile(s, 1), [x1], s)
    assert r.branch == "nonzero_grad"
    assert abs(r.value) <= 5e-3


@pytest.mark.parametrize("A,B", [(1.0, 0.0), (2.5, -1.0), (-0.7, 3.0)])
def test_cusp_at_unit_distance(A, B):
    s = 0.75
    cusp = Cusp(A, B, [0.3, -0.2], 2 * s - 1)
    x = np.array([0.3, -0.2]) + np.array([0.6, 0.8])
    r = ifl_eval(cusp, x, s)
    assert abs(r.value) <= 5e-3
    assert np.linalg.norm(r.v_star) == pytest.approx(1.0)


def test_zero_gradient_branch_records_unit_extremisers():
    u = CappedQuadratic(1.0, 1.0, [0.0, 0.0])
    r = ifl_eval(u, [0.0, 0.0], 0.75)
    assert r.branch == "zero_grad"
    assert np.linalg.norm(r.y_star) == pytest.approx(1.0)
    assert np.linalg.norm(r.z_star) == pytest.approx(1.0)
    # radially symmetric: sup and inf coincide with the closed form
    exact = 1.0 / (2 - 1.5) + 1.0 / 1.5
    assert r.value == pytest.approx(2 * exact, abs=1e-3)


def test_ambiguous_gradient_band():
    u = Affine([1.0])
    with pytest.raises(AmbiguousGradient):
        ifl_eval(u, [0.0], 0.75, QuadratureConfig(tau_grad=1.0))
    # just outside the band both branches are allowed
    assert ifl_eval(u, [0.0], 0.75, QuadratureConfig(tau_grad=0.4)).branch == "nonzero_grad"


def test_sphere_directions_are_unit_and_symmetric():
    for dim, K in ((1, 8), (2, 16), (3, 40), (4, 32)):
        D = sphere_directions(dim, K)
        assert np.allclose(np.linalg.norm(D, axis=1), 1.0)
        for d in D:
            assert np.min(np.linalg.norm(D + d, axis=1)) < 1e-12


# ---------------------------------------------------------------------------
# weak values

def test_weak_values_of_constant_vanish():
    c = Constant(2.0, 2)
    for side in ("sub", "super"):
        assert ifl_eval_weak(c, [0.1, 0.1], 0.75, side=side).value == 0.0


def test_weak_sub_value_dominates_super_value():
    u = GaussianBumps([1.0, 0.4], [[0.0, 0.0], [0.8, 0.3]], [0.7, 0.4])
    x = [0.0, 0.0]
    q = QuadratureConfig(tau_grad=0.5)
    sub = ifl_eval_weak(u, x, 0.75, q, side="sub").value
    sup = ifl_eval_weak(u, x, 0.75, q, side="super").value
    assert sub >= sup


def test_weak_value_defers_to_strong_at_nonzero_gradient():
    u = Affine([1.0, 0.0])
    a = ifl_eval_weak(u, [0.0, 0.0], 0.75, side="sub")
    b = ifl_eval(u, [0.0, 0.0], 0.75)
    assert a.value == b.value and a.branch == "nonzero_grad"
    with pytest.raises(ConfigError):
        ifl_eval_weak(u, [0.0, 0.0], 0.75, side="both")


# ---------------------------------------------------------------------------
# composite fields

def test_compose_with_identical_patch_is_identity():
    u = random_bumps(np.random.default_rng(1))
    ut = compose_truncated(u, u, [0.1, 0.2], 0.3)
    pts = np.random.default_rng(2).uniform(-1, 1, (50, 2))
    assert np.array_equal(ut(pts), u(pts))


def test_compose_is_continuous_in_radius():
    u = Cusp(1.0, 0.0, [0.0], 0.5)
    x0 = np.array([0.7])
    phi = Quadric(np.array([[0.3]]), c=u.value(x0), x0=x0, g=u.gradient(x0))
    vals = [ifl_eval(compose_truncated(u, phi, x0, r), x0, 0.75).value for r in (0.2, 0.1, 0.05)]
    d1, d2 = abs(vals[0] - vals[1]), abs(vals[1] - vals[2])
    assert d2 < d1


def test_compose_needs_regular_patch():
    u = Constant(0.0, 1)
    with pytest.raises(MissingRegularity):
        compose_truncated(u, Cusp(1.0, 0.0, [0.0], 0.5), [0.0], 0.1)


def test_exterior_monotonicity():
    u = random_bumps(np.random.default_rng(5))
    x, v = np.array([0.1, -0.2]), np.array([0.0, 1.0])
    r = 0.4
    bump = GaussianBumps([0.5], [[0.1, 0.8]], [0.05])   # supported far outside B_r(x) in practice
    base = second_difference_integral(u, x, v, 0.75)
    up = second_difference_integral(u + bump, x, v, 0.75)
    assert bump.value(x) < 1e-100 and np.linalg.norm(np.array([0.1, 0.8]) - x) > r
    assert up.value >= base.value - base.err_est - up.err_est


def test_field_specs_build_named_primitives():
    u = field_from_spec({"name": "cusp", "x0": [0.0], "s": 0.75})
    assert u.value([1.0]) == 1.0
    with pytest.raises(ConfigError):
        field_from_spec({"name": "nope"})
    with pytest.raises(ConfigError):
        field_from_spec({"name": "cut_paraboloid", "A": 1.0})


# ---------------------------------------------------------------------------
# operator laws as properties

seeds = st.integers(0, 10 ** 6)


@given(seeds, st.floats(-5, 5))
def test_constant_shift_invariance(seed, c):
    rng = np.random.default_rng(seed)
    u = random_bumps(rng)
    x = rng.uniform(-0.5, 0.5, 2)
    a = ifl_eval(u, x, 0.75)
    b = ifl_eval(u + c, x, 0.75)
    assert abs(a.value - b.value) <= 2 * (a.err_est + b.err_est) + 1e-9


@given(seeds)
def test_rigid_invariance(seed):
    rng = np.random.default_rng(seed)
    u = random_bumps(rng)
    x = rng.uniform(-0.5, 0.5, 2)
    th = rng.uniform(0, 2 * np.pi)
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    t = rng.uniform(-1, 1, 2)
    a = ifl_eval(u, x, 0.75)
    b = ifl_eval(RigidField(u, R, t), R.T @ (x - t), 0.75)
    assert abs(a.value - b.value) <= 2 * (a.err_est + b.err_est) + 1e-9


@given(seeds, st.floats(0.3, 3.0))
def test_scaling_law(seed, lam):
    rng = np.random.default_rng(seed)
    s = 0.75
    u = random_bumps(rng)
    x = rng.uniform(-0.5, 0.5, 2)
    a = ifl_eval(u, lam * x, s)
    b = ifl_eval(RescaledField(u, lam, s), x, s)
    assert abs(b.value - lam * a.value) <= 2 * (b.err_est + lam * a.err_est) + 1e-9


@given(seeds)
def test_sandwich_for_zero_gradient_pairs(seed):
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-0.5, 0.5, 2)
    u, w = cosine_field(rng, x0), cosine_field(rng, x0)
    s = 0.75
    ru, rw = ifl_eval(u, x0, s), ifl_eval(w, x0, s)
    assert ru.branch == rw.branch == "zero_grad"
    d = u - w
    dirs = list(sphere_directions(2, 256)) + [ru.y_star, -ru.z_star, rw.y_star, -rw.z_star]
    L = [one_sided_integral(d, x0, y, s) for y in dirs]
    vals = np.array([e.value for e in L])
    slack = ru.err_est + rw.err_est + 2 * max(e.err_est for e in L)
    diff = ru.value - rw.value
    assert 2 * vals.min() - slack <= diff <= 2 * vals.max() + slack
