import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracinf import obstacle as O
from fracinf.errors import (AssumptionViolation, ConfigError, InsufficientResolution,
                            ParameterViolation)
from fracinf.operator import ifl_eval

S = 0.75
H = 1 / 64


@pytest.fixture(scope="module")
def pair():
    return O.model_obstacles(1.0, 1.0)


@pytest.fixture(scope="module")
def sol(pair):
    return O.solve_obstacle(pair, S, h=H, W=20.0)


# ---------------------------------------------------------------------------
# obstacles and assumptions

def test_model_obstacle_profiles(pair):
    x = np.array([-4.0, -1.0, 0.0, 1.0, 4.0])
    assert np.allclose(pair.plus.f(x), [0.25, 1, 1, 1, 1])
    assert np.allclose(pair.minus.f(x), [0, 0, 0, 0, 0.75])
    # derivatives against central differences
    t = np.array([-3.0, -1.7, 1.7, 3.0])
    for fld in (pair.plus, pair.minus):
        fd = (fld.f(t + 1e-6) - fld.f(t - 1e-6)) / 2e-6
        assert np.allclose(fld.df(t), fd, atol=1e-6)
        fdd = (fld.df(t + 1e-6) - fld.df(t - 1e-6)) / 2e-6
        assert np.allclose(fld.ddf(t), fdd, atol=1e-5)


def test_model_obstacles_pass_the_audit(pair):
    rep = O.audit_obstacles(pair, S)
    assert rep["pass"], {k: v for k, v in rep.items() if isinstance(v, dict) and not v["pass"]}
    assert rep["paraboloid_plus_a"]["alpha_verified"] > 2 * S


def test_constant_obstacles_fail_the_audit():
    rep = O.audit_obstacles(O.constant_obstacles(), S)
    assert not rep["pass"] and not rep["limits"]["pass"]
    with pytest.raises(AssumptionViolation):
        O.solve_obstacle(O.constant_obstacles(), S, h=1 / 8, W=4.0)


def test_bad_obstacle_specs():
    with pytest.raises(ConfigError):
        O.model_obstacles(-1.0, 1.0)
    with pytest.raises(ConfigError):
        O.build_obstacles({"kind": "unknown"})


@given(st.floats(2.0, 30.0), st.sampled_from(["plus", "minus"]))
def test_touching_rule_keeps_paraboloid_on_the_right_side(x, side):
    pair = O.model_obstacles(1.0, 1.0)
    x1 = -x if side == "plus" else x
    A = pair.A_rule(x1, side)
    assert O._touches(pair, x1, side, A)
    # the numerically smallest opening does not exceed the rule
    assert O.touching_A(pair, x1, side) <= A * (1 + 1e-6)


def test_barrier_threshold_and_centre_constraint(pair):
    Mt = O.barrier_threshold(pair, S)
    assert Mt > 0 and np.isfinite(Mt)
    with pytest.raises(ParameterViolation):
        O.obstacle_barriers(pair, [[-Mt / 2]], "sub", M_tilde=Mt)
    with pytest.raises(ParameterViolation):
        O.obstacle_barriers(pair, [[Mt / 2]], "super", M_tilde=Mt)
    b = O.obstacle_barriers(pair, [[-2 * Mt]], "sub", M_tilde=Mt)
    x = np.linspace(-60, 60, 601)[:, None]
    assert np.all(b(x) >= pair.minus.f(x[:, 0]) - 1e-12)
    assert np.all(b(x) <= pair.plus.f(x[:, 0]) + 1e-12)


def test_barrier_is_a_subsolution_where_it_leaves_the_obstacle(pair):
    Mt = O.barrier_threshold(pair, S)
    b = O.obstacle_barriers(pair, [[-2 * Mt]], "sub", M_tilde=Mt)
    x = np.linspace(-60, 60, 2401)[:, None]
    lift = np.flatnonzero(b(x) > pair.minus.f(x[:, 0]) + 1e-6)
    assert lift.size
    for i in lift[:: max(1, lift.size // 6)]:
        r = ifl_eval(b, x[i], S)
        assert r.value >= -(10 * r.err_est + 1e-6)


def test_empty_centre_set_returns_the_obstacle(pair):
    assert O.obstacle_barriers(pair, None, "sub") is pair.minus
    assert O.obstacle_barriers(pair, None, "super") is pair.plus


# ---------------------------------------------------------------------------
# solution

def test_solution_respects_the_obstacles(sol):
    assert np.all(sol.values >= sol.lower - 1e-12)
    assert np.all(sol.values <= sol.upper + 1e-12)
    assert np.all(np.diff(sol.values) >= -1e-12)


def test_symmetric_obstacles_give_an_involutive_solution(sol):
    # G+(-x) = 1 - G-(x), so U(-x) = 1 - U(x) up to the discretisation
    assert np.max(np.abs(sol.values + sol.values[::-1] - 1)) <= 2 * H


def test_coincidence_region_is_stable_under_window_doubling(sol, pair):
    big = O.solve_obstacle(pair, S, h=H, W=40.0)
    M1, M2 = O.find_coincidence_M(sol), O.find_coincidence_M(big)
    assert np.isfinite(M1) and abs(M1 - M2) <= H
    assert M1 < sol.W


def test_lipschitz_bound(sol):
    rep = O.check_lipschitz(sol)
    assert rep.passed and rep.A_theta == 1.0 and rep.L0 == 1.0


def test_detachment_is_faster_than_linear(sol):
    for side in ("plus", "minus"):
        fit = O.detachment_exponent(sol, side=side)
        assert fit.slope >= 1.1


def test_detachment_needs_contact(pair):
    fake = O.solution_from_values(pair, np.linspace(-0.5, 0.5, 65), np.full(65, 0.5))
    with pytest.raises(InsufficientResolution):
        O.detachment_exponent(fake, side="plus")


def test_flags_and_interpolation(sol, pair):
    f = sol.flags
    assert f[0] == "plus" and f[-1] == "minus"
    assert set(f) <= {"plus", "minus", "free"}
    assert sol.at([-100.0])[0] == pytest.approx(0.01)
    assert sol.at([100.0])[0] == pytest.approx(0.99)
    assert sol.at([0.0])[0] == pytest.approx(0.5, abs=2 * H)


def test_linear_monotonicity_is_positive_near_the_centre(sol):
    assert O.linear_monotonicity(sol, 2.0) > 0


def test_window_must_fit_the_lattice(pair):
    with pytest.raises(ConfigError):
        O.obstacle_line_problem(pair, 0.3, 1.0)


def test_post_verify_reports_entries(sol):
    res = O.post_verify_obstacle(sol, n_points=6)
    assert res and all("residual" in r for r in res)


# ---------------------------------------------------------------------------
# sigma sets and cone geometry

def test_sigma_inclusion_and_monotone_threshold(pair):
    Ms = []
    for beta in (0.1, 0.05, 0.025):
        sg = O.sigma_sets(pair, H, beta)
        assert sg.inclusion
        Ms.append(sg.M_beta)
    assert Ms[0] <= Ms[1] <= Ms[2]


def test_analytic_threshold_matches_decay(pair):
    # L_M = M^-2 for gamma = 1, so the threshold is beta^-1/2
    assert O.analytic_M_beta(pair, 0.04) == pytest.approx(5.0, rel=1e-9)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.3, 1.2))
def test_two_cone_point(a, b, theta):
    x = np.zeros(2)
    z = np.array([a, b])
    w = O.two_cone_point(x, z, theta)
    cone = O.ConeSpec(theta)
    for v in (x - w, z - w):
        assert cone.distance(v[None, :], np.zeros(2))[0][0] <= 1e-9
    total = np.linalg.norm(x - w) + np.linalg.norm(z - w)
    assert total <= O.two_cone_constant(theta) * np.linalg.norm(z - x) + 1e-9


def test_single_centre_barrier_touches_the_upper_obstacle(pair):
    Mt = O.barrier_threshold(pair, S)
    for xt in (-2 * Mt, -3 * Mt):
        b = O.obstacle_barriers(pair, [[xt]], "sub", M_tilde=Mt)
        assert b.envelope([[xt]])[0] == pytest.approx(pair.plus.f(np.array([xt]))[0], rel=1e-12)


def test_barrier_threshold_decreases_with_faster_decay():
    Ms = [O.barrier_threshold(O.model_obstacles(g, g), S) for g in (0.5, 1.0, 1.5, 2.0, 3.0)]
    assert all(a >= b for a, b in zip(Ms, Ms[1:]))


@pytest.mark.parametrize("beta", [0.1, 0.05, 0.025])
def test_grid_threshold_matches_the_analytic_one(pair, beta):
    assert O.sigma_sets(pair, H, beta).M_beta == pytest.approx(O.analytic_M_beta(pair, beta), abs=H)
