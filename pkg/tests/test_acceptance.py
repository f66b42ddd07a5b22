"""Acceptance criteria 1-10 at their stated tolerances.

Each test records one summary line (``ACCEPTANCE <id> PASS|FAIL ...``);
the lines are printed at the end of the pytest run by ``conftest.py``.
"""
import json
import time

import numpy as np
import pytest

from fracinf import artifacts, cli, counterexample as C, dirichlet as D, game, harness as Hn
from fracinf import obstacle as O, suites
from fracinf.fields import Constant, Cusp, HalfProfile, SumField
from fracinf.operator import QuadratureConfig, ifl_eval, one_sided_integral, sphere_directions

from helpers import ACCEPTANCE, cosine_field

S = 0.75


def report(cid, checks, **info):
    """Record the sub-checks of one criterion and assert they all hold."""
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    detail = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())
    line = f"ACCEPTANCE {cid:>2} {'PASS' if ok else 'FAIL'}"
    if failed:
        line += f" [failed: {', '.join(failed)}]"
    ACCEPTANCE.append(f"{line} {detail}")
    print(ACCEPTANCE[-1])
    assert ok, f"criterion {cid}: failed {failed}; {detail}"


# ---------------------------------------------------------------------------

def test_criterion_1_fundamental_solutions():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    q = QuadratureConfig()
    worst_cusp = worst_prof = 0.0
    for s in (0.6, 0.75, 0.9):
        x0 = rng.uniform(-1, 1, 2)
        cusp = Cusp(rng.uniform(0.5, 2), rng.uniform(-1, 1), x0, 2 * s - 1)
        for _ in range(20):
            ang = rng.uniform(0, 2 * np.pi)
            x = x0 + rng.uniform(0.5, 2.0) * np.array([np.cos(ang), np.sin(ang)])
            worst_cusp = max(worst_cusp, abs(ifl_eval(cusp, x, s, q).value))
        prof = HalfProfile(s, 2)
        for x1 in (0.25, 0.5, 1.0):
            worst_prof = max(worst_prof, abs(ifl_eval(prof, [x1, rng.uniform(-1, 1)], s, q).value))
    runtime = time.perf_counter() - t0
    report(1, {"cusp": worst_cusp <= 5e-3, "half_profile": worst_prof <= 5e-3, "runtime": runtime < 60},
           worst_cusp=worst_cusp, worst_half_profile=worst_prof, runtime_s=runtime)


def test_criterion_2_operator_laws_and_sandwich():
    laws = suites.operator_laws(n_fields=50, s=S, seed=2)
    rng = np.random.default_rng(2)
    dirs = list(sphere_directions(2, 256))
    bad_sandwich = 0
    for _ in range(50):
        x0 = rng.uniform(-0.5, 0.5, 2)
        u, w = cosine_field(rng, x0), cosine_field(rng, x0)
        ru, rw = ifl_eval(u, x0, S), ifl_eval(w, x0, S)
        d = u - w
        L = [one_sided_integral(d, x0, y, S) for y in dirs + [ru.y_star, -ru.z_star, rw.y_star, -rw.z_star]]
        vals = np.array([e.value for e in L])
        slack = ru.err_est + rw.err_est + 2 * max(e.err_est for e in L)
        diff = ru.value - rw.value
        bad_sandwich += not (2 * vals.min() - slack <= diff <= 2 * vals.max() + slack)
    report(2, {"laws": laws["pass"], "sandwich": bad_sandwich == 0},
           law_violations=len(laws["violations"]), sandwich_violations=bad_sandwich)


def test_criterion_3_discontinuity_exhibit():
    q = QuadratureConfig()
    ex = suites.exhibit_limits(q, S)
    # closed form: a cut 1-D quadratic (1 - a t^2) v 0 gives -2 a^s (1/(2-2s) + 1/(2s)) at its vertex
    K = 1 / (2 - 2 * S) + 1 / (2 * S)
    oracle = {"along_x": -2 * 2 ** S * K, "along_y": -2 * K, "vertex": -(1 + 2 ** S) * K}
    err = max(abs(ex[k]["limit"] - v) for k, v in oracle.items())
    report(3, {"separated": ex["min_gap"] > 10 * q.tol, "oracle": err < 1e-2},
           min_gap=ex["min_gap"], tol=q.tol, oracle_err=err)


@pytest.fixture(scope="module")
def dirichlet_1d():
    t0 = time.perf_counter()
    dom = D.build_strip({"kind": "flat"})
    h = 1 / 128
    sol = D.solve_dirichlet(dom, S, h, eps_game=h ** (2 * S), tol=1e-10)
    fit = D.fit_boundary_exponents(sol)
    gamma = 2 * S - 1
    xs = np.arange(-1.0, 2.0 + h / 2, h)
    sem_u = Hn.holder_seminorm(sol.at(xs[:, None]), gamma, None, h=h).seminorm
    ext = xs[(xs <= 0) | (xs >= 1)]
    data = dom.exterior_value(ext[:, None])
    i, j = np.triu_indices(ext.size, 1)
    sem_data = float(np.max(np.abs(data[i] - data[j]) / np.abs(ext[i] - ext[j]) ** gamma))
    return sol, fit, sem_u, sem_data, time.perf_counter() - t0


def test_criterion_4_one_dimensional_dirichlet(dirichlet_1d):
    sol, fit, sem_u, sem_data, runtime = dirichlet_1d
    mid = float(sol.at([[0.5]])[0])
    report(4, {"symmetry": abs(mid - 0.5) <= 0.02,
               "boundary_exponent": abs(fit.sigma_minus - S) <= 0.1 and abs(fit.sigma_plus - S) <= 0.1,
               "interior_holder_exponent": abs(fit.sigma_interior - (2 * S - 1)) <= 0.15,
               "seminorm": sem_u <= 1.05 * sem_data, "runtime": runtime < 300},
           U_half=mid, sigma_minus=fit.sigma_minus, sigma_plus=fit.sigma_plus,
           sigma_interior=fit.sigma_interior, target_interior=2 * S - 1, seminorm=sem_u,
           data_seminorm=sem_data, runtime_s=runtime)


def test_criterion_5_dpp_against_monte_carlo():
    h = 1 / 64
    prob = game.interval_problem(0.0, 1.0, h, lambda x: (np.asarray(x) >= 0.5).astype(float))
    table = game.value_iterate(prob, S, tol=1e-11)
    cfg = game.GameConfig("dirichlet", 1, table.eps, inside=lambda p: (p[..., 0] > 0) & (p[..., 0] < 1),
                          payoff=lambda p: (p[..., 0] >= 0.5).astype(float))
    gaps, ok = [], True
    for k, x in enumerate((0.25, 0.4, 0.7)):
        est = game.mc_value(cfg, [x], 10 ** 5, table=table, seed=50 + k)
        sigma = est.half_width / 2.58
        gap = abs(float(table.at(np.array([x]))[0]) - est.value)
        gaps.append(gap)
        ok &= gap <= 3 * sigma + 0.02
    report(5, {"agreement": bool(ok)}, worst_gap=max(gaps))


def test_criterion_6_two_dimensional_strip():
    dom = D.build_strip({"kind": "sinusoidal", "amplitude": 0.1})
    sol = D.solve_dirichlet(dom, S, 1 / 32, tol=1e-8)
    viol, n_checked = D.check_cone_monotonicity(sol)
    mono = D.check_uniform_monotonicity(sol, alpha=1 + S)
    sand = D.barrier_sandwich(sol)
    report(6, {"cone": not viol and n_checked > 0, "uniform_monotonicity": mono.beta_max > 0,
               "sandwich": sand["lower_violations"] == 0 and sand["upper_violations"] == 0},
           cone_violations=len(viol), checked=n_checked, beta=mono.beta_max)


def test_criterion_7_obstacle_problem():
    pair = O.model_obstacles(1.0, 1.0)
    h = 1 / 64
    sol = O.solve_obstacle(pair, S, h=h, W=20.0)
    big = O.solve_obstacle(pair, S, h=h, W=40.0)
    inv = float(np.max(np.abs(sol.values + sol.values[::-1] - 1)))
    M1, M2 = O.find_coincidence_M(sol), O.find_coincidence_M(big)
    lip = O.check_lipschitz(sol)
    slopes = [O.detachment_exponent(sol, side=sd).slope for sd in ("plus", "minus")]
    target = 1 + (S - 0.5) - 0.15
    sig = [O.sigma_sets(pair, h, b) for b in (0.1, 0.05, 0.025)]
    Mb = [g.M_beta for g in sig]
    report(7, {"involution": inv <= 2 * h, "coincidence": np.isfinite(M1) and abs(M1 - M2) <= h,
               "lipschitz": lip.passed, "detachment": min(slopes) >= target,
               "sigma_inclusion": all(g.inclusion for g in sig),
               "M_beta_increasing": Mb[0] < Mb[1] < Mb[2]},
           involution=inv, M_tilde=M1, M_tilde_2W=M2, lipschitz=lip.lip_est, bound=lip.bound,
           detachment=min(slopes), M_beta=str([round(m, 4) for m in Mb]))


def test_criterion_8_counterexample():
    t0 = time.perf_counter()
    geom = C.build_geometry()
    f = C.build_data_f(geom)
    zero = C.certify_zero_weak_solution(geom, f, n_samples=1000, seed=0)
    eps_max, sub = C.certify_positive_subsolution(geom, f, n_samples=1000, seed=0)
    facts = C.comparison_failure(geom, f, zero, eps_max, sub)
    runtime = time.perf_counter() - t0
    report(8, {"zero_weak": zero.n_certified == 1000, "positive_eps": eps_max > 0,
               "sub_certified": sub.all_certified, "comparison_fails": facts["comparison_fails"],
               "runtime": runtime < 600},
           eps_max=eps_max, zero_certified=zero.n_certified, sub_certified=sub.n_certified,
           runtime_s=runtime)


def test_criterion_9_harness_properties():
    base = suites.harness(seed=0, s=S)
    seq = [SumField([HalfProfile(S, 1), Constant(1.0 / n, 1)]) for n in (10, 100, 10 ** 4)]
    stab = Hn.stability_probe(seq, HalfProfile(S, 1), [[0.5], [1.0]], S, ([-1.0], [2.0]), (2.0, S))
    report(9, {"ordering": base["ordered"], "touching": base["touching"],
               "blowup_seminorm": abs(base["seminorm_after"] - base["seminorm_before"])
               <= 0.05 * base["seminorm_before"],
               "stability": stab.passed},
           seminorm_before=base["seminorm_before"], seminorm_after=base["seminorm_after"])


DETERMINISM_CONFIGS = {
    "eval": {"s": 0.75, "field": {"name": "cusp", "x0": [0.0, 0.0], "s": 0.75}, "points": [[1.0, 0.5]]},
    "solve-dirichlet": {"s": 0.75, "strip": {"kind": "flat"}, "grid": {"h": 1 / 32}},
    "solve-obstacle": {"s": 0.75, "obstacles": {"kind": "model"}, "grid": {"h": 1 / 16, "W": 10.0}},
    "game": {"s": 0.75, "seed": 7, "grid": {"h": 1 / 32}, "game": {"points": [0.3], "n_episodes": 2000}},
    "verify": {"suites": ["fundamental", "harness"]},
    "counterexample": {"certificate": {"n_samples": 20, "n_spot": 2}},
}


def test_criterion_10_determinism(tmp_path, capsys):
    mismatched = []
    for command, extra in DETERMINISM_CONFIGS.items():
        cfg = tmp_path / f"{command}.json"
        cfg.write_text(json.dumps({"schema_version": 1, "command": command, **extra}))
        docs, files = [], []
        for rep in ("a", "b"):
            out = tmp_path / f"{command}_{rep}"
            assert cli.main([command, str(cfg), "--output-dir", str(out)]) == 0
            docs.append(artifacts.strip_wall_clock(json.loads((out / "manifest.json").read_text())))
            files.append({p.name: p.read_bytes() for p in out.iterdir() if p.name != "manifest.json"})
        if docs[0] != docs[1] or files[0] != files[1]:
            mismatched.append(command)
    capsys.readouterr()
    report(10, {"bit_exact": not mismatched}, commands=len(DETERMINISM_CONFIGS),
           mismatched=str(mismatched))
