"""Command-line entry point: ``fracinf <command> CONFIG.json``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 certification failure.
"""
import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, artifacts
from .config import COMMANDS, load_config
from .errors import CertificationError, ConfigError, FracInfError, NumericalError

OUTPUT_ENV = "FRACINF_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CERT = 0, 2, 3, 4


def set_threads(n):
    """Cap worker threads for BLAS/OpenMP and numba."""
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads must be at least 1")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        import numba
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    except (ImportError, ValueError):
        pass


def _quadrature(cfg):
    from .operator import QuadratureConfig
    return QuadratureConfig(**cfg.get("quadrature", {}))


def _output_dir(cfg, override=None):
    return Path(override or cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or "fracinf_out")


def _manifest(cfg, command):
    return {"manifest_version": artifacts.MANIFEST_VERSION, "library_version": __version__,
            "command": command, "config": cfg, "wall_clock": {}, "residual_logs": {},
            "fitted_exponents": {}, "certificates": {}, "acceptance": {}, "results": {},
            "artifacts": [], "pass": True, "error": None}


# ---------------------------------------------------------------------------
# commands

def cmd_eval(cfg, man, out):
    from .fields import field_from_spec
    from .operator import ifl_eval, ifl_eval_weak
    u = field_from_spec(cfg["field"])
    q = _quadrature(cfg)
    side = cfg.get("side", "strong")
    rows = []
    for p in cfg["points"]:
        if side == "strong":
            r = ifl_eval(u, p, cfg["s"], q)
        else:
            r = ifl_eval_weak(u, p, cfg["s"], q, side=side)
        rows.append({"x": list(p), **r.as_dict()})
    man["results"]["evaluations"] = rows
    return rows[0] if len(rows) == 1 else rows


def cmd_solve_dirichlet(cfg, man, out):
    from .dirichlet import (barrier_sandwich, build_strip, check_cone_monotonicity,
                            fit_boundary_exponents, solve_dirichlet)
    dom = build_strip(cfg["strip"])
    g = cfg.get("grid", {})
    s, h = cfg["s"], g.get("h", 1 / 64)
    kw = {k: g[k] for k in ("tol", "max_sweeps", "n_dirs", "far_cells") if k in g}
    sol = solve_dirichlet(dom, s, h, eps_game=g.get("eps"), post_check=cfg.get("post_check", False),
                          q=_quadrature(cfg) if "quadrature" in cfg else None, **kw)
    man["residual_logs"]["value_iteration"] = sol.table.residuals
    man["results"].update({"sweeps": sol.table.sweeps, "h": h, "eps": sol.table.eps,
                           "barrier": sol.barrier_params, "domain": dom.spec()})
    if sol.post_residuals is not None:
        man["residual_logs"]["post_check"] = sol.post_residuals
    if cfg.get("measure", True):
        try:
            fit = fit_boundary_exponents(sol)
            man["fitted_exponents"] = {"sigma_minus": fit.sigma_minus, "sigma_plus": fit.sigma_plus,
                                       "sigma_interior": fit.sigma_interior, "bands": fit.bands}
        except NumericalError as exc:
            man["fitted_exponents"] = {"skipped": str(exc)}
        if dom.dim == 2:
            viol, n_checked = check_cone_monotonicity(sol)
            man["results"]["cone_monotonicity"] = {"violations": len(viol), "checked": n_checked,
                                                   "witnesses": viol[:5]}
            man["results"]["sandwich"] = barrier_sandwich(sol)
    path = artifacts.dump_grid(sol.coords(), sol.node_values(), out / "solution.csv",
                               grid_spec={"h": h, "s": s, "domain": dom.spec()})
    man["artifacts"] += [path.name, artifacts.sidecar_path(path).name]
    return {"sweeps": sol.table.sweeps, "grid": str(path)}


def cmd_solve_obstacle(cfg, man, out):
    from .obstacle import (build_obstacles, check_lipschitz, detachment_exponent,
                           find_coincidence_M, solve_obstacle)
    pair = build_obstacles(cfg["obstacles"])
    g = cfg.get("grid", {})
    s, h, W = cfg["s"], g.get("h", 1 / 64), g.get("W", 20.0)
    kw = {k: g[k] for k in ("tol", "max_sweeps") if k in g}
    sol = solve_obstacle(pair, s, h=h, W=W, eps=g.get("eps"), post_check=cfg.get("post_check", False), **kw)
    man["residual_logs"]["value_iteration"] = sol.table.residuals
    res = {"sweeps": sol.table.sweeps, "h": h, "W": W, "pair": pair.spec()}
    if cfg.get("measure", True):
        res["M_tilde"] = find_coincidence_M(sol)
        lip = check_lipschitz(sol, pair)
        res["lipschitz"] = lip.__dict__
        for side in ("plus", "minus"):
            try:
                man["fitted_exponents"][f"detachment_{side}"] = detachment_exponent(sol, pair, side).slope
            except NumericalError as exc:
                man["fitted_exponents"][f"detachment_{side}"] = str(exc)
    man["results"].update(res)
    path = artifacts.dump_grid(sol.coords(), sol.values, out / "solution.csv", flags=sol.flags,
                               grid_spec={"h": h, "s": s, "W": W, "pair": pair.spec()})
    man["artifacts"] += [path.name, artifacts.sidecar_path(path).name]
    return {"sweeps": sol.table.sweeps, "grid": str(path), "M_tilde": res.get("M_tilde")}


def cmd_game(cfg, man, out):
    from . import game
    gc = cfg["game"]
    s = cfg["s"]
    a, b = gc.get("a", 0.0), gc.get("b", 1.0)
    left, right = gc.get("left", 0.0), gc.get("right", 1.0)
    h = cfg.get("grid", {}).get("h", (b - a) / 128)
    mid = 0.5 * (a + b)

    def exterior(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < mid, left, right)

    prob = game.interval_problem(a, b, h, exterior)
    eps = cfg.get("grid", {}).get("eps", game.default_eps(h, s))
    table = game.value_iterate(prob, s, eps, tol=cfg.get("grid", {}).get("tol", 1e-10),
                               max_sweeps=cfg.get("grid", {}).get("max_sweeps", 100000))
    man["residual_logs"]["value_iteration"] = table.residuals
    pts = gc.get("points", [mid])
    dpp = table.at(np.asarray(pts, dtype=float))
    rows = [{"x": float(x), "dpp": float(v)} for x, v in zip(pts, dpp)]
    n = gc.get("n_episodes", 0)
    if n:
        gcfg = game.GameConfig("dirichlet", 1, eps, max_turns=gc.get("max_turns", 10 ** 6),
                               inside=lambda p: (p[..., 0] > a) & (p[..., 0] < b),
                               payoff=lambda p: exterior(np.asarray(p)[..., 0]))
        for k, row in enumerate(rows):
            est = game.mc_value(gcfg, [row["x"]], n, table=table, seed=cfg.get("seed", 0) + k,
                                antithetic=gc.get("antithetic", False))
            row.update({"mc": est.value, "stdev": est.stdev, "half_width": est.half_width,
                        "truncated": est.truncated, "mean_turns": est.mean_turns})
    man["results"].update({"sweeps": table.sweeps, "eps": eps, "h": h, "values": rows})
    path = artifacts.dump_grid(prob.coords(), table.values, out / "values.csv",
                               grid_spec={"h": h, "s": s, "eps": eps, "interval": [a, b]})
    man["artifacts"] += [path.name, artifacts.sidecar_path(path).name]
    return rows


def cmd_verify(cfg, man, out):
    from .suites import SUITE_FUNCS
    table = {}
    for name in cfg.get("suites", []):
        kw = {"q": _quadrature(cfg)} if name in ("fundamental", "operator_laws") else {}
        res = SUITE_FUNCS[name](**kw)
        table[name] = res
    man["results"]["suites"] = table
    ids = {"fundamental": "1", "operator_laws": "2", "harness": "9"}
    for name, res in table.items():
        man["acceptance"][ids[name]] = {"pass": bool(res["pass"])}
    man["pass"] = all(r["pass"] for r in table.values())
    return {k: v["pass"] for k, v in table.items()}


def cmd_counterexample(cfg, man, out):
    from . import counterexample as C
    s = cfg.get("s", 0.75)
    seed = cfg.get("seed", 0)
    cc = cfg.get("certificate", {})
    n = cc.get("n_samples", 1000)
    geom = C.build_geometry(cfg.get("geometry", {}))
    f = C.build_data_f(geom)
    zero = C.certify_zero_weak_solution(geom, f, n_samples=n, seed=seed, K_dir=cc.get("K_dir", 720),
                                        s=s, weak_sub_integrals=cc.get("weak_sub_integrals", True))
    eps_max, sub = C.certify_positive_subsolution(geom, f, s=s, n_samples=n, seed=seed,
                                                  n_spot=cc.get("n_spot", 20))
    facts = C.comparison_failure(geom, f, zero, eps_max, sub)
    man["certificates"] = {
        "zero_weak": {"n": len(zero.verdicts), "certified": zero.n_certified,
                      "worst_clearance": zero.worst_margin},
        "positive_sub": {"n": len(sub.verdicts), "certified": sub.n_certified,
                         "eps_max": eps_max, "worst_residual": sub.worst_margin,
                         "spot_checks": sub.params["spot_checks"]},
        "comparison": facts,
    }
    man["acceptance"]["8"] = {"pass": bool(facts["comparison_fails"])}
    rows = C.figure_rows(geom, reports=[("zero_weak", zero), ("positive_sub", sub)])
    path = out / "figure_rows.json"
    artifacts.write_json(rows, path)
    man["artifacts"].append(path.name)
    if not facts["comparison_fails"]:
        raise CertificationError("the comparison-failure facts were not all certified")
    return {"eps_max": eps_max, **facts}


HANDLERS = {"eval": cmd_eval, "solve-dirichlet": cmd_solve_dirichlet,
            "solve-obstacle": cmd_solve_obstacle, "game": cmd_game, "verify": cmd_verify,
            "counterexample": cmd_counterexample}


def run(command, config_path, output_dir=None, threads=None, stdout=None):
    """Run one command; returns the exit status."""
    stdout = stdout or sys.stdout
    try:
        set_threads(threads)
        cfg = load_config(config_path)
        if cfg["command"] != command:
            raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
    except ConfigError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    out = _output_dir(cfg, output_dir)
    man = _manifest(cfg, command)
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        result = HANDLERS[command](cfg, man, out)
        print(json.dumps(artifacts.to_jsonable(result), sort_keys=True), file=stdout)
        if not man["pass"]:
            code = EXIT_NUMERICAL
    except FracInfError as exc:
        code = exc.exit_code
        man["pass"] = False
        man["error"] = {"type": type(exc).__name__, "message": str(exc),
                        "witnesses": getattr(exc, "witnesses", None)}
        print(json.dumps(artifacts.to_jsonable(man["error"])), file=sys.stderr)
    man["wall_clock"] = {"seconds": time.perf_counter() - t0,
                         "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    if command != "eval" or output_dir or cfg.get("output_dir"):
        artifacts.write_manifest(man, out / "manifest.json")
    return code


def diff_main(argv):
    p = argparse.ArgumentParser(prog="fracinf diff", description="Sup difference of two grid dumps.")
    p.add_argument("a")
    p.add_argument("b")
    args = p.parse_args(argv)
    try:
        print(json.dumps(artifacts.diff_grids(args.a, args.b), sort_keys=True))
    except (ConfigError, OSError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "diff":
        return diff_main(argv[1:])
    p = argparse.ArgumentParser(prog="fracinf", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS + ("diff",))
    p.add_argument("config", help="JSON run configuration")
    p.add_argument("--output-dir", help=f"artifact directory (default: ${OUTPUT_ENV} or ./fracinf_out)")
    p.add_argument("--threads", type=int, help="cap on worker threads")
    p.add_argument("--version", action="version", version=__version__)
    args = p.parse_args(argv)
    return run(args.command, args.config, args.output_dir, args.threads)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
