import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracinf import __version__, artifacts, cli
from fracinf.config import load_config, validate_config
from fracinf.errors import ConfigError


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


GAME_CFG = {"schema_version": 1, "command": "game", "s": 0.75, "seed": 3,
            "grid": {"h": 1 / 32, "tol": 1e-9},
            "game": {"points": [0.3, 0.5], "n_episodes": 200}}


# ---------------------------------------------------------------------------
# configuration

def test_minimal_configs_validate():
    validate_config({"schema_version": 1, "command": "verify"})
    validate_config({"schema_version": 1, "command": "eval", "s": 0.75,
                     "field": {"name": "constant", "c": 1.0}, "points": [[0.0]]})


@pytest.mark.parametrize("cfg, where", [
    ({"schema_version": 1, "command": "verify", "extra": 1}, "<root>"),
    ({"schema_version": 2, "command": "verify"}, "schema_version"),
    ({"schema_version": 1, "command": "eval", "s": 0.4, "field": {"name": "c"}, "points": [[0]]}, "s"),
    ({"schema_version": 1, "command": "game", "s": 0.75}, "<root>"),
    ({"schema_version": 1, "command": "verify", "suites": ["nope"]}, "suites/0"),
    ({"schema_version": 1, "command": "solve-dirichlet", "s": 0.75, "strip": {"kind": "round"}}, "strip/kind"),
])
def test_invalid_configs_name_the_failing_path(cfg, where):
    with pytest.raises(ConfigError, match=f"at {where}"):
        validate_config(cfg)


def test_unreadable_configs(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)


# ---------------------------------------------------------------------------
# artifacts

@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=30))
def test_grid_dump_round_trips_exactly(tmp_path_factory, vals):
    d = tmp_path_factory.mktemp("grid")
    x = np.arange(len(vals), dtype=float) / 7
    flags = [artifacts.FLAG_VALUES[i % 3] for i in range(len(vals))]
    path = artifacts.dump_grid(x[:, None], vals, d / "g.csv", flags=flags, grid_spec={"h": 1 / 7})
    c, v, f, side = artifacts.load_grid(path)
    assert np.array_equal(c[:, 0], x) and np.array_equal(v, np.asarray(vals))
    assert f == flags
    assert side["h"] == 1 / 7 and side["n_rows"] == len(vals)


def test_grid_dump_rejects_mismatched_input(tmp_path):
    with pytest.raises(ConfigError):
        artifacts.dump_grid(np.zeros((3, 1)), np.zeros(2), tmp_path / "g.csv")
    with pytest.raises(ConfigError):
        artifacts.dump_grid(np.zeros((2, 1)), np.zeros(2), tmp_path / "g.csv", flags=["free", "odd"])


def test_atomic_write_keeps_the_old_file_on_failure(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("old")
    with pytest.raises(RuntimeError):
        with artifacts.atomic_open(p) as fh:
            fh.write("new")
            raise RuntimeError("boom")
    assert p.read_text() == "old"
    assert os.listdir(tmp_path) == ["a.txt"]


def test_non_finite_values_become_strings(tmp_path):
    doc = artifacts.to_jsonable({"a": np.float64("nan"), "b": [np.inf, -np.inf], "c": np.int64(3),
                                 "d": np.array([1.5]), "e": np.bool_(True)})
    assert doc == {"a": "nan", "b": ["inf", "-inf"], "c": 3, "d": [1.5], "e": True}
    artifacts.write_json(doc, tmp_path / "x.json")
    assert json.loads((tmp_path / "x.json").read_text()) == doc


def test_manifest_schema(tmp_path):
    man = cli._manifest({"command": "verify"}, "verify")
    man["acceptance"]["4.holder"] = {"pass": False}
    artifacts.write_manifest(man, tmp_path / "m.json")
    import jsonschema
    man["acceptance"]["11"] = {"pass": True}
    with pytest.raises(jsonschema.ValidationError):
        artifacts.write_manifest(man, tmp_path / "m.json")
    assert "wall_clock" not in artifacts.strip_wall_clock({"wall_clock": 1, "a": 2})


def test_grid_diff_in_one_and_two_dimensions(tmp_path):
    xc = np.linspace(0, 1, 5)
    xf = np.linspace(0, 1, 9)
    a = artifacts.dump_grid(xc[:, None], xc ** 2, tmp_path / "a.csv")
    b = artifacts.dump_grid(xf[:, None], xf ** 2, tmp_path / "b.csv")
    d = artifacts.diff_grids(a, b)
    # every coarse node is a fine node, so no interpolation error enters
    assert d["sup_diff"] == 0.0 and d["n_compared"] == 5
    g = np.stack(np.meshgrid(xc, xc, indexing="ij"), -1).reshape(-1, 2)
    c = artifacts.dump_grid(g, g.sum(1), tmp_path / "c.csv")
    e = artifacts.dump_grid(g, g.sum(1) + (g[:, 0] == 0.5) * 0.1, tmp_path / "e.csv")
    d2 = artifacts.diff_grids(c, e)
    assert d2["sup_diff"] == pytest.approx(0.1) and d2["at"][0] == 0.5
    far = artifacts.dump_grid(g + 10, g.sum(1), tmp_path / "f.csv")
    with pytest.raises(ConfigError):
        artifacts.diff_grids(c, far)


def test_grid_diff_interpolates_the_finer_grid(tmp_path):
    xc = np.linspace(0, 1, 3)
    xf = np.linspace(0.1, 0.9, 5)
    a = artifacts.dump_grid(xc[:, None], xc, tmp_path / "a.csv")
    b = artifacts.dump_grid(xf[:, None], 2 * xf, tmp_path / "b.csv")
    d = artifacts.diff_grids(a, b)
    assert d["n_compared"] == 1 and d["sup_diff"] == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# command line

def test_eval_prints_the_operator_value(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(cli.OUTPUT_ENV, raising=False)
    cfg = {"schema_version": 1, "command": "eval", "s": 0.75,
           "field": {"name": "cusp", "x0": [0.0], "s": 0.75}, "points": [[1.0]]}
    code, out, err = run_cli(capsys, "eval", write_cfg(tmp_path, cfg))
    assert code == 0
    res = json.loads(out)
    assert abs(res["value"]) < 5e-3
    # eval writes no manifest unless asked
    assert not (tmp_path / "fracinf_out").exists()


def test_config_errors_exit_with_code_2(tmp_path, capsys):
    bad = write_cfg(tmp_path, {"schema_version": 1, "command": "verify", "junk": 1})
    code, _, err = run_cli(capsys, "verify", bad)
    assert code == cli.EXIT_CONFIG and "ConfigError" in err
    other = write_cfg(tmp_path, {"schema_version": 1, "command": "verify"}, "v.json")
    code, _, _ = run_cli(capsys, "game", other)
    assert code == cli.EXIT_CONFIG
    code, _, _ = run_cli(capsys, "verify", other, "--threads", "0")
    assert code == cli.EXIT_CONFIG


def test_numerical_failure_exits_with_code_3(tmp_path, capsys):
    cfg = {"schema_version": 1, "command": "solve-dirichlet", "s": 0.75, "strip": {"kind": "flat"},
           "grid": {"h": 1 / 32, "tol": 1e-14, "max_sweeps": 2}}
    out = tmp_path / "out"
    code, _, err = run_cli(capsys, "solve-dirichlet", write_cfg(tmp_path, cfg), "--output-dir", out)
    assert code == 3 and "NoConvergence" in err
    man = json.loads((out / "manifest.json").read_text())
    assert man["pass"] is False and man["error"]["type"] == "NoConvergence"


def test_game_run_writes_artifacts_and_is_deterministic(tmp_path, capsys):
    cfg = write_cfg(tmp_path, GAME_CFG)
    docs = []
    for name in ("r1", "r2"):
        code, out, _ = run_cli(capsys, "game", cfg, "--output-dir", tmp_path / name)
        assert code == 0
        rows = json.loads(out)
        # the sweep residual tolerance of 1e-9 leaves an error of order 1e-9 / (1 - contraction)
        assert rows[1]["dpp"] == pytest.approx(0.5, abs=1e-6)
        assert abs(rows[0]["mc"] - rows[0]["dpp"]) <= rows[0]["half_width"] + 0.05
        docs.append(json.loads((tmp_path / name / "manifest.json").read_text()))
        assert {"values.csv", "values.json"} <= set(os.listdir(tmp_path / name))
    assert artifacts.strip_wall_clock(docs[0]) == artifacts.strip_wall_clock(docs[1])
    assert (tmp_path / "r1" / "values.csv").read_bytes() == (tmp_path / "r2" / "values.csv").read_bytes()


def test_output_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env_out"))
    code, _, _ = run_cli(capsys, "game", write_cfg(tmp_path, {**GAME_CFG, "game": {"points": [0.5]}}))
    assert code == 0 and (tmp_path / "env_out" / "manifest.json").exists()


def test_obstacle_and_diff_commands(tmp_path, capsys):
    base = {"schema_version": 1, "command": "solve-obstacle", "s": 0.75,
            "obstacles": {"kind": "model", "gamma1": 1.0, "gamma2": 1.0}}
    for name, h in (("coarse", 1 / 16), ("fine", 1 / 32)):
        cfg = write_cfg(tmp_path, {**base, "grid": {"h": h, "W": 10.0}}, f"{name}.json")
        code, out, _ = run_cli(capsys, "solve-obstacle", cfg, "--output-dir", tmp_path / name)
        assert code == 0
        assert np.isfinite(json.loads(out)["M_tilde"])
    _, _, flags, _ = artifacts.load_grid(tmp_path / "fine" / "solution.csv")
    assert flags[0] == "plus" and flags[-1] == "minus"
    code, out, _ = run_cli(capsys, "diff", tmp_path / "coarse" / "solution.csv", tmp_path / "fine" / "solution.csv")
    assert code == 0 and json.loads(out)["sup_diff"] < 1 / 16
    code, _, _ = run_cli(capsys, "diff", tmp_path / "nope.csv", tmp_path / "fine" / "solution.csv")
    assert code == cli.EXIT_CONFIG


def test_verify_records_acceptance_ids(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"schema_version": 1, "command": "verify", "suites": ["harness"]})
    code, out, _ = run_cli(capsys, "verify", cfg, "--output-dir", tmp_path / "o")
    assert code == 0 and json.loads(out) == {"harness": True}
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["acceptance"] == {"9": {"pass": True}}


def test_counterexample_command(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"schema_version": 1, "command": "counterexample",
                               "certificate": {"n_samples": 20, "n_spot": 2}})
    code, out, _ = run_cli(capsys, "counterexample", cfg, "--output-dir", tmp_path / "o")
    assert code == 0 and json.loads(out)["comparison_fails"]
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["acceptance"]["8"]["pass"]
    assert man["certificates"]["positive_sub"]["eps_max"] > 0
    assert (tmp_path / "o" / "figure_rows.json").exists()


@pytest.mark.skipif(shutil.which("fracinf") is None, reason="console script not installed")
def test_console_script_reports_version():
    res = subprocess.run(["fracinf", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == __version__


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "fracinf.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
