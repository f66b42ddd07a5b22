"""The numpy fallback and the compiled kernels give the same results."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

WORKER = r"""
import json
import numpy as np
from fracinf import _kernels, game
from fracinf.dirichlet import build_strip

s, h = 0.75, 1 / 32
prob = game.interval_problem(0.0, 1.0, h, lambda x: (np.asarray(x) >= 0.5).astype(float))
t = game.value_iterate(prob, s, tol=1e-10)
cfg = game.GameConfig("dirichlet", 1, t.eps, inside=lambda p: (p[..., 0] > 0) & (p[..., 0] < 1),
                      payoff=lambda p: (p[..., 0] >= 0.5).astype(float))
est = game.mc_value(cfg, [0.3], 2000, table=t, seed=4)
sp = build_strip({"kind": "sinusoidal", "amplitude": 0.1}).strip_problem(1 / 8)
V = sp.sweep(sp.start_values(), s, game.default_eps(1 / 8, s))
print(json.dumps({"backend": _kernels.backend(), "mc": est.value, "turns": est.mean_turns,
                  "strip": V.tolist()}))
"""


def run(disable):
    env = dict(os.environ, FRACINF_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER], env=env, capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    return json.loads(res.stdout.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def both():
    return run(False), run(True)


def test_environment_switch_selects_the_backend(both):
    nb, py = both
    assert py["backend"] == "numpy"
    assert nb["backend"] in ("numba", "numpy")


def test_backends_agree(both):
    nb, py = both
    assert nb["mc"] == py["mc"] and nb["turns"] == pytest.approx(py["turns"], rel=1e-12)
    assert np.allclose(nb["strip"], py["strip"], rtol=0, atol=1e-12)
