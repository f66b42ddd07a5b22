"""Compare the numba and pure-numpy kernel backends.

Runs each workload in a child process with ``FRACINF_DISABLE_NUMBA`` set
accordingly, so the backend is fixed at import time.  Usage::

    python3 benchmarks/bench_kernels.py [--episodes 20000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKER = r"""
import json, sys, time
import numpy as np
from fracinf import _kernels, game
from fracinf.dirichlet import build_strip

args = json.loads(sys.argv[1])
out = {"backend": _kernels.backend()}

s, h = 0.75, 1 / 64
prob = game.interval_problem(0.0, 1.0, h, lambda x: (np.asarray(x) >= 0.5).astype(float))
table = game.value_iterate(prob, s, tol=1e-10)
cfg = game.GameConfig("dirichlet", 1, table.eps, inside=lambda p: (p[..., 0] > 0) & (p[..., 0] < 1),
                      payoff=lambda p: (p[..., 0] >= 0.5).astype(float))
game.mc_value(cfg, [0.3], 64, table=table)  # compile
best = []
for _ in range(args["repeat"]):
    t = time.perf_counter()
    est = game.mc_value(cfg, [0.3], args["episodes"], table=table, seed=1)
    best.append(time.perf_counter() - t)
out["episodes_s"] = min(best)
out["episodes_value"] = est.value

dom = build_strip({"kind": "sinusoidal", "amplitude": 0.1})
sp = dom.strip_problem(1 / 16)
V = sp.start_values()
sp.sweep(V, s, game.default_eps(1 / 16, s))  # compile
best = []
for _ in range(args["repeat"]):
    W = V.copy()
    t = time.perf_counter()
    for _ in range(args["sweeps"]):
        W = sp.sweep(W, s, game.default_eps(1 / 16, s))
    best.append(time.perf_counter() - t)
out["strip_sweeps_s"] = min(best)
out["strip_checksum"] = float(np.sum(W))
print(json.dumps(out))
"""


def run_backend(disable, args):
    env = dict(os.environ, FRACINF_DISABLE_NUMBA="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, json.dumps(vars(args))], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--episodes", type=int, default=20000)
    p.add_argument("--sweeps", type=int, default=20)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    t = time.perf_counter()
    nb = run_backend(False, args)
    py = run_backend(True, args)
    print(f"{'workload':<28}{'numba [s]':>12}{'numpy [s]':>12}{'speed-up':>10}")
    for key, label in (("episodes_s", f"{args.episodes} MC episodes"),
                       ("strip_sweeps_s", f"{args.sweeps} strip sweeps h=1/16")):
        print(f"{label:<28}{nb[key]:>12.4f}{py[key]:>12.4f}{py[key] / nb[key]:>10.1f}")
    print(f"MC value       numba {nb['episodes_value']:.6f}  numpy {py['episodes_value']:.6f}")
    print(f"strip checksum numba {nb['strip_checksum']:.12f}  numpy {py['strip_checksum']:.12f}")
    print(f"total wall time {time.perf_counter() - t:.1f} s")


if __name__ == "__main__":
    main()
