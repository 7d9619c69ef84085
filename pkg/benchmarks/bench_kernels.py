"""Time the compiled kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--slots N]
"""
from __future__ import annotations

import argparse
import math
import os
import subprocess
import sys
import timeit

import numpy as np

from vrarcade import _kernels_py as py

try:
    from vrarcade import _kernels as cy
except ImportError:
    cy = None


def _inputs(A=16, U=64, seed=0):
    rng = np.random.default_rng(seed)
    ap_xy = rng.uniform(0, 16, size=(n_aps, 2))
    user_xy = rng.uniform(0, 16, size=(n_players, 2))
    prx = rng.exponential(1e-9, size=(n_aps, n_players))
    target = rng.integers(-1, n_players, size=n_aps)
    serve = np.zeros((n_aps, n_players), dtype=bool)
    for a, u in enumerate(target):
        if u >= 0:
            serve[a, u] = True
    yaw = rng.uniform(-math.pi, math.pi, size=n_players)
    return ap_xy, user_xy, prx, target, serve, yaw


def _cases(mod):
    ap_xy, user_xy, prx, target, serve, yaw = _inputs()
    bw, gm, gs, noise = math.radians(30), 10.5, 0.05, 1e-11
    ap_az = py.azimuths(ap_xy, user_xy)
    user_az = py.azimuths(user_xy, ap_xy)
    gtx = py.tx_gains(ap_az, target, bw, gm, gs)
    grx = py.rx_gains(user_az, yaw, bw, gm, gs)
    active = target >= 0
    users = np.arange(user_xy.shape[0], dtype=np.int64)
    serving = [int(a) for a in np.flatnonzero(serve[:, 0])]
    return {
        "nlos_matrix": lambda: mod.nlos_matrix(ap_xy, user_xy, 0.2),
        "azimuths": lambda: mod.azimuths(ap_xy, user_xy),
        "tx_gains": lambda: mod.tx_gains(ap_az, target, bw, gm, gs),
        "rx_gains": lambda: mod.rx_gains(user_az, yaw, bw, gm, gs),
        "sinr_all": lambda: mod.sinr_all(prx, gtx, grx, serve, active, noise),
        "candidate_sinr": lambda: mod.candidate_sinr(users, prx, gtx, grx, serve, active, gm, noise),
        "player_sinr": lambda: mod.player_sinr(0, serving, prx, ap_az, grx, target, bw, gm, gs, noise),
    }


def _per_call(fn, repeat):
    n = 200
    best = min(timeit.repeat(fn, number=n, repeat=repeat))
    return best / n * 1e6


def _sim_seconds(pure: bool, slots: int) -> float:
    code = (
        "import time;from vrarcade.engine import RunConfig,Simulation;"
        f"s=Simulation(RunConfig(total_slots={slots}));t=time.perf_counter();s.run();"
        "print(time.perf_counter()-t)"
    )
    env = dict(os.environ, VRARCADE_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--slots", type=int, default=2000)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
        return 1
    py_cases, cy_cases = _cases(py), _cases(cy)
    print(f"{'kernel':<16}{'numpy us':>12}{'cython us':>12}{'speedup':>10}")
    for name in py_cases:
        tp = _per_call(py_cases[name], args.repeat)
        tc = _per_call(cy_cases[name], args.repeat)
        print(f"{name:<16}{tp:>12.2f}{tc:>12.2f}{tp / tc:>9.1f}x")
    sp = min(_sim_seconds(True, args.slots) for _ in range(3))
    sc = min(_sim_seconds(False, args.slots) for _ in range(3))
    print(f"\nfull run, A=16 U=64, {args.slots} slots: numpy {sp:.2f} s, cython {sc:.2f} s, "
          f"speedup {sp / sc:.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
