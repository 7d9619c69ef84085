"""End-to-end acceptance checks, one test per criterion.

Each test records a pass/fail line that is printed in the pytest terminal
summary. Simulation runs are shared between criteria through module fixtures.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from tests.conftest import ACCEPTANCE
from vrarcade.channel import antenna_gain
from vrarcade.cli import SweepSpec, run_sweep
from vrarcade.engine import RunConfig, ScenarioConfig, Simulation
from vrarcade.matching import build_preferences, deferred_acceptance, find_blocking_pairs
from vrarcade.workload import ImpulseModel, draw_actions

SEEDS = list(range(20))
SLOTS = 2000
SWEEP_SEEDS = list(range(10))


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _cfg(scheme, seed, n_mmaps=16, slots=SLOTS):
    return RunConfig(scheme=scheme, seed=seed, total_slots=slots,
                     scenario=ScenarioConfig(n_players=64, n_mmaps=n_mmaps))


@pytest.fixture(scope="module")
def full_scale():
    """(scheme -> list of reports) at A=16, U=64, plus wall time per scheme."""
    out, wall = {}, {}
    for scheme in ("baseline1", "baseline2", "proposed"):
        t0 = time.perf_counter()
        out[scheme] = [Simulation(_cfg(scheme, s)).run() for s in SEEDS]
        wall[scheme] = time.perf_counter() - t0
    return out, wall


def test_criterion_01_stability_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(200):
        n_aps, n_players = int(rng.integers(1, 9)), int(rng.integers(1, 13))
        gain = rng.exponential(1.0, size=(n_aps, n_players))
        slack = rng.normal(0.2, 1.0, size=(n_aps, n_players))
        prof = build_preferences(gain, slack)

        def sinr_fn(u, m, gain=gain):
            serving = set(m.aps_of(u))
            sig = sum(gain[a, u] for a in serving)
            return sig / (1.0 + sum(gain[a, u] for a in m.ap_to_clone if a not in serving))

        m = deferred_acceptance(prof, float(rng.uniform(0.5, 6.0)), sinr_fn)
        m.check()
        bad += len(find_blocking_pairs(m, prof))
    dt = time.perf_counter() - t0
    record(1, bad == 0 and dt < 10.0, f"200 instances, {bad} blocking pairs, {dt:.2f} s")


def test_criterion_02_antenna_power_conservation():
    widths = np.linspace(1e-3, 2 * math.pi - 1e-3, 40)
    gsl = np.linspace(1e-4, 1 - 1e-4, 25)
    worst = max(
        abs(p * antenna_gain(p, 0.0, g) + (2 * math.pi - p) * g - 2 * math.pi) for p in widths for g in gsl
    )
    record(2, worst <= 1e-12, f"1000 grid points, max error {worst:.2e}")


def test_criterion_03_proactive_compute_delay(full_scale):
    reps, wall = full_scale
    cp = {s: float(np.mean([r.mean_cp for r in reps[s]])) for s in reps}
    t = wall["baseline1"] + wall["baseline2"] + wall["proposed"]
    ok = cp["baseline2"] <= 0.5 * cp["baseline1"] and cp["proposed"] <= 0.5 * cp["baseline1"] and t < 300
    record(3, ok, "mean compute ms b1={:.3f} b2={:.3f} proposed={:.3f}, {:.0f} s".format(
        cp["baseline1"] * 1e3, cp["baseline2"] * 1e3, cp["proposed"] * 1e3, t))


def test_criterion_04_multiconnectivity_tail(full_scale):
    reps, wall = full_scale
    p90 = {s: float(np.mean([r.p90_cm for r in reps[s]])) for s in ("baseline2", "proposed")}
    gain = 1 - p90["proposed"] / p90["baseline2"]
    t = wall["baseline2"] + wall["proposed"]
    record(4, gain >= 0.10 and t < 300,
           f"p90 comm ms b2={p90['baseline2'] * 1e3:.3f} proposed={p90['proposed'] * 1e3:.3f}, "
           f"reduction {gain:.1%}, {t:.0f} s")


def test_criterion_05_scarcity_trend(full_scale):
    reps, _ = full_scale
    curves = {}
    for scheme in ("baseline1", "baseline2", "proposed"):
        ys = []
        for n_aps in (4, 8):
            ys.append(float(np.mean([Simulation(_cfg(scheme, s, n_mmaps=n_aps)).run().mean_cm for s in SWEEP_SEEDS])))
        ys.append(float(np.mean([reps[scheme][s].mean_cm for s in SWEEP_SEEDS])))
        curves[scheme] = ys
    ok = all(y[0] >= y[1] >= y[2] for y in curves.values())
    detail = "; ".join(f"{s} " + "/".join(f"{v * 1e3:.2f}" for v in y) for s, y in curves.items())
    record(5, ok, f"mean comm ms at A=4/8/16: {detail}")


def test_criterion_06_admission_soundness(full_scale):
    reps, _ = full_scale
    admitted = sum(r.admitted for r in reps["proposed"])
    misses = sum(r.admitted_misses for r in reps["proposed"])
    rate = misses / admitted
    record(6, admitted >= 10_000 and rate <= 0.15,
           f"{admitted} admitted frames, deadline miss rate = {rate:.4f}")


@pytest.fixture(scope="module")
def long_run():
    sim = Simulation(_cfg("proposed", 0, slots=10_000), check_invariants=True, strict=False)
    t0 = time.perf_counter()
    rep = sim.run()
    return sim, rep, time.perf_counter() - t0


def test_criterion_07_capacity_invariants(long_run):
    sim, rep, _ = long_run
    v = rep.violations
    total = v["cache"] + v["servers"] + v["one_clone_per_ap"]
    record(7, total == 0 and sim.t == 10_000,
           f"10000 slots, violations cache={v['cache']} servers={v['servers']} "
           f"one-clone-per-mmAP={v['one_clone_per_ap']}")


def test_criterion_08_zipf_sampler():
    n = 100
    model = ImpulseModel(n_actions=n, zipf=0.8, impact=np.ones((1, n), dtype=bool), rate=1.0)
    x = draw_actions(model, 1_000_000, np.random.default_rng(8))
    counts = np.bincount(x, minlength=n)
    ratio = counts[0] / counts[1]
    top = counts[:20]
    expected = model.probs[:20] / model.probs[:20].sum() * top.sum()
    p = stats.chisquare(top, expected).pvalue
    record(8, abs(ratio - 2**0.8) <= 0.02 and p > 0.01,
           f"rank1/rank2 = {ratio:.4f} (target {2**0.8:.4f}), chi-square p = {p:.3f}")


def test_criterion_09_deterministic_csv(tmp_path):
    tmpl = RunConfig(total_slots=300, scenario=ScenarioConfig(rows=4, cols=4, n_mmaps=4))
    spec = SweepSpec("players", [4, 8], ["proposed", "baseline1", "baseline2"], [0, 1], tmpl)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_sweep(spec, a)
    run_sweep(spec, b)
    same = a.read_bytes() == b.read_bytes()
    record(9, same, f"two executions, {len(a.read_bytes())} bytes, identical={same}")


def test_criterion_10_performance(long_run):
    _, _, dt = long_run
    record(10, dt < 60.0, f"A=16, U=64, 10000 slots in {dt:.1f} s")
