import math
import os
import subprocess
import sys

import numpy as np
import pytest

from tests import oracles
from vrarcade import _kernels_py as py
from vrarcade import kernels

try:
    from vrarcade import _kernels as cy
except ImportError:  # extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def _world(seed, n_aps=6, n_players=9):
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


def test_dispatch_respects_override():
    env = dict(os.environ, VRARCADE_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from vrarcade import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")
    if cy is not None and os.environ.get("VRARCADE_PURE_PYTHON", "") in ("", "0"):
        assert kernels.BACKEND == "cython"


def test_fallback_nlos_matches_geometry():
    ap_xy, user_xy, *_ = _world(3, n_aps=4, n_players=10)
    got = py.nlos_matrix(ap_xy, user_xy, 0.2)
    for a in range(len(ap_xy)):
        for u in range(len(user_xy)):
            others = [user_xy[k] for k in range(len(user_xy)) if k != u]
            assert bool(got[a, u]) == oracles.blocked(ap_xy[a], user_xy[u], others, 0.4)


def test_fallback_gains_follow_sector_pattern():
    ap_xy, user_xy, prx, target, serve, yaw = _world(5)
    g_sl, bw = 0.1, math.pi / 6
    g_main = oracles.sector_gain(bw, 0.0, g_sl)
    user_az = py.azimuths(user_xy, ap_xy)
    grx = py.rx_gains(user_az, yaw, bw, g_main, g_sl)
    for a in range(len(ap_xy)):
        for u in range(len(user_xy)):
            dev = py.wrap_angle(user_az[u, a] - yaw[u])
            assert grx[a, u] == oracles.sector_gain(bw, dev, g_sl) or abs(abs(dev) - bw / 2) < 1e-12


@needs_ext
@pytest.mark.parametrize("seed", range(8))
def test_backends_agree(seed):
    ap_xy, user_xy, prx, target, serve, yaw = _world(seed)
    g_main, g_sl, bw, noise = 10.5, 0.05, math.radians(30), 1e-11
    active = target >= 0

    assert np.array_equal(py.nlos_matrix(ap_xy, user_xy, 0.2), cy.nlos_matrix(ap_xy, user_xy, 0.2))
    ap_az_p, ap_az_c = py.azimuths(ap_xy, user_xy), cy.azimuths(ap_xy, user_xy)
    np.testing.assert_allclose(ap_az_p, ap_az_c, rtol=0, atol=1e-12)
    user_az = py.azimuths(user_xy, ap_xy)
    x = np.linspace(-10, 10, 41)
    np.testing.assert_allclose(py.wrap_angle(x), cy.wrap_angle(x), atol=1e-12)

    gtx_p = py.tx_gains(ap_az_p, target, bw, g_main, g_sl)
    gtx_c = cy.tx_gains(ap_az_p, target, bw, g_main, g_sl)
    np.testing.assert_array_equal(gtx_p, gtx_c)
    grx_p = py.rx_gains(user_az, yaw, bw, g_main, g_sl)
    grx_c = cy.rx_gains(user_az, yaw, bw, g_main, g_sl)
    np.testing.assert_array_equal(grx_p, grx_c)

    np.testing.assert_allclose(
        py.sinr_all(prx, gtx_p, grx_p, serve, active, noise),
        cy.sinr_all(prx, gtx_p, grx_p, serve, active, noise),
        rtol=1e-12,
    )
    users = np.arange(user_xy.shape[0], dtype=np.int64)
    np.testing.assert_allclose(
        py.candidate_sinr(users, prx, gtx_p, grx_p, serve, active, g_main, noise),
        cy.candidate_sinr(users, prx, gtx_p, grx_p, serve, active, g_main, noise),
        rtol=1e-12,
    )
    for u in range(user_xy.shape[0]):
        serving = [int(a) for a in np.flatnonzero(serve[:, u])]
        args = (u, serving, prx, ap_az_p, grx_p, target, bw, g_main, g_sl, noise)
        assert py.player_sinr(*args) == pytest.approx(cy.player_sinr(*args), rel=1e-12)


def test_sinr_all_reference_values():
    # two APs, one player served by AP0; AP1 serves someone else
    prx = np.array([[2.0, 1.0], [0.5, 3.0]])
    gtx = np.array([[4.0, 0.1], [0.1, 4.0]])
    grx = np.ones((2, 2))
    serve = np.array([[True, False], [False, True]])
    active = np.array([True, True])
    got = py.sinr_all(prx, gtx, grx, serve, active, 1.0)
    assert got[0] == pytest.approx(8.0 / (0.05 + 1.0))
    assert got[1] == pytest.approx(12.0 / (0.1 + 1.0))
