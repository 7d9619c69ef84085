"""Pure-Python/NumPy implementations of the numeric kernels.

Mirrors ``_kernels.pyx`` function for function; used when the compiled
extension is unavailable or ``VRARCADE_PURE_PYTHON`` is set.
"""
from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(x):
    """Map angles to [-pi, pi)."""
    return (np.asarray(x) + math.pi) % TWO_PI - math.pi


def nlos_matrix(ap_xy, user_xy, radius):
    """Blockage indicator for every (AP, user) pair in the floor plane.

    Entry ``[a, u]`` is 1 when some other user's disc of the given radius
    touches the segment from AP ``a`` to user ``u``.
    """
    ap_xy = np.asarray(ap_xy, dtype=np.float64)
    user_xy = np.asarray(user_xy, dtype=np.float64)
    n_ap, n_user = ap_xy.shape[0], user_xy.shape[0]
    out = np.zeros((n_ap, n_user), dtype=np.uint8)
    if n_user < 2:
        return out
    # segment start P = ap, end Q = user[u], blocker B = user[v]
    seg = user_xy[None, :, :] - ap_xy[:, None, :]  # (aps, players, 2)
    seg_len2 = np.einsum("aui,aui->au", seg, seg)  # (aps, players)
    rel = user_xy[None, None, :, :] - ap_xy[:, None, None, :]  # (aps, 1, players, 2)
    proj = np.einsum("aui,auvi->auv", seg, np.broadcast_to(rel, (n_ap, n_user, n_user, 2)))
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(seg_len2[:, :, None] > 0.0, proj / seg_len2[:, :, None], 0.0)
    s = np.clip(s, 0.0, 1.0)
    closest = ap_xy[:, None, None, :] + s[..., None] * seg[:, :, None, :]
    diff = user_xy[None, None, :, :] - closest
    dist2 = np.einsum("auvi,auvi->auv", diff, diff)
    idx = np.arange(n_user)
    dist2[:, idx, idx] = np.inf
    out[:] = (dist2 <= radius * radius).any(axis=2)
    return out


def azimuths(src_xy, dst_xy):
    """Azimuth (radians) from every source point to every destination point."""
    src_xy = np.asarray(src_xy, dtype=np.float64)
    dst_xy = np.asarray(dst_xy, dtype=np.float64)
    d = dst_xy[None, :, :] - src_xy[:, None, :]
    return np.arctan2(d[..., 1], d[..., 0])


def tx_gains(ap_az, ap_target, beamwidth, g_main, g_sl):
    """Transmit gain of every AP toward every user.

    ``ap_az[a, u]`` is the azimuth from AP ``a`` to user ``u`` and
    ``ap_target[a]`` the user AP ``a`` points at (-1 when idle). Idle APs
    get the sidelobe gain everywhere.
    """
    ap_az = np.asarray(ap_az, dtype=np.float64)
    ap_target = np.asarray(ap_target, dtype=np.int64)
    gtx = np.full(ap_az.shape, g_sl)
    rows = np.flatnonzero(ap_target >= 0)
    if rows.size:
        bore = ap_az[rows, ap_target[rows]]
        dev = np.abs(wrap_angle(ap_az[rows, :] - bore[:, None]))
        gtx[rows, :] = np.where(dev <= 0.5 * beamwidth, g_main, g_sl)
    return gtx


def rx_gains(user_az, boresight, beamwidth, g_main, g_sl):
    """(aps, players) receive gain with user ``u``'s beam centred on ``boresight[u]``."""
    user_az = np.asarray(user_az, dtype=np.float64)
    boresight = np.asarray(boresight, dtype=np.float64)
    dev = np.abs(wrap_angle(user_az - boresight[:, None]))  # (players, aps)
    return np.where(dev <= 0.5 * beamwidth, g_main, g_sl).T.copy()


def sinr_all(prx, gtx, grx, serve, active, noise):
    """SINR of every user given per-link received power before antenna gains.

    Signal sums over serving APs; interference over active APs not serving
    the user. Users with no serving AP get 0.
    """
    prx = np.asarray(prx, dtype=np.float64)
    serve = np.asarray(serve, dtype=bool)
    active = np.asarray(active, dtype=bool)
    power = prx * gtx * grx
    signal = np.where(serve, power, 0.0).sum(axis=0)
    interf = np.where(active[:, None] & ~serve, power, 0.0).sum(axis=0)
    return signal / (interf + noise)


def player_sinr(u, serving, prx, ap_az, grx, ap_target, beamwidth, g_main, g_sl, noise):
    """SINR of one user under a tentative assignment.

    ``serving`` lists the APs serving the user; ``ap_target`` gives each
    AP's current target user or -1. Serving APs point at the user and are
    excluded from the interference sum.
    """
    if len(serving) == 0:
        return 0.0
    half = 0.5 * beamwidth
    serving_set = set(int(a) for a in serving)
    signal = 0.0
    interf = 0.0
    for a in range(prx.shape[0]):
        if a in serving_set:
            signal += prx[a, u] * g_main * grx[a, u]
            continue
        v = int(ap_target[a])
        if v < 0:
            continue
        dtx = abs(float(wrap_angle(ap_az[a, u] - ap_az[a, v])))
        gt = g_main if dtx <= half else g_sl
        interf += prx[a, u] * gt * grx[a, u]
    return signal / (interf + noise)


def candidate_sinr(users, prx, gtx, grx, serve, active, g_main, noise):
    """SINR each listed user would see if served alone by each AP.

    Returns an (aps, len(users)) array. Candidate AP ``a`` points its main
    lobe at the user; every other active AP keeps its current steering
    and interferes unless it already serves the user.
    """
    users = np.asarray(users, dtype=np.int64)
    serve = np.asarray(serve, dtype=bool)
    active = np.asarray(active, dtype=bool)
    p = prx[:, users]
    r = grx[:, users]
    contrib = np.where(active[:, None] & ~serve[:, users], p * gtx[:, users] * r, 0.0)
    interf = contrib.sum(axis=0)[None, :] - contrib
    return p * g_main * r / (interf + noise)
