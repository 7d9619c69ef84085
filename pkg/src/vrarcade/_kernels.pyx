# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels. Same signatures as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, atan2, fmod, M_PI

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI


cdef inline double _wrap(double x) nogil:
    cdef double y = fmod(x + M_PI, TWO_PI)
    if y < 0:
        y += TWO_PI
    return y - M_PI


def wrap_angle(x):
    return (np.asarray(x) + np.pi) % (2.0 * np.pi) - np.pi


def nlos_matrix(ap_xy, user_xy, double radius):
    cdef double[:, ::1] ap = np.ascontiguousarray(ap_xy, dtype=np.float64)
    cdef double[:, ::1] us = np.ascontiguousarray(user_xy, dtype=np.float64)
    cdef Py_ssize_t n_ap = ap.shape[0], n_user = us.shape[0]
    out_arr = np.zeros((n_ap, n_user), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef Py_ssize_t a, u, v
    cdef double px, py, dx, dy, len2, s, cx, cy, ex, ey, r2 = radius * radius
    with nogil:
        for a in range(n_ap):
            px = ap[a, 0]
            py = ap[a, 1]
            for u in range(n_user):
                dx = us[u, 0] - px
                dy = us[u, 1] - py
                len2 = dx * dx + dy * dy
                for v in range(n_user):
                    if v == u:
                        continue
                    if len2 > 0:
                        s = ((us[v, 0] - px) * dx + (us[v, 1] - py) * dy) / len2
                        if s < 0:
                            s = 0
                        elif s > 1:
                            s = 1
                    else:
                        s = 0
                    cx = px + s * dx
                    cy = py + s * dy
                    ex = us[v, 0] - cx
                    ey = us[v, 1] - cy
                    if ex * ex + ey * ey <= r2:
                        out[a, u] = 1
                        break
    return out_arr


def azimuths(src_xy, dst_xy):
    cdef double[:, ::1] src = np.ascontiguousarray(src_xy, dtype=np.float64)
    cdef double[:, ::1] dst = np.ascontiguousarray(dst_xy, dtype=np.float64)
    cdef Py_ssize_t n = src.shape[0], m = dst.shape[0], i, j
    out_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                out[i, j] = atan2(dst[j, 1] - src[i, 1], dst[j, 0] - src[i, 0])
    return out_arr


def tx_gains(ap_az, ap_target, double beamwidth, double g_main, double g_sl):
    cdef double[:, ::1] aaz = np.ascontiguousarray(ap_az, dtype=np.float64)
    cdef long long[::1] tgt = np.ascontiguousarray(ap_target, dtype=np.int64)
    cdef Py_ssize_t n_ap = aaz.shape[0], n_user = aaz.shape[1], a, u
    cdef double half = 0.5 * beamwidth, bore
    gtx_arr = np.full((n_ap, n_user), g_sl)
    cdef double[:, ::1] gtx = gtx_arr
    with nogil:
        for a in range(n_ap):
            if tgt[a] < 0:
                continue
            bore = aaz[a, tgt[a]]
            for u in range(n_user):
                if fabs(_wrap(aaz[a, u] - bore)) <= half:
                    gtx[a, u] = g_main
    return gtx_arr


def rx_gains(user_az, boresight, double beamwidth, double g_main, double g_sl):
    cdef double[:, ::1] uaz = np.ascontiguousarray(user_az, dtype=np.float64)
    cdef double[::1] bs = np.ascontiguousarray(boresight, dtype=np.float64)
    cdef Py_ssize_t n_user = uaz.shape[0], n_ap = uaz.shape[1], a, u
    cdef double half = 0.5 * beamwidth
    grx_arr = np.full((n_ap, n_user), g_sl)
    cdef double[:, ::1] grx = grx_arr
    with nogil:
        for u in range(n_user):
            for a in range(n_ap):
                if fabs(_wrap(uaz[u, a] - bs[u])) <= half:
                    grx[a, u] = g_main
    return grx_arr


def sinr_all(prx, gtx, grx, serve, active, double noise):
    cdef double[:, ::1] p = np.ascontiguousarray(prx, dtype=np.float64)
    cdef double[:, ::1] gt = np.ascontiguousarray(gtx, dtype=np.float64)
    cdef double[:, ::1] gr = np.ascontiguousarray(grx, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] srv = np.ascontiguousarray(serve, dtype=np.uint8)
    cdef cnp.uint8_t[::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef Py_ssize_t n_ap = p.shape[0], n_user = p.shape[1], a, u
    out_arr = np.empty(n_user, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double sig, itf, w
    with nogil:
        for u in range(n_user):
            sig = 0
            itf = 0
            for a in range(n_ap):
                w = p[a, u] * gt[a, u] * gr[a, u]
                if srv[a, u]:
                    sig += w
                elif act[a]:
                    itf += w
            out[u] = sig / (itf + noise)
    return out_arr


def player_sinr(Py_ssize_t u, serving, prx, ap_az, grx, ap_target,
                double beamwidth, double g_main, double g_sl, double noise):
    if len(serving) == 0:
        return 0.0
    cdef double[:, :] p = prx
    cdef double[:, :] aaz = ap_az
    cdef double[:, :] gr = grx
    cdef long long[::1] tgt = np.ascontiguousarray(ap_target, dtype=np.int64)
    cdef Py_ssize_t n_ap = p.shape[0], a, v
    mask_arr = np.zeros(n_ap, dtype=np.uint8)
    cdef cnp.uint8_t[::1] mask = mask_arr
    for a in serving:
        mask[a] = 1
    cdef double half = 0.5 * beamwidth
    cdef double sig = 0, itf = 0, gt
    with nogil:
        for a in range(n_ap):
            if mask[a]:
                sig += p[a, u] * g_main * gr[a, u]
                continue
            v = tgt[a]
            if v < 0:
                continue
            gt = g_main if fabs(_wrap(aaz[a, u] - aaz[a, v])) <= half else g_sl
            itf += p[a, u] * gt * gr[a, u]
    return sig / (itf + noise)


def candidate_sinr(users, prx, gtx, grx, serve, active, double g_main, double noise):
    cdef long long[::1] us = np.ascontiguousarray(users, dtype=np.int64)
    cdef double[:, ::1] p = np.ascontiguousarray(prx, dtype=np.float64)
    cdef double[:, ::1] gt = np.ascontiguousarray(gtx, dtype=np.float64)
    cdef double[:, ::1] gr = np.ascontiguousarray(grx, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] srv = np.ascontiguousarray(serve, dtype=np.uint8)
    cdef cnp.uint8_t[::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef Py_ssize_t n_ap = p.shape[0], n = us.shape[0], j, a, u
    out_arr = np.zeros((n_ap, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double total, w
    with nogil:
        for j in range(n):
            u = us[j]
            total = 0
            for a in range(n_ap):
                if act[a] and not srv[a, u]:
                    total += p[a, u] * gt[a, u] * gr[a, u]
            for a in range(n_ap):
                w = p[a, u] * gt[a, u] * gr[a, u] if (act[a] and not srv[a, u]) else 0.0
                out[a, j] = p[a, u] * g_main * gr[a, u] / (total - w + noise)
    return out_arr
