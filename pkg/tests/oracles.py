"""Independent reference computations used by the tests.

Written without reusing package code so that agreement is meaningful.
"""
from __future__ import annotations

import itertools
import math

from shapely.geometry import LineString, Point


def segment_distance(p, q, x) -> float:
    return LineString([tuple(p), tuple(q)]).distance(Point(tuple(x)))


def blocked(ap_xy, target_xy, others_xy, diameter) -> bool:
    return any(segment_distance(ap_xy, target_xy, o) <= diameter / 2 for o in others_xy)


def sector_gain(beamwidth, deviation, g_sl) -> float:
    # main lobe takes whatever power the sidelobe leaves of the full circle
    side_power = g_sl * (2 * math.pi - beamwidth)
    return (2 * math.pi - side_power) / beamwidth if abs(deviation) <= beamwidth / 2 else g_sl


def snr_by_hand(p_w, c, dist, alpha, g_tx, g_rx, n0, bw) -> float:
    return p_w * c * dist ** (-alpha) * g_tx * g_rx / (n0 * bw)


def slots_needed(bits, rates, slot):
    total = 0.0
    for k, r in enumerate(rates):
        total += r * slot
        if total >= bits:
            return k + 1
    return None


def nearest_rank(samples, p):
    xs = sorted(samples)
    rank = math.ceil(p / 100 * len(xs))
    return xs[max(rank, 1) - 1]


def all_matchings(aps, players):
    """Every one-to-one partial matching between ``aps`` and ``players``."""
    aps = list(aps)
    players = list(players)
    out = []
    for k in range(min(len(aps), len(players)) + 1):
        for chosen_aps in itertools.combinations(aps, k):
            for chosen_players in itertools.permutations(players, k):
                out.append(dict(zip(chosen_aps, chosen_players)))
    return out


def is_stable(match, ap_prefs, player_prefs) -> bool:
    """Brute-force stability for plain one-to-one matching (no clones)."""
    inv = {u: a for a, u in match.items()}
    for a, plist in ap_prefs.items():
        for u in plist:
            if match.get(a) == u:
                continue
            ulist = player_prefs[u]
            if a not in ulist:
                continue
            cur = inv.get(u)
            u_better = cur is None or ulist.index(a) < ulist.index(cur)
            holder = match.get(a)
            a_better = holder is None or plist.index(u) < plist.index(holder)
            if u_better and a_better:
                return False
    return True


def eviction_trace(ops, capacity):
    """Reference cache: list of (op, key) with op in {'put', 'stale'}; returns evicted keys."""
    store = []  # [key, stale]
    evicted = []
    for op, key in ops:
        if op == "stale":
            for e in store:
                if e[0] == key:
                    e[1] = True
            continue
        if capacity == 0:
            continue
        if len(store) >= capacity:
            idx = next((i for i, e in enumerate(store) if e[1]), 0)
            evicted.append(store.pop(idx)[0])
        store.append([key, False])
    return evicted
