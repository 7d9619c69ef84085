"""Player/mmAP association as a two-sided matching game with player splitting.

mmAPs rank players by the latency slack left after serving them and never
accept a player with negative slack. Players rank mmAPs by link gain.
Players still below the SINR threshold once matched are split into clones
that keep proposing, which yields multi-connectivity.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from vrarcade.edge import FogConfig, compute_time, waiting_time

NEG_INF = float("-inf")
Clone = tuple[int, int]  # (player id, clone index); index 0 is the original


def utility(
    frame_bits: float,
    rate: float,
    fog: FogConfig,
    d_th: float,
    eps: float,
    queue_sizes=(),
    queue_rates=(),
    cached: bool = False,
) -> float:
    """Latency slack of serving a frame at ``rate`` (bit/s).

    Budget ``d_th * eps`` minus expected queueing, render and transfer time.
    Cached frames skip queueing and rendering. Zero rate gives -inf.
    """
    if rate <= 0:
        return NEG_INF
    slack = d_th * eps - frame_bits / rate
    if not cached:
        slack -= waiting_time(queue_sizes, queue_rates)
        slack -= compute_time(frame_bits, fog.server_capability, fog.processing_density)
    return slack


@dataclass
class PreferenceProfile:
    ap_prefs: dict[int, list[int]]  # acceptable players, best first
    player_prefs: dict[int, list[int]]  # mmAPs, best first
    _ap_rank: dict = field(init=False, repr=False)
    _player_rank: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._ap_rank = {a: {u: i for i, u in enumerate(l)} for a, l in self.ap_prefs.items()}
        self._player_rank = {u: {a: i for i, a in enumerate(l)} for u, l in self.player_prefs.items()}

    @property
    def aps(self) -> list[int]:
        return sorted(self.ap_prefs)

    @property
    def players(self) -> list[int]:
        return sorted(self.player_prefs)

    def ap_rank(self, ap: int, player: int) -> int | None:
        """Position of ``player`` in the AP's list; None if unacceptable."""
        return self._ap_rank[ap].get(player)

    def player_rank(self, player: int, ap: int) -> int | None:
        return self._player_rank[player].get(ap)

    def dump(self, fh) -> None:
        for a in self.aps:
            fh.write(json.dumps({"side": "ap", "id": a, "prefs": self.ap_prefs[a]}) + "\n")
        for u in self.players:
            fh.write(json.dumps({"side": "player", "id": u, "prefs": self.player_prefs[u]}) + "\n")


def build_preferences(gain, slack, players=None, aps=None) -> PreferenceProfile:
    """Preference lists from (aps, players) link-gain and utility arrays.

    Players order mmAPs by decreasing gain; mmAPs order players by
    decreasing utility and drop those with negative utility. Ties go to the
    lower id.
    """
    gain = np.asarray(gain, dtype=float)
    slack = np.asarray(slack, dtype=float)
    n_ap, n = gain.shape
    players = list(range(n)) if players is None else [int(p) for p in players]
    aps = list(range(n_ap)) if aps is None else [int(a) for a in aps]
    player_prefs = {}
    for j, u in enumerate(players):
        order = sorted(range(n_ap), key=lambda i: (-gain[i, j], aps[i]))
        player_prefs[u] = [aps[i] for i in order]
    ap_prefs = {}
    for i, a in enumerate(aps):
        ok = [j for j in range(n) if slack[i, j] >= 0]
        ok.sort(key=lambda j: (-slack[i, j], players[j]))
        ap_prefs[a] = [players[j] for j in ok]
    return PreferenceProfile(ap_prefs=ap_prefs, player_prefs=player_prefs)


@dataclass
class Matching:
    aps: list[int]
    clones: dict[int, list[Clone]]  # player -> its clones
    ap_to_clone: dict[int, Clone] = field(default_factory=dict)
    clone_to_ap: dict[Clone, int] = field(default_factory=dict)
    threshold: float = 0.0
    proposals: int = 0
    trace: list = field(default_factory=list)

    def partner(self, x):
        """The match of an AP id or a clone, or ``x`` itself when unmatched."""
        if isinstance(x, tuple):
            return self.clone_to_ap.get(x, x)
        return self.ap_to_clone.get(x, x)

    def aps_of(self, player: int) -> list[int]:
        return [self.clone_to_ap[c] for c in self.clones.get(player, []) if c in self.clone_to_ap]

    def is_active(self, ap: int) -> bool:
        return ap in self.ap_to_clone

    def player_of(self, ap: int) -> int | None:
        c = self.ap_to_clone.get(ap)
        return None if c is None else c[0]

    def pairs(self) -> list[tuple[int, int]]:
        """(ap, player) associations, one per active AP."""
        return sorted((a, c[0]) for a, c in self.ap_to_clone.items())

    def matched_players(self) -> list[int]:
        return sorted({c[0] for c in self.clone_to_ap})

    def link(self, clone: Clone, ap: int) -> None:
        self.ap_to_clone[ap] = clone
        self.clone_to_ap[clone] = ap

    def unlink(self, clone: Clone) -> None:
        ap = self.clone_to_ap.pop(clone, None)
        if ap is not None:
            del self.ap_to_clone[ap]

    def check(self) -> None:
        """Raise AssertionError unless the mapping is a valid one-to-one matching."""
        for a, c in self.ap_to_clone.items():
            assert a in self.aps, f"unknown AP {a}"
            assert self.clone_to_ap.get(c) == a, f"AP {a} and clone {c} disagree"
        for c, a in self.clone_to_ap.items():
            assert self.ap_to_clone.get(a) == c, f"clone {c} and AP {a} disagree"
            assert c in self.clones.get(c[0], []), f"clone {c} not registered"
        for u, cs in self.clones.items():
            held = [self.clone_to_ap[c] for c in cs if c in self.clone_to_ap]
            assert len(held) == len(set(held)), f"player {u} clones share an AP"
            assert len(cs) <= max(1, len(self.aps)), f"player {u} has too many clones"


def clone_key(profile: PreferenceProfile, ap: int, clone: Clone, originals_first: bool = True):
    """Sort key of a clone at an AP (smaller is preferred).

    Clones of one player share the player's utility rank. With
    ``originals_first`` an AP prefers any player's first clone over extra
    clones, so multi-connectivity only uses APs nobody else needs.
    """
    return (originals_first and clone[1] > 0, profile.ap_rank(ap, clone[0]))


def deferred_acceptance(
    profile: PreferenceProfile,
    threshold: float | None,
    sinr_fn=None,
    *,
    max_clones: int | None = None,
    record_trace: bool = False,
    originals_first: bool = True,
) -> Matching:
    """Player-proposing deferred acceptance with SINR-driven splitting.

    ``sinr_fn(player, matching)`` returns the player's SINR under the
    tentative matching; splitting is disabled when ``threshold`` or
    ``sinr_fn`` is None. Unmatched extra clones are dropped from the result.
    A clone may displace a sibling only when ``clone_key`` ranks it higher.
    """
    aps = profile.aps
    players = profile.players
    limit = len(aps) if max_clones is None else max_clones
    m = Matching(aps=aps, clones={u: [(u, 0)] for u in players}, threshold=threshold or 0.0)
    next_idx: dict[Clone, int] = {}
    pool: deque[Clone] = deque()
    for u in players:
        next_idx[(u, 0)] = 0
        pool.append((u, 0))
    splitting = threshold is not None and sinr_fn is not None

    def propose(c: Clone) -> None:
        u = c[0]
        prefs = profile.player_prefs[u]
        while next_idx[c] < len(prefs):
            a = prefs[next_idx[c]]
            next_idx[c] += 1
            holder = m.ap_to_clone.get(a)
            m.proposals += 1
            if profile.ap_rank(a, u) is None:
                if record_trace:
                    m.trace.append(("reject", c, a))
                continue
            if holder is None:
                m.link(c, a)
            elif clone_key(profile, a, c, originals_first) < clone_key(profile, a, holder, originals_first):
                m.unlink(holder)
                m.link(c, a)
                pool.append(holder)
                if record_trace:
                    m.trace.append(("displace", holder, a))
            else:
                if record_trace:
                    m.trace.append(("reject", c, a))
                continue
            if record_trace:
                m.trace.append(("accept", c, a))
            return

    def maybe_split(u: int) -> bool:
        cs = m.clones[u]
        if len(cs) >= limit or any(c not in m.clone_to_ap for c in cs):
            return False
        if sinr_fn(u, m) >= threshold:
            return False
        clone = (u, max(k for _, k in cs) + 1)
        cs.append(clone)
        next_idx[clone] = 0
        pool.append(clone)
        if record_trace:
            m.trace.append(("split", clone, None))
        return True

    while True:
        while pool:
            c = pool.popleft()
            if c in m.clone_to_ap:
                continue
            propose(c)
            if splitting and c in m.clone_to_ap:
                maybe_split(c[0])
        if not splitting:
            break
        # players matched earlier may have fallen below threshold as others joined
        if not any(maybe_split(u) for u in players if m.aps_of(u)):
            break

    for u in players:
        m.clones[u] = [c for c in m.clones[u] if c[1] == 0 or c in m.clone_to_ap]
    return m


def find_blocking_pairs(
    matching: Matching, profile: PreferenceProfile, originals_first: bool = True
) -> list[tuple[Clone, int]]:
    """Every (clone, AP) pair that would both rather be matched to each other."""
    blocking = []
    for u, clones in matching.clones.items():
        prank = profile._player_rank[u]
        for c in clones:
            cur = matching.clone_to_ap.get(c)
            cur_rank = math.inf if cur is None else prank[cur]
            for a in profile.aps:
                if a == cur:
                    continue
                r = prank.get(a)
                if r is None or r >= cur_rank:
                    continue
                if profile.ap_rank(a, u) is None:
                    continue
                holder = matching.ap_to_clone.get(a)
                if holder is None or clone_key(profile, a, c, originals_first) < clone_key(
                    profile, a, holder, originals_first
                ):
                    blocking.append((c, a))
    return blocking


def dump_trace(matching: Matching, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event, clone, ap in matching.trace:
            fh.write(json.dumps({"event": event, "clone": list(clone), "ap": ap}) + "\n")
