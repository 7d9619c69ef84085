"""Arcade geometry, player motion inside pods, and LOS/NLOS blockage."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from vrarcade import kernels


class Visibility(Enum):
    LOS = "los"
    NLOS = "nlos"


@dataclass(frozen=True)
class LinkVisibility:
    state: Visibility
    blocker: int | None = None

    @property
    def is_los(self) -> bool:
        return self.state is Visibility.LOS


@dataclass
class PlayerState:
    id: int
    pod: int
    position: np.ndarray  # (x, y, z) meters
    yaw: float
    pod_lo: np.ndarray  # pod cell lower corner (x, y)
    pod_hi: np.ndarray
    history: deque = field(default_factory=lambda: deque(maxlen=100))

    def copy(self) -> "PlayerState":
        return PlayerState(
            self.id,
            self.pod,
            self.position.copy(),
            self.yaw,
            self.pod_lo,
            self.pod_hi,
            deque(self.history, maxlen=self.history.maxlen),
        )


@dataclass
class MmApState:
    id: int
    position: np.ndarray  # ceiling mounted (x, y, z)
    tx_power: float  # watts
    sector_beamwidth: float  # radians
    beam_beamwidth: float  # radians
    boresight: float = 0.0

    def __post_init__(self):
        if self.tx_power <= 0:
            raise ValueError("tx_power must be positive")
        if not 0 < self.beam_beamwidth <= self.sector_beamwidth <= 2 * math.pi:
            raise ValueError("need 0 < beam beamwidth <= sector beamwidth <= 2*pi")


@dataclass
class ArcadeScenario:
    length: float
    width: float
    height: float
    rows: int
    cols: int
    pod_side: float
    players: list[PlayerState]
    mmaps: list[MmApState]
    blocker_diameter: float
    head_height: float

    @property
    def n_pods(self) -> int:
        return self.rows * self.cols

    def player_xy(self) -> np.ndarray:
        if not self.players:
            return np.zeros((0, 2))
        return np.array([p.position[:2] for p in self.players])

    def ap_xy(self) -> np.ndarray:
        return np.array([a.position[:2] for a in self.mmaps])

    def ap_xyz(self) -> np.ndarray:
        return np.array([a.position for a in self.mmaps])

    def pod_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([p.pod_lo for p in self.players]).reshape(-1, 2)
        hi = np.array([p.pod_hi for p in self.players]).reshape(-1, 2)
        return lo, hi


def ceiling_grid(n: int) -> tuple[int, int]:
    """Most nearly square (rows, cols) factorisation of ``n``."""
    r = int(math.isqrt(n))
    while n % r:
        r -= 1
    return r, n // r


def generate_arcade(
    rows: int,
    cols: int,
    pod_side: float,
    height: float,
    n_players: int,
    n_mmaps: int,
    seed: int,
    *,
    head_height: float = 1.6,
    blocker_diameter: float = 0.4,
    tx_power: float = 0.01,
    sector_beamwidth: float = math.radians(90),
    beam_beamwidth: float = math.radians(30),
) -> ArcadeScenario:
    if rows <= 0 or cols <= 0:
        raise ValueError("rows and cols must be positive")
    if pod_side <= 0 or height <= 0:
        raise ValueError("pod_side and height must be positive")
    if not 0 < head_height < height:
        raise ValueError("head height must lie strictly between floor and ceiling")
    if n_players < 0:
        raise ValueError("n_players must be non-negative")
    if n_players > rows * cols:
        raise ValueError(f"{n_players} players do not fit in {rows}x{cols} pods")
    if n_mmaps < 1:
        raise ValueError("need at least one mmAP")

    rng = np.random.default_rng(seed)
    length, width = cols * pod_side, rows * pod_side
    pods = np.sort(rng.choice(rows * cols, size=n_players, replace=False))
    players = []
    for pid, pod in enumerate(pods):
        r, c = divmod(int(pod), cols)
        lo = np.array([c * pod_side, r * pod_side])
        hi = lo + pod_side
        xy = rng.uniform(lo, hi)
        players.append(
            PlayerState(
                id=pid,
                pod=int(pod),
                position=np.array([xy[0], xy[1], head_height]),
                yaw=float(rng.uniform(-math.pi, math.pi)),
                pod_lo=lo,
                pod_hi=hi,
            )
        )

    gr, gc = ceiling_grid(n_mmaps)
    if length >= width and gc < gr:
        gr, gc = gc, gr
    mmaps = []
    for k in range(n_mmaps):
        r, c = divmod(k, gc)
        pos = np.array([(c + 0.5) * length / gc, (r + 0.5) * width / gr, height])
        mmaps.append(
            MmApState(
                id=k,
                position=pos,
                tx_power=tx_power,
                sector_beamwidth=sector_beamwidth,
                beam_beamwidth=beam_beamwidth,
            )
        )
    return ArcadeScenario(
        length=length,
        width=width,
        height=height,
        rows=rows,
        cols=cols,
        pod_side=pod_side,
        players=players,
        mmaps=mmaps,
        blocker_diameter=blocker_diameter,
        head_height=head_height,
    )


def reflect_into(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Reflect coordinates at the box walls, then clip for round-off."""
    x = np.where(x < lo, 2 * lo - x, x)
    x = np.where(x > hi, 2 * hi - x, x)
    return np.clip(x, lo, hi)


def walk(xy, yaw, lo, hi, rng, max_step: float, max_turn: float):
    """One reflected random-walk step for an array of players."""
    xy = np.asarray(xy, dtype=np.float64)
    n = xy.shape[0]
    if max_step > 0:
        xy = reflect_into(xy + rng.uniform(-max_step, max_step, size=(n, 2)), lo, hi)
    if max_turn > 0:
        yaw = kernels.wrap_angle(yaw + rng.uniform(-max_turn, max_turn, size=n))
    return xy, yaw


def step_pose(
    player: PlayerState,
    rng: np.random.Generator,
    slot_duration: float,
    *,
    max_speed: float = 1.0,
    max_turn_rate: float = math.pi / 2,
) -> PlayerState:
    new = player.copy()
    xy, yaw = walk(
        player.position[None, :2],
        np.array([player.yaw]),
        player.pod_lo,
        player.pod_hi,
        rng,
        max_speed * slot_duration,
        max_turn_rate * slot_duration,
    )
    new.history.append((player.position.copy(), player.yaw))
    new.position[:2] = xy[0]
    new.yaw = float(np.asarray(yaw).reshape(-1)[0])
    return new


def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, dtype=float)[:2] for v in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    s = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.linalg.norm(p - (a + s * ab)))


def los_status(
    ap: MmApState, target: PlayerState, others: list[PlayerState], d: float
) -> LinkVisibility:
    """Blockage of the AP-to-player ray by other players' head discs.

    Evaluated in the floor projection; a blocker counts when its disc of
    diameter ``d`` touches the segment.
    """
    for other in others:
        if other.id == target.id:
            raise ValueError("target must not be among the blockers")
        if point_segment_distance(other.position, ap.position, target.position) <= d / 2:
            return LinkVisibility(Visibility.NLOS, other.id)
    return LinkVisibility(Visibility.LOS)


def visibility_matrix(ap_xy: np.ndarray, player_xy: np.ndarray, d: float) -> np.ndarray:
    """Boolean (aps, players) matrix, True where the link is NLOS."""
    return kernels.nlos_matrix(ap_xy, player_xy, 0.5 * d).astype(bool)
