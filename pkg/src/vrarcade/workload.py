"""HD frame catalogues, Zipf impulse arrivals, and impulse-driven invalidation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class JobStatus(str, Enum):
    PENDING = "pending"
    COMPUTING = "computing"
    COMPUTED = "computed"
    CACHED = "cached"
    DELIVERING = "delivering"
    DELIVERED_HD = "delivered_hd"
    DELIVERED_LQ = "delivered_lq"


TERMINAL = (JobStatus.DELIVERED_HD, JobStatus.DELIVERED_LQ)
INVALIDATABLE = (JobStatus.COMPUTING, JobStatus.COMPUTED, JobStatus.CACHED)


@dataclass
class FrameCatalog:
    hd_size: np.ndarray  # (players, frames) bits
    lq_size: np.ndarray  # (players, frames) bits
    due_slot: np.ndarray  # (players, frames) int

    def __post_init__(self):
        if np.any(self.lq_size > self.hd_size / 100 * (1 + 1e-12)):
            raise ValueError("LQ frames must be at most 1% of the HD size")
        if self.due_slot.shape[1] > 1 and np.any(np.diff(self.due_slot, axis=1) <= 0):
            raise ValueError("due slots must strictly increase per player")

    @property
    def n_players(self) -> int:
        return self.hd_size.shape[0]

    @property
    def n_frames(self) -> int:
        return self.hd_size.shape[1]


def build_catalog(
    n_players: int,
    n_frames: int,
    mean_hd_size: float,
    rng: np.random.Generator,
    *,
    cadence_slots: int = 100,
    lq_fraction: float = 0.01,
    stagger: bool = True,
) -> FrameCatalog:
    """Exponential HD sizes with one frame per ``cadence_slots`` per player.

    With ``stagger`` each player gets a random phase inside the cadence so
    requests from different players do not coincide.
    """
    if n_players < 1 or n_frames < 1:
        raise ValueError("need at least one player and one frame")
    if not 0 < lq_fraction <= 0.01:
        raise ValueError("lq_fraction must lie in (0, 0.01]")
    hd = rng.exponential(mean_hd_size, size=(n_players, n_frames))
    phase = rng.integers(0, cadence_slots, size=n_players) if stagger else np.zeros(n_players, dtype=int)
    due = phase[:, None] + cadence_slots * np.arange(n_frames)[None, :]
    # min() keeps hd*0.01 from rounding one ulp above hd/100
    lq = np.minimum(hd * lq_fraction, hd / 100)
    return FrameCatalog(hd_size=hd, lq_size=lq, due_slot=due.astype(np.int64))


def zipf_probabilities(n: int, exponent: float) -> np.ndarray:
    if exponent < 0:
        raise ValueError("zipf exponent must be non-negative")
    w = 1.0 / np.arange(1, n + 1, dtype=float) ** exponent
    return w / w.sum()


@dataclass
class ImpulseModel:
    """Impulse actions ranked by popularity (action 0 is the most popular)."""

    n_actions: int
    zipf: float
    impact: np.ndarray  # (players, n_actions) bool impact matrix
    rate: float  # aggregate events per second
    probs: np.ndarray = field(init=False, repr=False)
    _cdf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.impact = np.asarray(self.impact, dtype=bool)
        if self.impact.shape[1] != self.n_actions:
            raise ValueError("impact matrix must have one column per action")
        if self.impact.shape[0] and not self.impact.any(axis=0).all():
            raise ValueError("every action must impact at least one player")
        self.probs = zipf_probabilities(self.n_actions, self.zipf)
        self._cdf = np.cumsum(self.probs)
        self._cdf[-1] = 1.0

    def impacted(self, action: int) -> np.ndarray:
        return np.flatnonzero(self.impact[:, action])


def make_impulse_model(
    n_players: int,
    n_actions: int,
    zipf: float,
    rate: float,
    rng: np.random.Generator,
    impact_prob: float = 0.2,
) -> ImpulseModel:
    """Uniform random impact matrix; all-zero columns are redrawn."""
    impact = rng.random((n_players, n_actions)) < impact_prob
    if n_players:
        empty = ~impact.any(axis=0)
        while empty.any():
            impact[:, empty] = rng.random((n_players, int(empty.sum()))) < impact_prob
            empty = ~impact.any(axis=0)
    return ImpulseModel(n_actions=n_actions, zipf=zipf, impact=impact, rate=rate)


def sample_impulses(
    model: ImpulseModel, slot: int, rng: np.random.Generator, slot_duration: float = 1e-3
) -> list[int]:
    """Poisson arrivals in one slot, each labelled by a Zipf-distributed action."""
    if model.rate <= 0:
        return []
    k = rng.poisson(model.rate * slot_duration)
    if k == 0:
        return []
    return np.searchsorted(model._cdf, rng.random(k), side="right").tolist()


def draw_actions(model: ImpulseModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent action ids from the popularity law."""
    return np.searchsorted(model._cdf, rng.random(n), side="right")


@dataclass(eq=False)
class FrameJob:
    player: int
    frame: int
    hd_size: float
    lq_size: float
    due_slot: int
    status: JobStatus = JobStatus.PENDING
    scheduled: bool = False
    cached: bool = False
    stale: bool = False
    variants: set = field(default_factory=set)  # pre-rendered post-impulse versions
    request_slot: int | None = None
    compute_start: int | None = None
    compute_end: int | None = None
    ready_slot: int | None = None
    delivery_end: int | None = None
    admitted: bool | None = None
    hit_cache: bool = False
    remaining_bits: float = 0.0
    compute_delay: float = 0.0

    @property
    def delivered(self) -> bool:
        return self.status in TERMINAL

    @property
    def key(self) -> tuple[int, int]:
        return (self.player, self.frame)


def jobs_from_catalog(catalog: FrameCatalog) -> list[list[FrameJob]]:
    return [
        [
            FrameJob(
                player=u,
                frame=f,
                hd_size=float(catalog.hd_size[u, f]),
                lq_size=float(catalog.lq_size[u, f]),
                due_slot=int(catalog.due_slot[u, f]),
            )
            for f in range(catalog.n_frames)
        ]
        for u in range(catalog.n_players)
    ]


def apply_impulse(action: int, model: ImpulseModel, jobs) -> list[FrameJob]:
    """Invalidate undelivered renders of every player the action impacts.

    ``jobs`` is an iterable of FrameJob. A job whose post-impulse variant for
    this very action was pre-rendered is revived from that variant instead
    of being invalidated. All other variants are dropped since they predate
    the action. Returns the jobs whose render was invalidated.
    """
    if not 0 <= action < model.n_actions:
        raise ValueError(f"unknown action {action}")
    hit = model.impact[:, action]
    invalidated = []
    for job in jobs:
        if not hit[job.player] or job.delivered or job.status is JobStatus.DELIVERING:
            continue
        if action in job.variants:
            job.variants.clear()
            job.status = JobStatus.CACHED
            job.cached = True
            job.scheduled = True
            job.stale = False
            continue
        job.variants.clear()
        if job.status in INVALIDATABLE:
            job.status = JobStatus.PENDING
            job.cached = False
            job.scheduled = False
            job.stale = True
            invalidated.append(job)
    return invalidated


def write_trace(path, catalog: FrameCatalog, events) -> None:
    """Replayable trace: a header record, then one (slot, action) per event."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            json.dumps(
                {
                    "kind": "catalog",
                    "hd_size": catalog.hd_size.tolist(),
                    "lq_size": catalog.lq_size.tolist(),
                    "due_slot": catalog.due_slot.tolist(),
                }
            )
            + "\n"
        )
        for slot, action in events:
            fh.write(json.dumps({"slot": int(slot), "action": int(action)}) + "\n")


def read_trace(path) -> tuple[FrameCatalog, list[tuple[int, int]]]:
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        catalog = FrameCatalog(
            np.array(header["hd_size"], dtype=float),
            np.array(header["lq_size"], dtype=float),
            np.array(header["due_slot"], dtype=np.int64),
        )
        events = [(r["slot"], r["action"]) for r in map(json.loads, fh) if r]
    return catalog, events
