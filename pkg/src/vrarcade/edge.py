"""Fog of edge servers with a shared frame cache and a three-priority render scheduler.

Priority one renders frames that are already due. Priority two renders and
caches frames due within the prediction window. Priority three pre-renders
post-impulse variants of upcoming frames, most popular action first.
"""
from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field

from vrarcade.workload import FrameJob, ImpulseModel, JobStatus

BASE = -1  # cache-key variant tag of the regular (no impulse) render
UNREACHABLE_DELAY = 1.0  # seconds charged for a queued job with zero rate


@dataclass
class FogConfig:
    n_servers: int = 16
    processing_density: float = 250.0  # cycles per bit
    server_capability: float = 1e12  # cycles per second
    cache_size: int = 320  # frames
    window: float = 0.1  # lookahead, seconds
    tau_ep: float = 1e-3  # edge processing constant, seconds

    def __post_init__(self):
        if self.n_servers < 1:
            raise ValueError("need at least one edge server")
        if self.cache_size < 0:
            raise ValueError("cache_size must be non-negative")
        if self.processing_density <= 0 or self.server_capability <= 0:
            raise ValueError("processing density and server capability must be positive")

    @property
    def seconds_per_bit(self) -> float:
        return self.processing_density / self.server_capability


def compute_time(hd_size: float, capability: float, density: float) -> float:
    if capability <= 0 or density <= 0 or hd_size < 0:
        raise ValueError("compute_time needs positive capability and density")
    return density * hd_size / capability


def waiting_time(sizes, rates, cap: float = UNREACHABLE_DELAY) -> float:
    """Expected queueing delay: sum of L_i / r_i over the jobs ahead.

    Rates are in bit/s; a job whose owner has no rate contributes ``cap``.
    """
    total = 0.0
    for size, r in zip(sizes, rates):
        total += size / r if r > 0 else cap
    return total


def computing_delay(
    job: FrameJob, fog: FogConfig, wait: float = 0.0
) -> float:
    """Render delay of a frame: zero when cached or not scheduled."""
    scheduled = 1.0 if job.scheduled else 0.0
    cached = 1.0 if job.cached else 0.0
    ct = compute_time(job.hd_size, fog.server_capability, fog.processing_density)
    return (ct + wait) * scheduled * (1.0 - cached)


@dataclass
class Server:
    id: int
    job: FrameJob | None = None
    variant: int = BASE
    priority: int = 0
    start_slot: int = 0
    finish_slot: int = 0
    end_time: float = 0.0

    @property
    def vacant(self) -> bool:
        return self.job is None


@dataclass
class ComputeFabric:
    config: FogConfig
    slot_duration: float = 1e-3
    servers: list[Server] = field(default_factory=list)
    queue: list[FrameJob] = field(default_factory=list)  # due, unrendered, unassigned
    cache: OrderedDict = field(default_factory=OrderedDict)  # (u, f, variant) -> stale flag
    entry_job: dict = field(default_factory=dict)
    in_flight: dict = field(default_factory=dict)  # (u, f, variant) -> Server
    cursor: list[int] = field(default_factory=list)
    log: list[dict] = field(default_factory=list)
    evictions: int = 0
    keep_log: bool = True

    def __post_init__(self):
        if not self.servers:
            self.servers = [Server(i) for i in range(self.config.n_servers)]

    @property
    def window_slots(self) -> int:
        return int(round(self.config.window / self.slot_duration))

    def vacant_servers(self) -> list[Server]:
        return [s for s in self.servers if s.job is None]

    def n_computing(self) -> int:
        return sum(1 for s in self.servers if s.job is not None)

    def fresh_entries(self) -> int:
        return sum(1 for stale in self.cache.values() if not stale)

    def reserved(self) -> int:
        return sum(1 for s in self.servers if s.job is not None and s.priority > 1)

    def cache_room(self) -> bool:
        return self.fresh_entries() + self.reserved() < self.config.cache_size

    def enqueue(self, job: FrameJob) -> None:
        if job in self.queue:
            return
        key = (job.due_slot, job.player, job.frame)
        i = len(self.queue)
        while i > 0 and (self.queue[i - 1].due_slot, self.queue[i - 1].player, self.queue[i - 1].frame) > key:
            i -= 1
        self.queue.insert(i, job)

    def queue_ahead(self, job: FrameJob) -> list[FrameJob]:
        """Jobs that would be served before ``job`` if it joined the queue now."""
        key = (job.due_slot, job.player, job.frame)
        return [q for q in self.queue if (q.due_slot, q.player, q.frame) < key and q is not job]

    # -- cache -------------------------------------------------------------

    def drop_entries(self, job: FrameJob) -> None:
        """Remove every cache entry of a frame (consumed or finalised)."""
        for key in [k for k in self.cache if k[0] == job.player and k[1] == job.frame]:
            del self.cache[key]
            self.entry_job.pop(key, None)

    def mark_stale(self, job: FrameJob) -> None:
        for key in self.cache:
            if key[0] == job.player and key[1] == job.frame:
                self.cache[key] = True

    def abort(self, job: FrameJob, variant: int | None = None) -> None:
        """Abort in-flight renders of ``job`` (one variant or all)."""
        for key in [k for k in self.in_flight if k[0] == job.player and k[1] == job.frame]:
            if variant is not None and key[2] != variant:
                continue
            server = self.in_flight.pop(key)
            server.job = None

    def impulse(self, action: int, model: ImpulseModel, jobs) -> list[FrameJob]:
        """Apply an impulse to ``jobs`` and keep cache, queue and servers consistent."""
        from vrarcade.workload import apply_impulse

        jobs = [
            j
            for j in jobs
            if model.impact[j.player, action]
            and not j.delivered
            and j.status is not JobStatus.DELIVERING
        ]
        invalidated = apply_impulse(action, model, jobs)
        for job in jobs:
            self.mark_stale(job)
            self.abort(job)
            if job.cached:  # revived from its pre-rendered variant
                old = (job.player, job.frame, action)
                self.cache.pop(old, None)
                self.entry_job.pop(old, None)
                base = (job.player, job.frame, BASE)
                self.cache[base] = False
                self.entry_job[base] = job
                if job in self.queue:
                    self.queue.remove(job)
            elif job.request_slot is not None and job.admitted and job.status is JobStatus.PENDING:
                self.enqueue(job)
        return invalidated


def cache_insert(fabric: ComputeFabric, job: FrameJob, variant: int = BASE):
    """Store a finished render; returns the evicted key, or None.

    Stale entries are evicted first, then the oldest insertion. With zero
    capacity nothing is stored.
    """
    capacity = fabric.config.cache_size
    if capacity == 0:
        return None
    key = (job.player, job.frame, variant)
    evicted = None
    if key not in fabric.cache and len(fabric.cache) >= capacity:
        victim = next((k for k, stale in fabric.cache.items() if stale), None)
        if victim is None:
            victim = next(iter(fabric.cache))
            owner = fabric.entry_job.get(victim)
            if owner is not None:
                if victim[2] == BASE:
                    owner.cached = False
                    owner.scheduled = False
                    if owner.status is JobStatus.CACHED:
                        owner.status = JobStatus.PENDING
                else:
                    owner.variants.discard(victim[2])
        del fabric.cache[victim]
        fabric.entry_job.pop(victim, None)
        fabric.evictions += 1
        evicted = victim
    fabric.cache[key] = False
    fabric.cache.move_to_end(key)
    fabric.entry_job[key] = job
    return evicted


def _assign(fabric: ComputeFabric, server: Server, job: FrameJob, variant: int, priority: int, t: int):
    ct = compute_time(job.hd_size, fabric.config.server_capability, fabric.config.processing_density)
    dur = max(1, math.ceil(ct / fabric.slot_duration - 1e-9))
    server.job = job
    server.variant = variant
    server.priority = priority
    server.start_slot = t
    server.finish_slot = t + dur
    server.end_time = t * fabric.slot_duration + ct
    fabric.in_flight[(job.player, job.frame, variant)] = server
    if variant == BASE:
        job.status = JobStatus.COMPUTING
        job.scheduled = True
        job.compute_start = t
    if fabric.keep_log:
        fabric.log.append(
            {
                "slot": t,
                "priority": priority,
                "server": server.id,
                "player": job.player,
                "frame": job.frame,
                "variant": variant,
                "cache_action": "none" if priority == 1 else "cache",
                "p1_backlog": len(fabric.queue),
            }
        )


def _upcoming(fabric: ComputeFabric, jobs, u: int, t: int, horizon: int):
    row = jobs[u]
    c = fabric.cursor[u]
    while c < len(row) and row[c].due_slot <= t:
        c += 1
    fabric.cursor[u] = c
    while c < len(row) and row[c].due_slot <= horizon:
        yield row[c]
        c += 1


def schedule_computing(
    fabric: ComputeFabric,
    jobs,
    impulses: ImpulseModel | None,
    t: int,
    *,
    proactive: bool = True,
) -> list[tuple[int, FrameJob, int, int]]:
    """Fill vacant servers for slot ``t``.

    ``jobs`` holds each player's frames in due order. Returns (server id,
    job, variant, priority) tuples for the assignments made.
    """
    if not fabric.cursor:
        fabric.cursor = [0] * len(jobs)
    made = []
    vacant = fabric.vacant_servers()
    vacant.reverse()

    # priority one: frames due now and not rendered
    while vacant and fabric.queue:
        job = fabric.queue.pop(0)
        server = vacant.pop()
        _assign(fabric, server, job, BASE, 1, t)
        made.append((server.id, job, BASE, 1))
    if not proactive or not vacant or not fabric.cache_room():
        return made

    horizon = t + fabric.window_slots
    # priority two: frames due inside the prediction window
    window = []
    for u in range(len(jobs)):
        for job in _upcoming(fabric, jobs, u, t, horizon):
            if job.status is JobStatus.PENDING and (job.player, job.frame, BASE) not in fabric.in_flight:
                window.append(job)
    window.sort(key=lambda j: (j.due_slot, j.player))
    for job in window:
        if not vacant or not fabric.cache_room():
            return made
        server = vacant.pop()
        _assign(fabric, server, job, BASE, 2, t)
        made.append((server.id, job, BASE, 2))

    if impulses is None or not vacant:
        return made
    # priority three: post-impulse variants, most popular action first
    for action in range(impulses.n_actions):
        for u in impulses.impacted(action):
            for job in _upcoming(fabric, jobs, int(u), t, horizon):
                if job.delivered or action in job.variants:
                    continue
                if (job.player, job.frame, action) in fabric.in_flight:
                    continue
                if not vacant or not fabric.cache_room():
                    return made
                server = vacant.pop()
                _assign(fabric, server, job, action, 3, t)
                made.append((server.id, job, action, 3))
    return made


def dump_log(fabric: ComputeFabric, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in fabric.log:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
