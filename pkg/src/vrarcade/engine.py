"""Slotted simulation of the VR arcade under the proposed scheme and two baselines."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from vrarcade import kernels
from vrarcade.channel import (
    ChannelParams,
    alignment_overhead,
    db_to_linear,
    fading_matrix,
    pathloss_matrix,
    rate,
)
from vrarcade.edge import BASE, ComputeFabric, FogConfig, cache_insert, schedule_computing
from vrarcade.matching import (
    NEG_INF,
    Matching,
    build_preferences,
    deferred_acceptance,
    utility,
)
from vrarcade.scenario import generate_arcade, walk
from vrarcade.workload import (
    FrameJob,
    JobStatus,
    build_catalog,
    jobs_from_catalog,
    make_impulse_model,
    sample_impulses,
)

log = logging.getLogger(__name__)

SCHEMES = ("proposed", "baseline1", "baseline2")


class InvariantViolation(RuntimeError):
    pass


DEADLINE_EXCEEDED = -1


@dataclass
class ScenarioConfig:
    rows: int = 8
    cols: int = 8
    pod_side: float = 2.0
    height: float = 3.0
    head_height: float = 1.6
    n_players: int = 64
    n_mmaps: int = 16
    blocker_diameter: float = 0.4
    max_speed: float = 1.0  # m/s
    max_turn_rate: float = 90.0  # deg/s


@dataclass
class WorkloadConfig:
    n_actions: int = 100
    zipf: float = 0.8
    impulse_rate: float = 10.0  # events/s over all actions
    impact_prob: float = 0.2
    mean_hd_bits: float = 1.2e7
    lq_fraction: float = 0.01
    frame_interval: float = 0.1  # s between frames of one player
    stagger: bool = True


@dataclass
class MatchingConfig:
    sinr_threshold_db: float = 10.0
    max_clones: int | None = 4


@dataclass
class RunConfig:
    scheme: str = "proposed"
    d_th: float = 0.1
    eps: float = 0.1
    slot_duration: float = 1e-3
    epoch_duration: float = 0.1
    total_slots: int = 10_000
    seed: int = 0
    cache_per_ap: float | None = 20.0  # overrides fog.cache_size when set
    servers_per_ap: float | None = None  # overrides fog.n_servers when set
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    channel: ChannelParams = field(default_factory=ChannelParams)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    fog: FogConfig = field(default_factory=FogConfig)
    matching: MatchingConfig = field(default_factory=MatchingConfig)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme: expected one of {SCHEMES}, got {self.scheme!r}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps: must lie in (0, 1), got {self.eps}")
        if self.slot_duration <= 0:
            raise ValueError(f"slot_duration: must be positive, got {self.slot_duration}")
        if self.d_th <= 0:
            raise ValueError(f"d_th: must be positive, got {self.d_th}")
        if self.epoch_duration < self.slot_duration:
            raise ValueError("epoch_duration: must be at least one slot")
        if self.total_slots < 0:
            raise ValueError("total_slots: must be non-negative")

    def resolved_fog(self) -> FogConfig:
        fog = self.fog
        n_aps = self.scenario.n_mmaps
        if self.cache_per_ap is not None:
            fog = replace(fog, cache_size=int(round(self.cache_per_ap * n_aps)))
        if self.servers_per_ap is not None:
            fog = replace(fog, n_servers=max(1, int(round(self.servers_per_ap * n_aps))))
        return fog


@dataclass
class DeliveryRecord:
    player: int
    frame: int
    is_hd: int
    d_cp: float
    d_cm: float
    d_total: float
    slots: int
    scheme: str
    admitted: bool
    hit_cache: bool
    computed: bool = False  # a render (or cache hit) completed after the request


@dataclass
class MetricsReport:
    scheme: str
    mean_cm: float
    p90_cm: float
    mean_cp: float
    mean_e2e: float
    hd_ratio: float
    n_frames: int
    n_hd: int
    admitted: int
    admitted_misses: int
    comm_samples: list = field(default_factory=list, repr=False)
    compute_samples: list = field(default_factory=list, repr=False)
    e2e_samples: list = field(default_factory=list, repr=False)
    violations: dict = field(default_factory=dict)

    @property
    def miss_rate(self) -> float:
        return self.admitted_misses / self.admitted if self.admitted else 0.0

    def summary(self) -> dict:
        d = asdict(self)
        for k in ("comm_samples", "compute_samples", "e2e_samples"):
            d.pop(k)
        return d


def percentile(samples, p: float) -> float:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample."""
    xs = sorted(samples)
    if not xs:
        raise ValueError("percentile of an empty sample")
    if not 0 <= p <= 100:
        raise ValueError("p must lie in [0, 100]")
    k = max(1, math.ceil(p / 100.0 * len(xs) - 1e-12))
    return float(xs[k - 1])


def comm_delay_slots(size: float, rates, slot_duration: float) -> int:
    """Slots needed to push ``size`` bits at the given per-slot rates.

    Partial slots carry over. Returns DEADLINE_EXCEEDED when the rates run
    out first.
    """
    sent = 0.0
    for d, r in enumerate(rates, start=1):
        sent += slot_duration * r
        if sent >= size * (1 - 1e-12):
            return d
    return DEADLINE_EXCEEDED


def admit(frame_bits, rate_estimate, fog, d_th, eps, queue_sizes=(), queue_rates=(), cached=False) -> bool:
    """Markov-relaxed latency test: admitted when the utility is non-negative."""
    return utility(frame_bits, rate_estimate, fog, d_th, eps, queue_sizes, queue_rates, cached) >= 0


class Simulation:
    """State of one run. ``step`` advances one slot; ``report`` aggregates."""

    def __init__(self, cfg: RunConfig, *, check_invariants: bool = True, strict: bool = True, keep_log: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.check_invariants = check_invariants
        self.strict = strict
        self.t = 0
        sc, ch, wl = cfg.scenario, cfg.channel, cfg.workload
        self.fog = cfg.resolved_fog()
        self.proactive = cfg.scheme != "baseline1"
        self.multiconnect = cfg.scheme == "proposed"
        self.threshold = db_to_linear(cfg.matching.sinr_threshold_db)

        seeds = np.random.SeedSequence(cfg.seed).spawn(6)
        geo_seed = int(seeds[0].generate_state(1)[0])
        self.rng_move = np.random.default_rng(seeds[1])
        self.rng_fade = np.random.default_rng(seeds[2])
        self.rng_impulse = np.random.default_rng(seeds[3])
        rng_catalog = np.random.default_rng(seeds[4])
        rng_impact = np.random.default_rng(seeds[5])

        self.arcade = generate_arcade(
            sc.rows,
            sc.cols,
            sc.pod_side,
            sc.height,
            sc.n_players,
            sc.n_mmaps,
            geo_seed,
            head_height=sc.head_height,
            blocker_diameter=sc.blocker_diameter,
            tx_power=ch.tx_power,
            sector_beamwidth=ch.sector_beamwidth,
            beam_beamwidth=ch.beamwidth,
        )
        self.n_players, self.n_aps = sc.n_players, sc.n_mmaps
        self.ap_xy = self.arcade.ap_xy()
        self.ap_z = sc.height
        self.xy = self.arcade.player_xy()
        self.yaw = np.array([p.yaw for p in self.arcade.players])
        self.pod_lo, self.pod_hi = self.arcade.pod_bounds()
        self.max_step = sc.max_speed * cfg.slot_duration
        self.max_turn = math.radians(sc.max_turn_rate) * cfg.slot_duration

        self.slot = cfg.slot_duration
        self.epoch_slots = max(1, int(round(cfg.epoch_duration / cfg.slot_duration)))
        cadence = max(1, int(round(wl.frame_interval / cfg.slot_duration)))
        n_frames = max(1, -(-cfg.total_slots // cadence) + 1)
        if self.n_players:
            catalog = build_catalog(
                self.n_players, n_frames, wl.mean_hd_bits, rng_catalog,
                cadence_slots=cadence, lq_fraction=wl.lq_fraction, stagger=wl.stagger,
            )
            self.jobs = jobs_from_catalog(catalog)
        else:
            self.jobs = []
        self.impulses = make_impulse_model(self.n_players, wl.n_actions, wl.zipf, wl.impulse_rate, rng_impact, wl.impact_prob)
        self.next_req = [0] * self.n_players
        self.active: list[FrameJob | None] = [None] * self.n_players  # requested, not finalised
        self.window_slots = int(round(self.fog.window / self.slot))

        self.fabric = ComputeFabric(self.fog, slot_duration=self.slot, keep_log=keep_log)
        self.fabric.cursor = [0] * self.n_players

        self.p_tx = ch.tx_power
        self.noise = ch.noise_power
        self.g_main = ch.main_gain
        self.g_sl = ch.sidelobe_gain
        self.bw = ch.beamwidth

        self.served_sum = np.zeros(self.n_players)
        self.served_n = np.zeros(self.n_players)
        self.rate_est = np.zeros(self.n_players)

        self.matching: Matching | None = None
        self.serve = np.zeros((self.n_aps, self.n_players), dtype=bool)
        self.ap_target = np.full(self.n_aps, -1, dtype=np.int64)
        self.overhead = 0.0
        self.dirty = True
        self.records: list[DeliveryRecord] = []
        self.violations = {"cache": 0, "servers": 0, "one_clone_per_ap": 0, "eq4": 0}
        self.n_matchings = 0
        self.split_players = 0
        self._update_geometry()

    # -- geometry and channel ---------------------------------------------

    def _update_geometry(self) -> None:
        if self.n_players == 0:
            self.nlos = np.zeros((self.n_aps, 0), dtype=bool)
            self.pl = np.zeros((self.n_aps, 0))
            self.ap_az = np.zeros((self.n_aps, 0))
            self.user_az = np.zeros((0, self.n_aps))
            self.grx = np.zeros((self.n_aps, 0))
            self.gtx = np.zeros((self.n_aps, 0))
            return
        self.nlos = kernels.nlos_matrix(self.ap_xy, self.xy, 0.5 * self.cfg.scenario.blocker_diameter).astype(bool)
        d2 = ((self.xy[None, :, :] - self.ap_xy[:, None, :]) ** 2).sum(axis=2)
        dist = np.sqrt(d2 + (self.ap_z - self.cfg.scenario.head_height) ** 2)
        self.pl = pathloss_matrix(dist, self.nlos, self.cfg.channel)
        self.ap_az = kernels.azimuths(self.ap_xy, self.xy)
        self.user_az = kernels.azimuths(self.xy, self.ap_xy)
        # HMD beam follows the head; refreshed with the rest of the geometry
        self.grx = kernels.rx_gains(self.user_az, self.yaw, self.bw, self.g_main, self.g_sl)
        self._resteer()

    def _resteer(self) -> None:
        self.gtx = kernels.tx_gains(self.ap_az, self.ap_target, self.bw, self.g_main, self.g_sl)

    # -- workload ---------------------------------------------------------

    def _live_jobs(self, u: int, t: int):
        job = self.active[u]
        if job is not None:
            yield job
        row = self.jobs[u]
        f = self.next_req[u]
        while f < len(row) and row[f].due_slot <= t + self.window_slots:
            yield row[f]
            f += 1

    def _apply_impulses(self, t: int) -> None:
        for action in sample_impulses(self.impulses, t, self.rng_impulse, self.slot):
            affected = []
            for u in self.impulses.impacted(action):
                affected.extend(self._live_jobs(int(u), t))
            for job in self.fabric.impulse(action, self.impulses, affected):
                if self.active[job.player] is job:
                    self.dirty = True

    def _queue_term(self):
        sizes = [j.hd_size for j in self.fabric.queue]
        rates = [self.rate_est[j.player] for j in self.fabric.queue]
        return sizes, rates

    def _request(self, job: FrameJob, t: int) -> None:
        u = job.player
        job.request_slot = t
        job.variants.clear()
        for key in [k for k in self.fabric.in_flight if k[:2] == job.key and k[2] != BASE]:
            self.fabric.abort(job, key[2])
        cached = job.status is JobStatus.CACHED
        r_best = self._best_rate(u)
        sizes, rates = ([], []) if cached else self._queue_term()
        job.admitted = admit(job.hd_size, r_best, self.fog, self.cfg.d_th, self.cfg.eps, sizes, rates, cached)
        if not job.admitted:
            self.fabric.abort(job)
            self.fabric.drop_entries(job)
            if job in self.fabric.queue:
                self.fabric.queue.remove(job)
            self._finalise(job, t, hd=False)
            return
        self.active[u] = job
        job.remaining_bits = job.hd_size
        if cached:
            job.hit_cache = True
            job.status = JobStatus.COMPUTED
            job.ready_slot = t
            job.compute_delay = 0.0
            self.fabric.drop_entries(job)
            self.dirty = True
        elif job.status is JobStatus.PENDING:
            self.fabric.enqueue(job)

    def _requests(self, t: int) -> None:
        for u in range(self.n_players):
            f = self.next_req[u]
            row = self.jobs[u]
            if f < len(row) and row[f].due_slot <= t:
                self.next_req[u] = f + 1
                self._request(row[f], t)

    def _best_rate(self, u: int) -> float:
        cand = kernels.candidate_sinr(
            np.array([u]), self.prx, self.gtx, self.grx, self.serve, self.ap_active(),
            self.g_main, self.noise,
        )[:, 0]
        r = rate(cand, self.overhead, self.cfg.channel.bandwidth)
        rbar = (r + self.served_sum[u]) / (self.served_n[u] + 1)
        self.rate_est[u] = float(rbar.max())
        return self.rate_est[u]

    # -- compute ----------------------------------------------------------

    def _complete_renders(self, t: int) -> None:
        for server in self.fabric.servers:
            job = server.job
            if job is None or server.finish_slot > t:
                continue
            self.fabric.in_flight.pop((job.player, job.frame, server.variant), None)
            server.job = None
            if job.delivered:
                continue
            if server.variant != BASE:
                if job.request_slot is None and self.fog.cache_size:
                    cache_insert(self.fabric, job, server.variant)
                    job.variants.add(server.variant)
                continue
            if job.request_slot is not None:
                job.status = JobStatus.COMPUTED
                job.compute_end = t
                job.ready_slot = t
                job.compute_delay = max(0.0, server.end_time - job.request_slot * self.slot)
                self.dirty = True
            else:
                cache_insert(self.fabric, job, BASE)
                if self.fog.cache_size:
                    job.status = JobStatus.CACHED
                    job.cached = True
                else:
                    job.status = JobStatus.PENDING
                    job.scheduled = False

    # -- association ------------------------------------------------------

    def ap_active(self) -> np.ndarray:
        return self.ap_target >= 0

    def _ready_players(self) -> list[int]:
        return [
            u for u, job in enumerate(self.active)
            if job is not None and job.status in (JobStatus.COMPUTED, JobStatus.DELIVERING)
        ]

    def _rematch(self) -> None:
        ready = self._ready_players()
        self.n_matchings += 1
        if not ready:
            m = Matching(aps=list(range(self.n_aps)), clones={})
        else:
            users = np.array(ready, dtype=np.int64)
            cand = kernels.candidate_sinr(
                users, self.prx, self.gtx, self.grx, self.serve, self.ap_active(),
                self.g_main, self.noise,
            )
            r = rate(cand, self.overhead, self.cfg.channel.bandwidth)
            rbar = (r + self.served_sum[users][None, :]) / (self.served_n[users][None, :] + 1)
            self.rate_est[users] = rbar.max(axis=0)
            budget = self.cfg.d_th * self.cfg.eps
            bits = np.array([self.active[u].remaining_bits for u in ready])
            with np.errstate(divide="ignore"):
                slack = np.where(rbar > 0, budget - bits[None, :] / rbar, NEG_INF)
            gain = self.prx[:, users] * self.grx[:, users]
            profile = build_preferences(gain, slack, players=ready)
            if self.multiconnect:
                m = deferred_acceptance(
                    profile, self.threshold, self._tentative_sinr,
                    max_clones=self.cfg.matching.max_clones,
                )
                self.split_players += sum(1 for u in ready if len(m.aps_of(u)) > 1)
            else:
                m = deferred_acceptance(profile, None)
        self._install(m)

    def _tentative_sinr(self, u: int, m: Matching) -> float:
        serving = m.aps_of(u)
        target = np.full(self.n_aps, -1, dtype=np.int64)
        for a, c in m.ap_to_clone.items():
            target[a] = c[0]
        return kernels.player_sinr(
            u, serving, self.prx, self.ap_az, self.grx, target,
            self.bw, self.g_main, self.g_sl, self.noise,
        )

    def _install(self, m: Matching) -> None:
        self.matching = m
        self.serve[:] = False
        self.ap_target[:] = -1
        for a, c in m.ap_to_clone.items():
            self.serve[a, c[0]] = True
            self.ap_target[a] = c[0]
        self._resteer()
        self.overhead = alignment_overhead(m.pairs(), self.cfg.channel, self.cfg.epoch_duration)
        self.dirty = False

    # -- delivery ---------------------------------------------------------

    def _transmit(self, t: int) -> None:
        if not self.serve.any():
            return
        sinr = kernels.sinr_all(self.prx, self.gtx, self.grx, self.serve, self.ap_active(), self.noise)
        r = rate(sinr, self.overhead, self.cfg.channel.bandwidth)
        for u in np.flatnonzero(self.serve.any(axis=0)):
            u = int(u)
            job = self.active[u]
            if job is None or job.status not in (JobStatus.COMPUTED, JobStatus.DELIVERING):
                continue
            job.status = JobStatus.DELIVERING
            job.remaining_bits -= r[u] * self.slot
            self.served_sum[u] += r[u]
            self.served_n[u] += 1
            if job.remaining_bits <= 1e-9 * job.hd_size:
                job.delivery_end = t
                d_cm = (t + 1 - job.ready_slot) * self.slot
                d_total = job.compute_delay + d_cm + self.fog.tau_ep
                self._finalise(job, t, hd=d_total < self.cfg.d_th, d_cm=d_cm)
                self.dirty = True

    def _deadlines(self, t: int) -> None:
        for u, job in enumerate(self.active):
            if job is None:
                continue
            if (t + 1 - job.request_slot) * self.slot + self.fog.tau_ep >= self.cfg.d_th - 1e-12:
                if self.serve[:, u].any():
                    self.dirty = True
                self.fabric.abort(job)
                if job in self.fabric.queue:
                    self.fabric.queue.remove(job)
                self._finalise(job, t, hd=False)

    def _finalise(self, job: FrameJob, t: int, hd: bool, d_cm: float = 0.0) -> None:
        self.fabric.drop_entries(job)
        if self.active[job.player] is job:
            self.active[job.player] = None
        job.status = JobStatus.DELIVERED_HD if hd else JobStatus.DELIVERED_LQ
        slots = t + 1 - (job.request_slot if job.request_slot is not None else t)
        if hd:
            d_total = job.compute_delay + d_cm + self.fog.tau_ep
            rec = DeliveryRecord(job.player, job.frame, 1, job.compute_delay, d_cm, d_total,
                                 slots, self.cfg.scheme, bool(job.admitted), job.hit_cache, True)
        else:
            rec = DeliveryRecord(job.player, job.frame, 0, job.compute_delay, d_cm, 0.0,
                                 slots, self.cfg.scheme, bool(job.admitted), job.hit_cache,
                                 job.ready_slot is not None)
        self.records.append(rec)

    # -- main loop --------------------------------------------------------

    def step(self) -> None:
        t = self.t
        if self.n_players:
            self.xy, self.yaw = walk(self.xy, self.yaw, self.pod_lo, self.pod_hi,
                                     self.rng_move, self.max_step, self.max_turn)
            if t % self.epoch_slots == 0:
                self._update_geometry()
                self.dirty = True
            fade = fading_matrix(self.nlos, self.cfg.channel, self.rng_fade)
            self.prx = self.p_tx * self.pl * fade
            self._apply_impulses(t)
            self._complete_renders(t)
            self._requests(t)
            schedule_computing(self.fabric, self.jobs, self.impulses if self.proactive else None,
                               t, proactive=self.proactive)
            if self.dirty:
                self._rematch()
            self._transmit(t)
            self._deadlines(t)
            if self.check_invariants:
                self._check(t)
        self.t += 1

    def _check(self, t: int) -> None:
        found = []
        if len(self.fabric.cache) > self.fog.cache_size:
            found.append(("cache", f"{len(self.fabric.cache)} entries > capacity {self.fog.cache_size}"))
        if self.fabric.n_computing() > self.fog.n_servers:
            found.append(("servers", f"{self.fabric.n_computing()} jobs on {self.fog.n_servers} servers"))
        if (self.serve.sum(axis=1) > 1).any():
            found.append(("one_clone_per_ap", "an mmAP transmits to several players"))
        if self.matching is not None and len(set(self.matching.clone_to_ap.values())) != len(self.matching.clone_to_ap):
            found.append(("one_clone_per_ap", "an mmAP holds several clones"))
        for name, msg in found:
            self.violations[name] += 1
        if found and self.strict:
            raise InvariantViolation(f"slot {t}: " + "; ".join(m for _, m in found))

    def run(self) -> "MetricsReport":
        for _ in range(self.cfg.total_slots):
            self.step()
        return self.report()

    def report(self) -> MetricsReport:
        hd = [r for r in self.records if r.is_hd == 1]
        for r in hd:
            if abs(r.d_total - (r.d_cp + r.d_cm + self.fog.tau_ep)) > 0:
                self.violations["eq4"] += 1
        comm = [r.d_cm for r in hd]
        e2e = [r.d_total for r in hd]
        comp = [r.d_cp for r in self.records if r.computed]
        admitted = [r for r in self.records if r.admitted]
        return MetricsReport(
            scheme=self.cfg.scheme,
            mean_cm=float(np.mean(comm)) if comm else float("nan"),
            p90_cm=percentile(comm, 90) if comm else float("nan"),
            mean_cp=float(np.mean(comp)) if comp else float("nan"),
            mean_e2e=float(np.mean(e2e)) if e2e else float("nan"),
            hd_ratio=len(hd) / len(self.records) if self.records else 0.0,
            n_frames=len(self.records),
            n_hd=len(hd),
            admitted=len(admitted),
            admitted_misses=sum(1 for r in admitted if r.is_hd == 0),
            comm_samples=comm,
            compute_samples=comp,
            e2e_samples=e2e,
            violations=dict(self.violations),
        )


def run(config: RunConfig) -> MetricsReport:
    return Simulation(config).run()
