"""60 GHz link budget: pathloss, Nakagami fading, sectored antennas, SINR and rate."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from vrarcade.scenario import LinkVisibility, Visibility

BOLTZMANN = 1.380649e-23
SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(x: float) -> float:
    return 10.0 ** (x / 10.0)


def dbm_to_watts(x: float) -> float:
    return 10.0 ** ((x - 30.0) / 10.0)


@dataclass
class ChannelParams:
    alpha_los: float = 2.0
    alpha_nlos: float = 3.3
    m_los: float = 3.0
    m_nlos: float = 2.0
    carrier_hz: float = 60e9
    sidelobe_gain: float = 0.05
    bandwidth: float = 2.16e9
    noise_figure_db: float = 9.0
    temperature: float = 290.0
    tx_power_dbm: float = 10.0
    sector_beamwidth_deg: float = 90.0
    beam_beamwidth_deg: float = 30.0
    pilot_time: float = 10e-6
    slot_duration: float = 1e-3
    ref_pathloss: float | None = field(default=None)  # linear gain at 1 m; free space if None

    def __post_init__(self):
        if self.alpha_los > self.alpha_nlos:
            raise ValueError("alpha_los must not exceed alpha_nlos")
        if not self.m_los >= self.m_nlos >= 0.5:
            raise ValueError("need m_los >= m_nlos >= 0.5")
        if not 0 < self.sidelobe_gain < 1:
            raise ValueError("sidelobe_gain must be in (0, 1)")
        if self.bandwidth <= 0 or self.slot_duration <= 0:
            raise ValueError("bandwidth and slot_duration must be positive")
        if not 0 < self.beam_beamwidth_deg <= self.sector_beamwidth_deg <= 360:
            raise ValueError("need 0 < beam beamwidth <= sector beamwidth <= 360 deg")

    @property
    def ref_gain(self) -> float:
        if self.ref_pathloss is not None:
            return self.ref_pathloss
        lam = SPEED_OF_LIGHT / self.carrier_hz
        return (lam / (4 * math.pi)) ** 2

    @property
    def noise_density(self) -> float:
        """N_0 in W/Hz (thermal plus noise figure)."""
        return BOLTZMANN * self.temperature * db_to_linear(self.noise_figure_db)

    @property
    def noise_power(self) -> float:
        return self.noise_density * self.bandwidth

    @property
    def tx_power(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    @property
    def beamwidth(self) -> float:
        return math.radians(self.beam_beamwidth_deg)

    @property
    def sector_beamwidth(self) -> float:
        return math.radians(self.sector_beamwidth_deg)

    @property
    def main_gain(self) -> float:
        return antenna_gain(self.beamwidth, 0.0, self.sidelobe_gain)


@dataclass
class LinkState:
    ap: int
    player: int
    visibility: LinkVisibility
    pathloss: float
    fading: float
    tx_gain: float
    rx_gain: float

    def __post_init__(self):
        if min(self.pathloss, self.fading, self.tx_gain, self.rx_gain) <= 0:
            raise ValueError("link gains must be strictly positive")

    @property
    def composite_gain(self) -> float:
        return self.pathloss * self.fading * self.tx_gain * self.rx_gain


def pathloss(distance: float, visibility: LinkVisibility | bool, params: ChannelParams) -> float:
    if distance <= 0:
        raise ValueError("distance must be positive")
    los = visibility.is_los if isinstance(visibility, LinkVisibility) else bool(visibility)
    alpha = params.alpha_los if los else params.alpha_nlos
    return params.ref_gain * distance ** (-alpha)


def pathloss_matrix(distance: np.ndarray, nlos: np.ndarray, params: ChannelParams) -> np.ndarray:
    alpha = np.where(nlos, params.alpha_nlos, params.alpha_los)
    return params.ref_gain * np.power(distance, -alpha)


def sample_fading(
    visibility: LinkVisibility | bool, params: ChannelParams, rng: np.random.Generator, size=None
):
    """Nakagami-m power gain: Gamma(m, 1/m), unit mean, fresh per call."""
    los = visibility.is_los if isinstance(visibility, LinkVisibility) else bool(visibility)
    m = params.m_los if los else params.m_nlos
    return rng.gamma(m, 1.0 / m, size=size)


def fading_matrix(nlos: np.ndarray, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    m = np.where(nlos, params.m_nlos, params.m_los)
    return rng.standard_gamma(m) / m


def antenna_gain(beamwidth: float, deviation: float, g_sl: float) -> float:
    """2D sectored pattern: flat main lobe of width ``beamwidth``, constant sidelobe."""
    if abs(deviation) <= beamwidth / 2:
        return (2 * math.pi - (2 * math.pi - beamwidth) * g_sl) / beamwidth
    return g_sl


def alignment_delay(sector_beamwidth: float, beamwidth: float, pilot_time: float) -> float:
    """Beam-training time for one AP-player pair."""
    return sector_beamwidth / beamwidth * pilot_time


def alignment_overhead(
    associations,
    params: ChannelParams,
    scheduling_interval: float,
    beamwidths: dict | None = None,
) -> float:
    """Fraction of the scheduling interval spent on beam training.

    ``associations`` is an iterable of (ap, player) pairs; ``beamwidths``
    optionally maps ap -> (sector, beam) in radians.
    """
    total = 0.0
    for ap, _player in associations:
        if beamwidths and ap in beamwidths:
            sector, beam = beamwidths[ap]
        else:
            sector, beam = params.sector_beamwidth, params.beamwidth
        if sector < beam:
            raise ValueError(f"AP {ap}: sector beamwidth below beam beamwidth")
        total += alignment_delay(sector, beam, params.pilot_time)
    overhead = total / scheduling_interval
    if overhead >= 1.0:
        raise ValueError(
            f"beam alignment ({total:.3g} s) consumes the whole scheduling interval"
        )
    return overhead


def sinr(player: int, matching, links: dict, params: ChannelParams, tx_power=None) -> float:
    """SINR of ``player`` with joint transmission from all APs serving its clones.

    ``links`` maps (ap, player) -> LinkState for every AP. Idle APs and APs
    serving a sibling clone contribute no interference.
    """
    if tx_power is None:
        tx_power = params.tx_power
    power = (lambda a: tx_power[a]) if isinstance(tx_power, dict) else (lambda a: tx_power)
    serving = set(matching.aps_of(player))
    signal = 0.0
    interference = 0.0
    for (ap, u), link in links.items():
        if u != player:
            continue
        received = power(ap) * link.composite_gain
        if ap in serving:
            signal += received
        elif matching.is_active(ap):
            interference += received
    return signal / (interference + params.noise_power)


def rate(sinr_value, overhead: float, bandwidth: float):
    """Achievable rate in bit/s after the alignment overhead."""
    if not 0 <= overhead < 1:
        raise ValueError("alignment overhead must lie in [0, 1)")
    return (1.0 - overhead) * bandwidth * np.log2(1.0 + np.asarray(sinr_value))
