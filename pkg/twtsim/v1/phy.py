"""
Radio abstraction: path loss, SNR to MCS mapping and airtime of (aggregated)
single-user and multiuser PPDUs.

The path-loss model is the log-distance model with a linear attenuation term
used for 5 GHz indoor deployments:

    PL(d) = L0 + 10 * n * log10(d) + a * d

All durations are integer microseconds; OFDM symbol durations are kept in
nanoseconds and sub-microsecond totals round up.
"""

import math
from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np

from .types import ChannelState


MCS_INFEASIBLE = -1
"""Returned by `select_mcs` when the SNR is below every threshold."""

RU_DATA_TONES = {
    26: 24,
    52: 48,
    106: 102,
    242: 234,
    484: 468,
    996: 980,
    1992: 1960,
}
"""Data subcarriers carried by each legal resource-unit size."""

FULL_WIDTH_RU = {20: 242, 40: 484, 80: 996, 160: 1992}
"""Largest resource unit of every channel width, in tones."""

MAX_SPATIAL_STREAMS = 8


class PhyError(ValueError):
    pass


@dataclass
class McsEntry:
    index: int
    """HE-MCS index."""

    min_snr_db: float
    """Lowest SNR at which this MCS may be used."""

    bits_per_tone: float
    """Coded data bits per data subcarrier, per spatial stream and symbol."""


def default_mcs_table() -> List[McsEntry]:
    # Receiver minimum input sensitivity for 20 MHz (-82 ... -52 dBm)
    # expressed as SNR over a -95 dBm noise floor.
    return [
        McsEntry(0, 13.0, 0.5),
        McsEntry(1, 16.0, 1.0),
        McsEntry(2, 18.0, 1.5),
        McsEntry(3, 21.0, 2.0),
        McsEntry(4, 25.0, 3.0),
        McsEntry(5, 29.0, 4.0),
        McsEntry(6, 30.0, 4.5),
        McsEntry(7, 31.0, 5.0),
        McsEntry(8, 36.0, 6.0),
        McsEntry(9, 38.0, 20 / 3),
        McsEntry(10, 41.0, 7.5),
        McsEntry(11, 43.0, 25 / 3),
    ]


@dataclass
class PhyConfig:
    tx_power_dbm: float = 16.0
    """Transmission power of every device."""

    channel_width_mhz: int = 20
    """One of 20, 40, 80 or 160."""

    noise_floor_dbm: float = -95.0

    reference_loss_db: float = 54.12
    """Loss at the 1 m reference distance, before the linear term."""

    path_loss_exponent: float = 2.06067

    linear_attenuation_db_per_m: float = 0.770175
    """Wall attenuation spread over distance (5.25 dB x 0.1467 walls/m)."""

    mcs_table: List[McsEntry] = field(default_factory=default_mcs_table)
    """Sorted by threshold; thresholds strictly increase with rate."""

    symbol_ns: int = 13_600
    """HE OFDM symbol including a 0.8 us guard interval."""

    preamble_us: int = 52
    """Legacy preamble, RL-SIG, HE-SIG-A, HE-STF and two HE-LTFs."""

    service_tail_bits: int = 22
    """SERVICE field plus tail bits, once per PPDU."""

    mpdu_framing_bits: int = 32
    """A-MPDU delimiter and padding per MPDU."""

    max_ampdu: int = 64
    """Maximum number of MPDUs in one A-MPDU."""

    max_ppdu_us: int = 5_484
    """Longest PPDU allowed on air."""

    su_streams: int = 2
    """Spatial streams of a single-user transmission."""

    sifs_us: int = 16
    slot_us: int = 9

    rts_us: int = 52
    mu_rts_us: int = 60
    cts_us: int = 44
    block_ack_us: int = 68
    trigger_us: int = 100
    multi_sta_ack_us: int = 100
    beacon_us: int = 420
    beacon_interval_us: int = 102_400

    solicitation_us: int = 52
    """PS-Poll like frame sent by members of announced sessions."""

    @property
    def pifs_us(self) -> int:
        return self.sifs_us + self.slot_us

    def validate(self) -> List[str]:
        errors = []

        if self.channel_width_mhz not in FULL_WIDTH_RU:
            errors.append("channel_width_mhz must be one of 20, 40, 80, 160")

        thresholds = [m.min_snr_db for m in self.mcs_table]
        rates = [m.bits_per_tone for m in self.mcs_table]
        if not self.mcs_table:
            errors.append("mcs_table must not be empty")
        elif any(b <= a for a, b in zip(thresholds, thresholds[1:])) or any(
            b <= a for a, b in zip(rates, rates[1:])
        ):
            errors.append("mcs_table thresholds must increase with rate")

        if not 1 <= self.su_streams <= MAX_SPATIAL_STREAMS:
            errors.append("su_streams must be in 1..8")

        if self.max_ampdu < 1:
            errors.append("max_ampdu must be positive")

        return errors


@dataclass
class AirtimeQuery:
    payload_bits: int
    """Size of every MPDU in the aggregate."""

    mcs: int
    spatial_streams: int = 1
    ru_tones: int = 242
    includes_rts_cts: bool = False
    """Prepend RTS + SIFS + CTS + SIFS to the PPDU duration."""


Distance = Union[float, np.ndarray]


def path_loss_db(distance_m: Distance, config: PhyConfig) -> Distance:
    distances = np.asarray(distance_m, dtype=float)

    if np.any(distances <= 0):
        raise PhyError("distance must be positive.")

    loss = (
        config.reference_loss_db
        + 10 * config.path_loss_exponent * np.log10(distances)
        + config.linear_attenuation_db_per_m * distances
    )
    loss = np.maximum(loss, 0.0)

    return float(loss) if loss.ndim == 0 else loss


def received_power_dbm(distance_m: Distance, config: PhyConfig) -> Distance:
    return config.tx_power_dbm - path_loss_db(distance_m, config)


def snr_db(distance_m: Distance, config: PhyConfig) -> Distance:
    return received_power_dbm(distance_m, config) - config.noise_floor_dbm


def select_mcs(snr: float, config: PhyConfig) -> int:
    """Highest MCS whose threshold is at most `snr`."""

    thresholds = np.array([m.min_snr_db for m in config.mcs_table])
    position = int(np.searchsorted(thresholds, snr, side="right")) - 1

    if position < 0:
        return MCS_INFEASIBLE

    return config.mcs_table[position].index


def _mcs_entry(mcs: int, config: PhyConfig) -> McsEntry:
    for entry in config.mcs_table:
        if entry.index == mcs:
            return entry

    raise PhyError(f"MCS {mcs} is not usable (link infeasible).")


def data_bits_per_symbol(
    mcs: int, spatial_streams: int, ru_tones: int, config: PhyConfig
) -> int:
    if ru_tones not in RU_DATA_TONES:
        raise PhyError(f"{ru_tones} tones is not a resource-unit size.")

    if not 1 <= spatial_streams <= MAX_SPATIAL_STREAMS:
        raise PhyError(f"{spatial_streams} spatial streams out of 1..8.")

    entry = _mcs_entry(mcs, config)
    bits = RU_DATA_TONES[ru_tones] * entry.bits_per_tone * spatial_streams

    # Rates such as 20/3 bits per tone are not exact in binary.
    return int(math.floor(bits + 1e-6))


def ppdu_airtime(query: AirtimeQuery, n_mpdus: int, config: PhyConfig) -> int:
    """Duration of one PPDU carrying `n_mpdus` aggregated MPDUs."""

    if not 1 <= n_mpdus <= config.max_ampdu:
        raise PhyError(
            f"A-MPDU of {n_mpdus} MPDUs out of 1..{config.max_ampdu}."
        )

    dbps = data_bits_per_symbol(
        query.mcs, query.spatial_streams, query.ru_tones, config
    )

    bits = config.service_tail_bits + n_mpdus * (
        query.payload_bits + config.mpdu_framing_bits
    )
    symbols = -(-bits // dbps)
    duration = config.preamble_us + -(-symbols * config.symbol_ns // 1000)

    if query.includes_rts_cts:
        duration += config.rts_us + config.cts_us + 2 * config.sifs_us

    return duration


def max_mpdus_within(
    query: AirtimeQuery, limit_us: int, cap: int, config: PhyConfig
) -> int:
    """Largest n <= cap whose PPDU lasts at most `limit_us`, else 0."""

    low, high = 0, min(cap, config.max_ampdu)

    while low < high:
        middle = (low + high + 1) // 2

        if ppdu_airtime(query, middle, config) <= limit_us:
            low = middle
        else:
            high = middle - 1

    return low


Segment = Tuple[int, ChannelState]


def exchange_segments(
    data_us: int, protection: bool, mu: bool, config: PhyConfig
) -> List[Segment]:
    """Channel occupancy of one successful exchange, in airtime order."""

    if data_us <= 0:
        raise PhyError("data duration must be positive.")

    control = ChannelState.CONTROL
    segments = []

    if protection:
        segments += [
            (config.mu_rts_us if mu else config.rts_us, control),
            (config.sifs_us, control),
            (config.cts_us, control),
            (config.sifs_us, control),
        ]

    if mu:
        segments += [(config.trigger_us, control), (config.sifs_us, control)]

    segments += [
        (data_us, ChannelState.SUCCESS),
        (config.sifs_us, control),
        (config.multi_sta_ack_us if mu else config.block_ack_us, control),
    ]

    return segments


def exchange_airtime(
    data_us: int, protection: bool, mu: bool, config: PhyConfig
) -> int:
    return sum(
        duration
        for duration, _ in exchange_segments(data_us, protection, mu, config)
    )


def exchange_overhead(protection: bool, mu: bool, config: PhyConfig) -> int:
    """Airtime of an exchange that is not spent on the data PPDU."""

    return exchange_airtime(1, protection, mu, config) - 1
