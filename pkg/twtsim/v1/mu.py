"""
Multiuser uplink scheduling: resource-unit (RU) partitioning, MU-MIMO stream
assignment, trigger frames and the duration of a trigger-based exchange.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Sequence, Tuple

from .phy import (
    FULL_WIDTH_RU,
    MAX_SPATIAL_STREAMS,
    AirtimeQuery,
    PhyConfig,
    exchange_airtime,
    max_mpdus_within,
    ppdu_airtime,
)


logger = logging.getLogger(__name__)

RU_TILING = {
    20: {26: 9, 52: 4, 106: 2, 242: 1},
    40: {26: 18, 52: 8, 106: 4, 242: 2, 484: 1},
    80: {26: 37, 52: 16, 106: 8, 242: 4, 484: 2, 996: 1},
    160: {26: 74, 52: 32, 106: 16, 242: 8, 484: 4, 996: 2, 1992: 1},
}
"""How many RUs of each size fit in every channel width."""

SUBCHANNEL_TILING = {26: 9, 52: 4, 106: 2, 242: 1}
"""RUs of each size inside one 20 MHz (242-tone) subchannel."""

MU_MIMO_MIN_TONES = 106
"""Smallest RU that several stations may share through MU-MIMO."""

MAX_MU_USERS = 8


class AllocationError(ValueError):
    pass


class MuPolicy(str, Enum):
    MU_MIMO = "mu-mimo"
    OFDMA = "ofdma"
    MIXED = "mixed"


@dataclass(frozen=True)
class RuEntry:
    ru_index: int
    """Identifies the RU; entries sharing an index share the RU."""

    station: int
    ru_tones: int
    stream_set: Tuple[int, ...]
    """Spatial-stream indices (0..7) the station uses on its RU."""


@dataclass
class RuAllocation:
    channel_width: int
    entries: List[RuEntry] = field(default_factory=list)

    deferred: List[int] = field(default_factory=list)
    """Stations with traffic left for a later exchange."""

    @property
    def stations(self) -> List[int]:
        return [entry.station for entry in self.entries]

    def entry(self, station: int) -> RuEntry:
        for entry in self.entries:
            if entry.station == station:
                return entry

        raise AllocationError(f"station {station} is not allocated.")

    def rus(self) -> Dict[int, List[RuEntry]]:
        grouped = defaultdict(list)
        for entry in self.entries:
            grouped[entry.ru_index].append(entry)

        return dict(grouped)


@dataclass
class TriggerFrame:
    allocation: RuAllocation
    grants: Dict[int, int]
    """Maximum A-MPDU size granted to every addressed station."""

    deadline_us: int
    """Longest uplink PPDU the stations may send."""


def _subchannel_ru(members: int) -> int:
    """Largest RU of which `members` fit in one 20 MHz subchannel."""

    for tones in (242, 106, 52, 26):
        if SUBCHANNEL_TILING[tones] >= members:
            return tones

    raise AllocationError(f"{members} stations do not fit a subchannel.")


def _ofdma(stations: Sequence[int], subchannels: Sequence[int], first_ru):
    """One station per RU, round-robin over the given subchannels."""

    per_subchannel = defaultdict(list)
    for position, station in enumerate(stations):
        per_subchannel[subchannels[position % len(subchannels)]].append(
            station
        )

    entries = []
    ru_index = first_ru
    for subchannel in subchannels:
        members = per_subchannel[subchannel]
        if not members:
            continue

        tones = _subchannel_ru(len(members))
        for station in members:
            entries.append(RuEntry(ru_index, station, tones, (0,)))
            ru_index += 1

    return entries


def _mu_mimo(stations: Sequence[int], ru_index: int, tones: int):
    return [
        RuEntry(ru_index, station, tones, (stream,))
        for stream, station in enumerate(stations)
    ]


def allocate(
    channel_width: int,
    demands: Sequence[Tuple[int, int]],
    max_mu: int = MAX_MU_USERS,
    policy: MuPolicy = MuPolicy.MU_MIMO,
    su_streams: int = 2,
) -> RuAllocation:
    """
    Assign RUs and streams to the stations with buffered packets.

    Stations are served by decreasing demand (ties by id). Beyond `max_mu`
    the remaining stations are deferred.
    """

    if channel_width not in RU_TILING:
        raise AllocationError(f"{channel_width} MHz is not a channel width.")

    if not demands:
        raise AllocationError("allocation needs at least one demand.")

    if not 1 <= max_mu <= MAX_MU_USERS:
        raise AllocationError(f"max_mu must be in 1..{MAX_MU_USERS}.")

    ranked = [
        station
        for station, buffered in sorted(demands, key=lambda d: (-d[1], d[0]))
        if buffered > 0
    ]
    served, deferred = ranked[:max_mu], ranked[max_mu:]

    allocation = RuAllocation(channel_width=channel_width, deferred=deferred)
    full_width = FULL_WIDTH_RU[channel_width]

    if len(served) == 1:
        streams = tuple(range(min(su_streams, MAX_SPATIAL_STREAMS)))
        allocation.entries = [RuEntry(0, served[0], full_width, streams)]

    elif len(served) > 1:
        if policy == MuPolicy.MIXED and channel_width == 20:
            policy = MuPolicy.MU_MIMO

        subchannels = list(range(channel_width // 20))

        if policy == MuPolicy.MU_MIMO:
            allocation.entries = _mu_mimo(served, 0, full_width)

        elif policy == MuPolicy.OFDMA:
            allocation.entries = _ofdma(served, subchannels, 0)

        else:
            shared = -(-len(served) // 2)
            allocation.entries = _mu_mimo(served[:shared], 0, 242)
            allocation.entries += _ofdma(served[shared:], subchannels[1:], 1)

    if deferred:
        logger.debug(f"Deferred stations {deferred} to a later exchange.")

    return allocation


def validate(allocation: RuAllocation) -> List[str]:
    """Every violated constraint; an empty list means the allocation is ok."""

    width = allocation.channel_width
    if width not in RU_TILING:
        return [f"channel width {width} MHz is not legal"]

    violations = []
    tiling = RU_TILING[width]

    seen = set()
    for entry in allocation.entries:
        if entry.station in seen:
            violations.append(f"station {entry.station} allocated twice")
        seen.add(entry.station)

        if entry.ru_tones not in tiling:
            violations.append(
                f"station {entry.station}: {entry.ru_tones}-tone RU is not "
                f"legal at {width} MHz"
            )

        if not entry.stream_set or any(
            not 0 <= s < MAX_SPATIAL_STREAMS for s in entry.stream_set
        ):
            violations.append(
                f"station {entry.station}: stream set {entry.stream_set} "
                "outside 0..7"
            )

    sizes = defaultdict(int)
    budget = 0

    for ru_index, entries in sorted(allocation.rus().items()):
        tones = {e.ru_tones for e in entries}
        if len(tones) > 1:
            violations.append(f"RU {ru_index} has inconsistent sizes {tones}")

        ru_tones = max(tones)
        sizes[ru_tones] += 1
        budget += ru_tones

        if len(entries) > 1 and ru_tones < MU_MIMO_MIN_TONES:
            violations.append(
                f"RU {ru_index}: {len(entries)} stations share a "
                f"{ru_tones}-tone RU (MU-MIMO needs >= {MU_MIMO_MIN_TONES})"
            )

        streams = [s for e in entries for s in e.stream_set]
        if len(streams) > MAX_SPATIAL_STREAMS:
            violations.append(
                f"RU {ru_index}: {len(streams)} streams exceed "
                f"{MAX_SPATIAL_STREAMS}"
            )

        if len(set(streams)) != len(streams):
            violations.append(f"RU {ru_index}: overlapping stream sets")

    if budget > FULL_WIDTH_RU[width]:
        violations.append(
            f"{budget} tones exceed the {FULL_WIDTH_RU[width]}-tone budget"
        )

    for tones, count in sorted(sizes.items()):
        if tones in tiling and count > tiling[tones]:
            violations.append(
                f"{count} RUs of {tones} tones exceed the {tiling[tones]} "
                f"that tile {width} MHz"
            )

    return violations


def station_query(
    allocation: RuAllocation, station: int, mcs: int, payload_bits: int
) -> AirtimeQuery:
    entry = allocation.entry(station)

    return AirtimeQuery(
        payload_bits=payload_bits,
        mcs=mcs,
        spatial_streams=len(entry.stream_set),
        ru_tones=entry.ru_tones,
    )


def mu_exchange_duration(
    allocation: RuAllocation,
    shares: Dict[int, Tuple[int, int]],
    payload_bits: int,
    config: PhyConfig,
    protection: bool = False,
) -> int:
    """
    Airtime of one trigger-based exchange; `shares` maps every transmitting
    station to its (n_mpdus, mcs). The slowest PPDU sets the duration.
    """

    violations = validate(allocation)
    if violations:
        raise AllocationError("; ".join(violations))

    if not shares:
        raise AllocationError("an exchange needs at least one transmitter.")

    data_us = max(
        ppdu_airtime(
            station_query(allocation, station, mcs, payload_bits),
            n_mpdus,
            config,
        )
        for station, (n_mpdus, mcs) in shares.items()
    )

    return exchange_airtime(data_us, protection, True, config)


def grant_sizes(
    allocation: RuAllocation,
    buffered: Dict[int, int],
    mcs: Dict[int, int],
    payload_bits: int,
    limit_us: int,
    config: PhyConfig,
) -> Dict[int, int]:
    """
    A-MPDU size granted to every allocated station: as many buffered packets
    as fit a PPDU of `limit_us`, capped by the A-MPDU maximum. Stations
    granted nothing are left out.
    """

    grants = {}

    for station in allocation.stations:
        query = station_query(allocation, station, mcs[station], payload_bits)
        n = max_mpdus_within(query, limit_us, buffered[station], config)

        if n > 0:
            grants[station] = n

    return grants


def build_trigger(
    allocation: RuAllocation, grants: Dict[int, int], deadline_us: int
) -> TriggerFrame:
    unknown = set(grants) - set(allocation.stations)
    if unknown:
        raise AllocationError(f"grants for unallocated stations {unknown}.")

    return TriggerFrame(
        allocation=allocation, grants=dict(grants), deadline_us=deadline_us
    )
