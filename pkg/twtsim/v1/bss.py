"""
Uplink model of one BSS: an AP and its stations sharing a single channel.

The channel is owned by at most one party at a time. Stations win it
through DCF contention. The AP takes it a PIFS after it is released, ahead
of any station, for beacons and for TWT sessions. Trigger-enabled sessions
chain MU exchanges until the members have sent what they held when the
session opened or the session window is over. Non-trigger-enabled
sessions let their members contend only inside the window.
"""

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Deque, Dict, List, Optional

from .dcf import AccessKind, AccessOutcome, DcfAction, DcfConfig
from .dcf import DcfContention, StationPhase
from .engine import Event, EventHandle, EventKind, Simulator, StreamPurpose
from .metrics import MetricsCollector
from .mu import MuPolicy, allocate, build_trigger, grant_sizes
from .mu import mu_exchange_duration
from .phy import (
    FULL_WIDTH_RU,
    MCS_INFEASIBLE,
    AirtimeQuery,
    PhyConfig,
    PhyError,
    exchange_overhead,
    exchange_segments,
    max_mpdus_within,
    ppdu_airtime,
    select_mcs,
    snr_db,
)
from .traffic import (
    DEFAULT_BUFFER_PACKETS,
    DEFAULT_MPDU_BITS,
    EnqueueResult,
    Mpdu,
    PoissonSource,
    StationBuffer,
    dequeue_burst,
    enqueue,
)
from .twt.agreements import (
    MIN_WAKE_DURATION_US,
    AgreementKind,
    AgreementTable,
    ApPolicy,
    BroadcastInfo,
    BroadcastSession,
    SetupCommand,
    TwtAgreement,
    TwtParams,
    WakeSchedule,
    WakeState,
    announce,
    next_wake_time,
    request,
    run_dialogue,
    wake_state,
)
from .twt.scheduling import SessionSlot, build_timeline
from .types import AP_ID, ChannelState


logger = logging.getLogger(__name__)


class AccessMode(str, Enum):
    DCF = "dcf"
    TWT = "twt"


@dataclass
class TwtConfig:
    num_sessions: int = 2
    period_us: int = 20_000
    """Every session repeats with this period."""

    trigger_enabled: bool = True
    announced: bool = False
    implicit: bool = True
    agreement: AgreementKind = AgreementKind.INDIVIDUAL
    protection: bool = True
    """MU-RTS/CTS ahead of every trigger-based exchange."""

    listen_interval: int = 1
    """Broadcast: beacons between two beacons carrying the sessions."""

    hybrid: bool = False
    """TWT stations may also contend through DCF outside their sessions."""

    non_twt_stations: int = 0
    """The last stations of the topology keep plain DCF access."""

    def validate(self, num_stations: int) -> List[str]:
        errors = []
        twt_stations = num_stations - self.non_twt_stations

        if not 0 <= self.non_twt_stations <= num_stations:
            errors.append("twt.non_twt_stations out of range")

        elif not 1 <= self.num_sessions <= max(twt_stations, 1):
            errors.append(
                f"twt.num_sessions must be in 1..{max(twt_stations, 1)}"
            )

        elif self.period_us // self.num_sessions < MIN_WAKE_DURATION_US:
            errors.append(
                "twt.period_us leaves sessions shorter than "
                f"{MIN_WAKE_DURATION_US} us"
            )

        if self.listen_interval < 1:
            errors.append("twt.listen_interval must be at least 1")

        return errors


@dataclass
class MuConfig:
    policy: MuPolicy = MuPolicy.MU_MIMO
    max_mu: int = 8
    """Stations addressed by one trigger frame."""


@dataclass
class TrafficConfig:
    load_mbps: float = 1.0
    """Offered uplink load of every station; 0 disables traffic."""

    mpdu_bits: int = DEFAULT_MPDU_BITS
    buffer_packets: int = DEFAULT_BUFFER_PACKETS


@dataclass
class Station:
    id: int
    distance_m: float
    mcs: int
    buffer: StationBuffer
    source: Optional[PoissonSource] = None

    twt: bool = False
    in_flight: List[Mpdu] = field(default_factory=list)
    """DCF aggregate being (re)transmitted."""

    granted: List[Mpdu] = field(default_factory=list)
    """Packets sent in the ongoing trigger-based exchange."""

    agreement: Optional[TwtAgreement] = None
    slot: Optional[SessionSlot] = None
    schedule: WakeSchedule = field(default_factory=WakeSchedule)
    backlog_awake: bool = False

    @property
    def occupancy(self) -> int:
        return len(self.buffer) + len(self.in_flight) + len(self.granted)


@dataclass
class SessionRun:
    """One occurrence of a TWT session."""

    slot: SessionSlot
    start: int
    end: int
    quota: Dict[int, int] = field(default_factory=dict)
    """Packets each member may still send: what it held at the start."""

    awake: bool = True
    served: bool = False
    solicited: bool = False


class Bss:
    def __init__(
        self,
        simulator: Simulator,
        access: AccessMode,
        distances: Dict[int, float],
        phy: PhyConfig,
        dcf: DcfConfig,
        twt: TwtConfig,
        mu: MuConfig,
        traffic: TrafficConfig,
        metrics: MetricsCollector,
    ):
        self.simulator = simulator
        self.access = access
        self.phy = phy
        self.dcf_config = dcf
        self.twt_config = twt
        self.mu_config = mu
        self.traffic = traffic
        self.metrics = metrics

        self.stations: Dict[int, Station] = {}
        self.agreements = AgreementTable()
        self.broadcast_sessions: Dict[int, BroadcastSession] = {}
        self.slots: List[SessionSlot] = []

        self._busy = False
        self._idle_since = 0
        self._ap_queue: Deque[Callable[[int], None]] = deque()
        self._ap_timer: Optional[EventHandle] = None
        self._packet_ids = itertools.count()

        self.contention = DcfContention(
            simulator, dcf, self._on_access, self._eligible
        )

        for kind, handler in [
            (EventKind.ARRIVAL, self._on_arrival),
            (EventKind.BEACON, self._on_beacon),
            (EventKind.SESSION_START, self._on_session_start),
            (EventKind.SESSION_END, self._on_session_end),
            (EventKind.TIMER, self._run_payload),
            (EventKind.TRANSMISSION_END, self._run_payload),
        ]:
            simulator.register(kind, handler)

        self._build_stations(distances)

    def _build_stations(self, distances: Dict[int, float]) -> None:
        ids = sorted(distances)
        twt_count = (
            len(ids) - self.twt_config.non_twt_stations
            if self.access == AccessMode.TWT
            else 0
        )

        for position, station_id in enumerate(ids):
            mcs = select_mcs(snr_db(distances[station_id], self.phy), self.phy)

            if mcs == MCS_INFEASIBLE:
                raise PhyError(
                    f"station {station_id} at {distances[station_id]:.1f} m "
                    "is out of the AP's coverage."
                )

            station = Station(
                id=station_id,
                distance_m=distances[station_id],
                mcs=mcs,
                buffer=StationBuffer(capacity=self.traffic.buffer_packets),
                twt=position < twt_count,
            )

            if self.traffic.load_mbps > 0:
                station.source = PoissonSource(
                    station=station_id,
                    dst=AP_ID,
                    load_bps=self.traffic.load_mbps * 1e6,
                    size_bits=self.traffic.mpdu_bits,
                    rng=self.simulator.rng.stream(
                        StreamPurpose.TRAFFIC, station_id
                    ),
                    ids=self._packet_ids,
                )

            self.stations[station_id] = station
            self.contention.add_member(
                station_id,
                self.simulator.rng.stream(StreamPurpose.BACKOFF, station_id),
            )

    # Setup

    def start(self) -> None:
        now = self.simulator.now

        if self.access == AccessMode.TWT:
            self._setup_twt(now)

        for station in self.stations.values():
            if not station.twt:
                self.metrics.awake[station.id].wake(now)

            if station.source is not None:
                self.simulator.schedule_at(
                    station.source.next_arrival(now),
                    EventKind.ARRIVAL,
                    station.id,
                )

        self.simulator.schedule_at(now, EventKind.BEACON)
        self._release(now)

    def _setup_twt(self, now: int) -> None:
        config = self.twt_config
        members = [s.id for s in self.stations.values() if s.twt]

        if not members:
            return

        self.slots = build_timeline(
            config.num_sessions,
            config.period_us,
            members,
            self.simulator.rng.stream(StreamPurpose.TIMELINE),
        )

        for slot in self.slots:
            params = TwtParams(
                target_wake_time=now + slot.offset,
                wake_interval=config.period_us,
                min_wake_duration=max(
                    MIN_WAKE_DURATION_US,
                    slot.duration
                    // MIN_WAKE_DURATION_US
                    * MIN_WAKE_DURATION_US,
                ),
                protection=config.protection,
                trigger_enabled=config.trigger_enabled,
                implicit=config.implicit,
                announced=config.announced,
            )

            broadcast = None
            if config.agreement == AgreementKind.BROADCAST:
                session = BroadcastSession(
                    session_id=slot.session_id,
                    params=params,
                    members=set(slot.members),
                    next_target_beacon=now,
                    listen_interval=config.listen_interval,
                )
                self.broadcast_sessions[slot.session_id] = session
                broadcast = session.info()

            policy = ApPolicy(preferred=params, broadcast=broadcast)

            for station_id in slot.members:
                self._negotiate(station_id, slot, policy, broadcast)

            self.simulator.schedule_at(
                now + slot.offset, EventKind.SESSION_START, slot
            )

    def _negotiate(
        self,
        station_id: int,
        slot: SessionSlot,
        policy: ApPolicy,
        broadcast: Optional[BroadcastInfo],
    ) -> None:
        station = self.stations[station_id]
        kind = (
            AgreementKind.BROADCAST
            if broadcast is not None
            else AgreementKind.INDIVIDUAL
        )

        agreement = self.agreements.open(
            station_id,
            policy.preferred,
            kind=kind,
            session_id=slot.session_id if broadcast is not None else None,
        )
        dialogue = run_dialogue(
            request(SetupCommand.REQUEST, agreement_id=agreement.agreement_id),
            policy,
        )
        self.agreements.settle(agreement, dialogue)
        self.metrics.twt_setup_messages += len(dialogue.messages)

        if not dialogue.accepted:
            logger.warning(f"Station {station_id} was refused a TWT session.")
            return

        station.agreement = agreement
        station.slot = slot
        station.schedule = WakeSchedule(
            twt=True,
            windows=[
                (
                    agreement.params.target_wake_time,
                    slot.duration,
                    self.twt_config.period_us,
                )
            ],
        )

        if broadcast is not None:
            spacing = broadcast.listen_interval * self.phy.beacon_interval_us
            station.schedule.beacons = (
                broadcast.next_target_beacon,
                spacing,
                self.phy.beacon_us,
            )

    # Channel ownership

    def _run_payload(self, event: Event) -> None:
        event.payload(event.fire_time)

    def _take(self, now: int) -> None:
        self._busy = True
        self.simulator.cancel(self._ap_timer)
        self._ap_timer = None

    def _release(self, now: int) -> None:
        self._busy = False
        self._idle_since = now

        if self._ap_queue:
            self._kick_ap(now)
        else:
            self.contention.resume(now)

    def _ap_request(self, operation: Callable[[int], None], now: int) -> None:
        self._ap_queue.append(operation)
        self._kick_ap(now)

    def _kick_ap(self, now: int) -> None:
        if self._busy or self.simulator.pending(self._ap_timer):
            return

        start = max(now, self._idle_since + self.phy.pifs_us)
        self._ap_timer = self.simulator.schedule_at(
            start, EventKind.TIMER, self._start_ap_operation
        )

    def _start_ap_operation(self, now: int) -> None:
        self._ap_timer = None

        if self._busy or not self._ap_queue:
            return

        self.contention.freeze(now)
        self._take(now)
        self._ap_queue.popleft()(now)

    # Traffic

    def _on_arrival(self, event: Event) -> None:
        now = event.fire_time
        station = self.stations[event.payload]

        mpdu = station.source.packet(now)
        result = enqueue(station.buffer, mpdu)
        self.metrics.record_arrival(mpdu, result == EnqueueResult.ACCEPTED)
        self.metrics.sample_queue(station.id, now, station.occupancy)

        if result == EnqueueResult.ACCEPTED and self._contends(station):
            member = self.contention.members[station.id]

            if member.state.phase == StationPhase.IDLE:
                self._set_backlogged(station, True, now)
                self.contention.join(station.id, now)

        self.simulator.schedule_at(
            station.source.next_arrival(now), EventKind.ARRIVAL, station.id
        )

    def _deliver(self, station: Station, mpdus: List[Mpdu], now: int) -> None:
        for mpdu in mpdus:
            self.metrics.record_delivery(mpdu, now)

    # DCF

    def _contends(self, station: Station) -> bool:
        """Station ever uses DCF."""

        return (
            not station.twt
            or self.twt_config.hybrid
            or not self.twt_config.trigger_enabled
        )

    def _eligible(self, station_id: int, now: int) -> bool:
        station = self.stations[station_id]

        if not station.twt or self.twt_config.hybrid:
            return True

        if self.twt_config.trigger_enabled or station.slot is None:
            return False

        return wake_state(station.schedule, now) == WakeState.AWAKE

    def _set_backlogged(self, station: Station, flag: bool, now: int) -> None:
        """Hybrid TWT stations stay awake while they have DCF traffic."""

        if not (station.twt and self.twt_config.hybrid):
            return

        if flag and not station.backlog_awake:
            self.metrics.awake[station.id].wake(now)
        elif not flag and station.backlog_awake:
            self.metrics.awake[station.id].doze(now)

        station.backlog_awake = flag

    def _dcf_query(self, station: Station) -> AirtimeQuery:
        return AirtimeQuery(
            payload_bits=self.traffic.mpdu_bits,
            mcs=station.mcs,
            spatial_streams=self.phy.su_streams,
            ru_tones=FULL_WIDTH_RU[self.phy.channel_width_mhz],
        )

    def _load_aggregate(self, station: Station) -> None:
        """Fill the DCF aggregate unless a retransmission is pending."""

        if station.in_flight:
            return

        n = max_mpdus_within(
            self._dcf_query(station),
            self.phy.max_ppdu_us,
            len(station.buffer),
            self.phy,
        )
        station.in_flight = dequeue_burst(station.buffer, max(n, 1))

    def _on_access(self, outcome: AccessOutcome, now: int) -> None:
        self._take(now)
        rts = self.dcf_config.rts_cts

        for station_id in outcome.stations:
            self._load_aggregate(self.stations[station_id])

        # A trigger exchange can drain a hybrid station during its backoff.
        empty = [s for s in outcome.stations if not self.stations[s].in_flight]
        if empty:
            outcome = self.contention.withdraw(outcome, empty)
            for station_id in empty:
                self._set_backlogged(self.stations[station_id], False, now)

            if outcome.kind == AccessKind.IDLE:
                self._release(now)
                return

        if outcome.kind == AccessKind.SUCCESS:
            station = self.stations[outcome.stations[0]]
            data_us = ppdu_airtime(
                self._dcf_query(station), len(station.in_flight), self.phy
            )
            end = self.metrics.ledger.occupy(
                now, exchange_segments(data_us, rts, False, self.phy)
            )

            def finish(t, station=station):
                self._deliver(station, station.in_flight, t)
                station.in_flight = []
                self.contention.complete(station.id, True)
                self._after_exchange(station, t)
                self._release(t)

            self.simulator.schedule_at(end, EventKind.TRANSMISSION_END, finish)
            return

        if rts:
            busy = self.phy.rts_us
            wait = self.dcf_config.cts_timeout_us
        else:
            busy = max(
                ppdu_airtime(
                    self._dcf_query(self.stations[s]),
                    len(self.stations[s].in_flight),
                    self.phy,
                )
                for s in outcome.stations
            )
            wait = self.dcf_config.ack_timeout_us

        end = self.metrics.ledger.occupy(
            now, [(busy, ChannelState.COLLISION)]
        )

        def fail(t, stations=outcome.stations):
            for station_id in stations:
                station = self.stations[station_id]
                action = self.contention.complete(station_id, False)

                if action == DcfAction.DROP_PACKET:
                    self.metrics.record_retry_drop(station.in_flight)
                    station.in_flight = []

                self._after_exchange(station, t)

            self._release(t)

        self.simulator.schedule_at(
            end + wait, EventKind.TRANSMISSION_END, fail
        )

    def _after_exchange(self, station: Station, now: int) -> None:
        self.metrics.sample_queue(station.id, now, station.occupancy)

        if not station.in_flight and not station.buffer.queue:
            self.contention.go_idle(station.id)
            self._set_backlogged(station, False, now)

    # Beacons

    def _on_beacon(self, event: Event) -> None:
        tbtt = event.fire_time
        listeners = []

        for session in self.broadcast_sessions.values():
            if session.carries_info(tbtt, self.phy.beacon_interval_us):
                listeners += sorted(session.members)

                if not self.twt_config.implicit:
                    self.metrics.twt_update_messages += 1

        for station_id in listeners:
            self.metrics.awake[station_id].wake(tbtt)

        def send(now, listeners=listeners):
            end = self.metrics.ledger.occupy(
                now, [(self.phy.beacon_us, ChannelState.CONTROL)]
            )
            self.metrics.beacons += 1

            def done(t):
                for station_id in listeners:
                    self.metrics.awake[station_id].doze(t)
                self._release(t)

            self.simulator.schedule_at(end, EventKind.TRANSMISSION_END, done)

        self._ap_request(send, tbtt)
        self.simulator.schedule_at(
            tbtt + self.phy.beacon_interval_us, EventKind.BEACON
        )

    # TWT sessions

    def _members(self, run: SessionRun) -> List[Station]:
        return [
            self.stations[s]
            for s in run.slot.members
            if self.stations[s].agreement is not None
        ]

    def _on_session_start(self, event: Event) -> None:
        now = event.fire_time
        slot: SessionSlot = event.payload
        run = SessionRun(slot=slot, start=now, end=now + slot.duration)

        for station in self._members(run):
            self.metrics.awake[station.id].wake(now)
            run.quota[station.id] = len(station.buffer)

        self.simulator.schedule_at(run.end, EventKind.SESSION_END, run)

        if self.twt_config.trigger_enabled:
            self._ap_request(lambda t: self._serve(run, t), now)
        else:
            self.contention.refresh(now)

        logger.debug(
            f"Session {slot.session_id} [{run.start}, {run.end}) with "
            f"{len(slot.members)} members."
        )

    def _doze_members(self, run: SessionRun, now: int) -> None:
        if not run.awake:
            return

        for station in self._members(run):
            self.metrics.awake[station.id].doze(now)

        run.awake = False

    def _on_session_end(self, event: Event) -> None:
        now = event.fire_time
        run: SessionRun = event.payload
        members = self._members(run)

        self._doze_members(run, now)

        if not self.twt_config.trigger_enabled:
            self.contention.refresh(now)

        if not members:
            return

        if not self.twt_config.implicit:
            next_start = run.start + self.twt_config.period_us

            for station in members:
                announce(station.agreement, next_start)

            if self.twt_config.agreement == AgreementKind.INDIVIDUAL:
                self.metrics.twt_update_messages += len(members)

        next_start = next_wake_time(members[0].agreement, run.start)
        if next_start is not None:
            self.simulator.schedule_at(
                next_start, EventKind.SESSION_START, run.slot
            )

    def _serve(self, run: SessionRun, now: int) -> None:
        """One trigger-based exchange, or the early end of the session."""

        members = self._members(run) if run.awake else []
        prefix = []

        if self.twt_config.announced and not run.solicited and members:
            run.solicited = True
            for _ in members:
                prefix += [
                    (self.phy.solicitation_us, ChannelState.CONTROL),
                    (self.phy.sifs_us, ChannelState.CONTROL),
                ]

        protection = self.twt_config.protection
        limit = min(
            self.phy.max_ppdu_us,
            run.end
            - now
            - sum(d for d, _ in prefix)
            - exchange_overhead(protection, True, self.phy),
        )

        demands = [
            (s.id, min(run.quota.get(s.id, 0), len(s.buffer)))
            for s in members
        ]
        grants = {}

        if any(buffered for _, buffered in demands) and limit > 0:
            allocation = allocate(
                self.phy.channel_width_mhz,
                demands,
                max_mu=self.mu_config.max_mu,
                policy=self.mu_config.policy,
                su_streams=self.phy.su_streams,
            )
            grants = grant_sizes(
                allocation,
                dict(demands),
                {s.id: s.mcs for s in members},
                self.traffic.mpdu_bits,
                limit,
                self.phy,
            )

        if not grants:
            if prefix:
                now = self.metrics.ledger.occupy(now, prefix)

            self._doze_members(run, now)
            self._release(now)
            return

        trigger = build_trigger(allocation, grants, limit)
        for station_id, n in trigger.grants.items():
            station = self.stations[station_id]
            station.granted = dequeue_burst(station.buffer, n)
            run.quota[station_id] -= n

        total = mu_exchange_duration(
            allocation,
            {s: (n, self.stations[s].mcs) for s, n in trigger.grants.items()},
            self.traffic.mpdu_bits,
            self.phy,
            protection,
        )
        data_us = total - exchange_overhead(protection, True, self.phy)

        end = self.metrics.ledger.occupy(
            now,
            prefix
            + exchange_segments(data_us, protection, True, self.phy),
        )
        run.served = True

        def finish(t):
            for station_id in trigger.grants:
                station = self.stations[station_id]
                self._deliver(station, station.granted, t)
                station.granted = []
                self._after_exchange(station, t)

            self.simulator.schedule_at(
                t + self.phy.sifs_us,
                EventKind.TIMER,
                lambda t2: self._serve(run, t2),
            )

        self.simulator.schedule_at(end, EventKind.TRANSMISSION_END, finish)

    # Results

    def in_system(self) -> Dict[int, int]:
        return {s.id: s.occupancy for s in self.stations.values()}

    def close(self) -> None:
        """Copy the contention counters into the metrics."""

        for station_id, member in self.contention.members.items():
            self.metrics.attempts[station_id] = member.attempts
            self.metrics.collided_attempts[station_id] = (
                member.collided_attempts
            )
