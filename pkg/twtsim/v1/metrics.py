"""
Measurement pipeline of a run: packet delays, time-averaged queue
occupancy, channel-state accounting and station awake time.

Delay and queue averages skip a warm-up prefix of the run; channel and awake
accounting cover the whole horizon.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .phy import Segment
from .traffic import Mpdu
from .types import ChannelState, JSONDataclassMixin


logger = logging.getLogger(__name__)

DEFAULT_WARMUP_FRACTION = 0.05


class ConsistencyError(RuntimeError):
    pass


@dataclass
class ChannelLedger:
    """Time spent by the channel in every state, in integer microseconds."""

    horizon: int
    totals: Dict[ChannelState, int] = field(
        default_factory=lambda: {state: 0 for state in ChannelState}
    )

    cursor: int = 0
    """Everything before the cursor is accounted for."""

    def _add(self, state: ChannelState, until: int) -> None:
        until = min(until, self.horizon)

        if until > self.cursor:
            self.totals[state] += until - self.cursor
            self.cursor = until

    def occupy(self, start: int, segments: Sequence[Segment]) -> int:
        """Idle time until `start`, then `segments`; returns their end."""

        if start < self.cursor and start < self.horizon:
            raise ConsistencyError(
                f"channel occupied at t={start} while busy until "
                f"t={self.cursor}."
            )

        self._add(ChannelState.IDLE, start)

        end = start
        for duration, state in segments:
            end += duration
            self._add(state, end)

        return end

    def close(self) -> None:
        self._add(ChannelState.IDLE, self.horizon)

    @property
    def elapsed(self) -> int:
        return sum(self.totals.values())

    def fraction(self, state: ChannelState) -> float:
        return self.totals[state] / self.horizon if self.horizon else 0.0


@dataclass
class QueueIntegral:
    """Time integral of one station's occupancy after the warm-up."""

    warmup: int
    level: int = 0
    last: int = 0
    area: int = 0

    def sample(self, now: int, level: int) -> None:
        if now < self.last:
            raise ConsistencyError(
                f"queue sampled at t={now} after t={self.last}."
            )

        start = max(self.last, self.warmup)
        if now > start:
            self.area += self.level * (now - start)

        self.level = level
        self.last = now


@dataclass
class AwakeTracker:
    """Awake time of one station; wake/doze calls may nest."""

    depth: int = 0
    since: int = 0
    awake_us: int = 0

    def wake(self, now: int) -> None:
        if self.depth == 0:
            self.since = now

        self.depth += 1

    def doze(self, now: int) -> None:
        if self.depth == 0:
            raise ConsistencyError("doze without a matching wake.")

        self.depth -= 1

        if self.depth == 0:
            self.awake_us += now - self.since

    def close(self, horizon: int) -> int:
        total = self.awake_us
        if self.depth > 0:
            total += horizon - self.since

        return total


@dataclass
class StationReport:
    station: int
    mean_delay_us: Optional[float]
    """Over packets delivered after the warm-up; None without any."""

    mean_queue: float
    """Packets buffered or in flight, time-weighted after the warm-up."""

    generated: int
    delivered: int
    dropped: int
    """Buffer overflows plus retry-limit drops."""

    retry_drops: int
    throughput_bps: float
    awake_fraction: float
    attempts: int
    collided_attempts: int


@dataclass
class MetricsReport(JSONDataclassMixin):
    seed: int
    duration_us: int
    warmup_us: int

    stations: List[StationReport]

    mean_delay_us: Optional[float]
    """Packet-weighted mean over every delivered packet."""

    mean_queue: float
    """Mean over stations of their time-averaged occupancy."""

    delivered: int
    dropped: int
    throughput_bps: float

    offered_rate_pps: float
    """Packets admitted to the buffers per second after the warm-up."""

    idle_fraction: float
    success_fraction: float
    collision_fraction: float
    control_fraction: float
    mean_awake_fraction: float

    attempts: int
    collided_attempts: int
    collision_probability: Optional[float]
    """Share of DCF attempts that collided; None without attempts."""

    twt_setup_messages: int
    twt_update_messages: int
    beacons: int

    trace_digest: str
    config: Dict[str, Any]
    """Scenario the run was produced from."""


@dataclass
class _Counters:
    generated: int = 0
    accepted_after_warmup: int = 0
    delivered: int = 0
    delivered_bits: int = 0
    buffer_drops: int = 0
    retry_drops: int = 0
    delays: List[int] = field(default_factory=list)


class MetricsCollector:
    """Collects every measurement of one run and turns it into a report."""

    def __init__(
        self,
        horizon: int,
        stations: Sequence[int],
        warmup_fraction: float = DEFAULT_WARMUP_FRACTION,
    ):
        if not 0 <= warmup_fraction < 1:
            raise ValueError("warm-up fraction must be in [0, 1).")

        self.horizon = horizon
        self.warmup = int(horizon * warmup_fraction)
        self.ledger = ChannelLedger(horizon)

        self.counters = {s: _Counters() for s in stations}
        self.queues = {s: QueueIntegral(self.warmup) for s in stations}
        self.awake = {s: AwakeTracker() for s in stations}

        self.attempts: Dict[int, int] = {s: 0 for s in stations}
        self.collided_attempts: Dict[int, int] = {s: 0 for s in stations}
        self.twt_setup_messages = 0
        self.twt_update_messages = 0
        self.beacons = 0

    def record_arrival(self, mpdu: Mpdu, accepted: bool) -> None:
        counters = self.counters[mpdu.src]
        counters.generated += 1

        if not accepted:
            counters.buffer_drops += 1
        elif mpdu.arrival_time >= self.warmup:
            counters.accepted_after_warmup += 1

    def record_delivery(self, mpdu: Mpdu, delivery_time: int) -> None:
        delay = delivery_time - mpdu.arrival_time

        if delay < 0:
            raise ConsistencyError(
                f"packet {mpdu.id} delivered at t={delivery_time} before "
                f"its arrival at t={mpdu.arrival_time}."
            )

        counters = self.counters[mpdu.src]
        counters.delivered += 1
        counters.delivered_bits += mpdu.size_bits

        if mpdu.arrival_time >= self.warmup:
            counters.delays.append(delay)

    def record_retry_drop(self, mpdus: Sequence[Mpdu]) -> None:
        for mpdu in mpdus:
            self.counters[mpdu.src].retry_drops += 1

    def sample_queue(self, station: int, now: int, occupancy: int) -> None:
        self.queues[station].sample(min(now, self.horizon), occupancy)

    def finalize(
        self,
        in_system: Dict[int, int],
        seed: int,
        trace_digest: str,
        config: Dict[str, Any],
    ) -> MetricsReport:
        """
        Close every open interval at the horizon and build the report.
        `in_system` holds the packets still buffered or in flight.
        """

        self.ledger.close()

        if self.ledger.elapsed != self.horizon:
            raise ConsistencyError(
                f"channel ledger covers {self.ledger.elapsed} us of a "
                f"{self.horizon} us run."
            )

        window = self.horizon - self.warmup
        stations = []

        for station, counters in self.counters.items():
            dropped = counters.buffer_drops + counters.retry_drops
            accounted = counters.delivered + dropped + in_system[station]

            if counters.generated != accounted:
                raise ConsistencyError(
                    f"station {station} generated {counters.generated} "
                    f"packets but {accounted} are accounted for."
                )

            queue = self.queues[station]
            queue.sample(self.horizon, queue.level)

            stations.append(
                StationReport(
                    station=station,
                    mean_delay_us=(
                        float(np.mean(counters.delays))
                        if counters.delays
                        else None
                    ),
                    mean_queue=queue.area / window if window else 0.0,
                    generated=counters.generated,
                    delivered=counters.delivered,
                    dropped=dropped,
                    retry_drops=counters.retry_drops,
                    throughput_bps=(
                        counters.delivered_bits / (self.horizon / 1e6)
                        if self.horizon
                        else 0.0
                    ),
                    awake_fraction=(
                        self.awake[station].close(self.horizon) / self.horizon
                        if self.horizon
                        else 0.0
                    ),
                    attempts=self.attempts[station],
                    collided_attempts=self.collided_attempts[station],
                )
            )

        delays = [d for c in self.counters.values() for d in c.delays]
        attempts = sum(self.attempts.values())
        collided = sum(self.collided_attempts.values())
        accepted = sum(
            c.accepted_after_warmup for c in self.counters.values()
        )

        return MetricsReport(
            seed=seed,
            duration_us=self.horizon,
            warmup_us=self.warmup,
            stations=stations,
            mean_delay_us=float(np.mean(delays)) if delays else None,
            mean_queue=(
                float(np.mean([s.mean_queue for s in stations]))
                if stations
                else 0.0
            ),
            delivered=sum(s.delivered for s in stations),
            dropped=sum(s.dropped for s in stations),
            throughput_bps=sum(s.throughput_bps for s in stations),
            offered_rate_pps=accepted / (window / 1e6) if window else 0.0,
            idle_fraction=self.ledger.fraction(ChannelState.IDLE),
            success_fraction=self.ledger.fraction(ChannelState.SUCCESS),
            collision_fraction=self.ledger.fraction(ChannelState.COLLISION),
            control_fraction=self.ledger.fraction(ChannelState.CONTROL),
            mean_awake_fraction=(
                float(np.mean([s.awake_fraction for s in stations]))
                if stations
                else 1.0
            ),
            attempts=attempts,
            collided_attempts=collided,
            collision_probability=collided / attempts if attempts else None,
            twt_setup_messages=self.twt_setup_messages,
            twt_update_messages=self.twt_update_messages,
            beacons=self.beacons,
            trace_digest=trace_digest,
            config=config,
        )
