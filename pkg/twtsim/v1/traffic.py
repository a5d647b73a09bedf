"""Poisson packet generation and per-station drop-tail FIFO buffers."""

import itertools
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Iterator, List

import numpy as np


DEFAULT_MPDU_BITS = 12_000
DEFAULT_BUFFER_PACKETS = 500


@dataclass
class Mpdu:
    id: int
    """Unique within a run."""

    src: int
    """Transmitting station id."""

    dst: int
    """Receiving station id (the AP for uplink traffic)."""

    size_bits: int
    arrival_time: int
    """Microsecond at which the packet entered the source buffer."""


class EnqueueResult(str, Enum):
    ACCEPTED = "accepted"
    DROPPED = "dropped"


@dataclass
class StationBuffer:
    capacity: int = DEFAULT_BUFFER_PACKETS
    """Maximum number of queued packets."""

    queue: Deque[Mpdu] = field(default_factory=deque)

    drop_count: int = 0
    """Packets discarded because the buffer was full."""

    def __len__(self) -> int:
        return len(self.queue)


def next_interarrival(
    load_bps: float, size_bits: int, rng: np.random.Generator
) -> int:
    """Exponential gap with mean size_bits / load_bps, in microseconds."""

    if load_bps <= 0:
        raise ValueError("traffic load must be positive.")

    mean_us = size_bits / load_bps * 1e6

    return max(1, int(round(rng.exponential(mean_us))))


def enqueue(buffer: StationBuffer, mpdu: Mpdu) -> EnqueueResult:
    if len(buffer.queue) >= buffer.capacity:
        buffer.drop_count += 1
        return EnqueueResult.DROPPED

    buffer.queue.append(mpdu)
    return EnqueueResult.ACCEPTED


def dequeue_burst(buffer: StationBuffer, max_n: int) -> List[Mpdu]:
    """Remove and return up to `max_n` oldest packets."""

    if max_n < 1:
        raise ValueError("max_n must be at least 1.")

    count = min(max_n, len(buffer.queue))

    return [buffer.queue.popleft() for _ in range(count)]


@dataclass
class PoissonSource:
    """Arrival process of one station."""

    station: int
    dst: int
    load_bps: float
    size_bits: int
    rng: np.random.Generator
    ids: Iterator[int] = field(default_factory=itertools.count)

    def next_arrival(self, now: int) -> int:
        return now + next_interarrival(self.load_bps, self.size_bits, self.rng)

    def packet(self, now: int) -> Mpdu:
        return Mpdu(
            id=next(self.ids),
            src=self.station,
            dst=self.dst,
            size_bits=self.size_bits,
            arrival_time=now,
        )
