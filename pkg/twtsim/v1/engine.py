"""
Deterministic discrete-event core.

Time is an integer number of microseconds since the start of the simulation.
Events are delivered in (fire_time, seq) order, where seq is the insertion
counter, so runs with the same configuration and seed deliver the same trace.
"""

import hashlib
import heapq
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np


logger = logging.getLogger(__name__)

MAX_SEED = 2 ** 64


class SchedulingError(ValueError):
    """Raised when an event would be delivered before the current clock."""


class EventKind(str, Enum):
    ARRIVAL = "arrival"
    SLOT_BOUNDARY = "slot-boundary"
    TRANSMISSION_END = "transmission-end"
    SESSION_START = "session-start"
    SESSION_END = "session-end"
    BEACON = "beacon"
    TIMER = "timer"


@dataclass
class Event:
    fire_time: int
    """Microseconds since simulation start."""

    kind: EventKind
    """What happens, used to dispatch to the registered handler."""

    payload: Any = None
    """Handler-specific data."""

    seq: int = -1
    """Insertion counter, assigned by the simulator when scheduled."""


@dataclass(frozen=True)
class EventHandle:
    seq: int
    fire_time: int


class StreamPurpose(IntEnum):
    """One independent random stream per (station, purpose) pair."""

    TOPOLOGY = 0
    TRAFFIC = 1
    BACKOFF = 2
    TIMELINE = 3
    NEGOTIATION = 4


@dataclass(frozen=True)
class RngStream:
    seed: int
    """64-bit base seed of the run."""

    stream_id: int
    """Identifies the stream inside the run."""

    def generator(self) -> np.random.Generator:
        """Fresh generator; equal (seed, stream_id) give equal draws."""

        if not 0 <= self.seed < MAX_SEED:
            raise ValueError("seed must be an unsigned 64-bit integer.")

        sequence = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id,)
        )
        return np.random.Generator(np.random.PCG64(sequence))


def stream_id(purpose: StreamPurpose, station: Optional[int] = None) -> int:
    """Station-less streams use slot 0, station `s` uses slot `s + 1`."""

    slot = 0 if station is None else station + 1
    return slot * len(StreamPurpose) + int(purpose)


@dataclass
class RngRegistry:
    seed: int
    _generators: Dict[int, np.random.Generator] = field(
        default_factory=dict, repr=False
    )

    def stream(
        self, purpose: StreamPurpose, station: Optional[int] = None
    ) -> np.random.Generator:
        key = stream_id(purpose, station)

        if key not in self._generators:
            self._generators[key] = RngStream(self.seed, key).generator()

        return self._generators[key]


class Simulator:
    """Single-threaded event loop with cancellable events."""

    def __init__(self, seed: int = 0):
        self.now = 0
        self.rng = RngRegistry(seed)

        self._queue: List[Tuple[int, int, Event]] = []
        self._live: Dict[int, Event] = {}
        self._counter = itertools.count()
        self._handlers: Dict[EventKind, Callable[[Event], None]] = {}
        self._trace = hashlib.sha256()

    def register(
        self, kind: EventKind, handler: Callable[[Event], None]
    ) -> None:
        self._handlers[kind] = handler

    def schedule(self, event: Event) -> EventHandle:
        if event.fire_time < self.now:
            raise SchedulingError(
                f"cannot schedule {event.kind.value} at t={event.fire_time}"
                f" before the clock (t={self.now})."
            )

        event.seq = next(self._counter)
        heapq.heappush(self._queue, (event.fire_time, event.seq, event))
        self._live[event.seq] = event

        return EventHandle(seq=event.seq, fire_time=event.fire_time)

    def schedule_at(
        self, fire_time: int, kind: EventKind, payload: Any = None
    ) -> EventHandle:
        return self.schedule(Event(int(fire_time), kind, payload))

    def cancel(self, handle: Optional[EventHandle]) -> bool:
        """True iff the event had not fired yet; it will never be delivered."""

        if handle is None:
            return False

        return self._live.pop(handle.seq, None) is not None

    def pending(self, handle: Optional[EventHandle]) -> bool:
        return handle is not None and handle.seq in self._live

    def run(self, until: int) -> Tuple[int, int]:
        """Deliver every event with fire_time <= until, in order."""

        if until < self.now:
            raise SchedulingError(
                f"cannot run until t={until}, clock is at t={self.now}."
            )

        delivered = 0

        while self._queue and self._queue[0][0] <= until:
            fire_time, seq, event = heapq.heappop(self._queue)

            # Cancelled events are removed lazily.
            if self._live.pop(seq, None) is None:
                continue

            self.now = fire_time
            self._trace.update(
                f"{fire_time}:{seq}:{event.kind.value};".encode()
            )

            handler = self._handlers.get(event.kind)
            if handler is not None:
                handler(event)

            delivered += 1

        self.now = until
        logger.debug(f"Delivered {delivered} events until t={until}.")

        return delivered, self.now

    @property
    def trace_digest(self) -> str:
        """SHA-256 over the (time, seq, kind) trace delivered so far."""

        return self._trace.hexdigest()
