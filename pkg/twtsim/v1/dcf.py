"""
CSMA/CA channel access with binary exponential backoff.

The station state machine (`step_station`) is a pure function. `DcfContention`
drives it over the shared channel without one event per slot: while the
channel is idle every counting station's transmission instant is known in
advance (`count_from + counter * slot`), so only the earliest one is
scheduled, and counters are brought up to date whenever the channel changes
hands. All stations hear each other and count on common slot boundaries, so
stations whose counters expire on the same boundary collide.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Set, Tuple

import numpy as np

from .engine import EventHandle, EventKind, Simulator


logger = logging.getLogger(__name__)


class ProtocolError(RuntimeError):
    pass


@dataclass
class DcfConfig:
    cw_min: int = 15
    """Contention window at retry stage 0, in slots (2^m - 1)."""

    cw_max: int = 511
    """Largest contention window, in slots (2^m - 1)."""

    slot_us: int = 9
    difs_us: int = 34

    retry_limit: int = 7
    """Failed attempts tolerated before the head A-MPDU is dropped."""

    rts_cts: bool = True
    """Protect every data exchange with RTS/CTS."""

    cts_timeout_us: int = 75
    """Wait after an unanswered RTS before the station may count again."""

    ack_timeout_us: int = 75
    """Wait after an unacknowledged PPDU when RTS/CTS is off."""

    def validate(self) -> List[str]:
        errors = []

        for name in ("cw_min", "cw_max"):
            value = getattr(self, name)
            if value < 1 or (value + 1) & value:
                errors.append(f"{name} must be of the form 2^m - 1")

        if self.cw_min > self.cw_max:
            errors.append("cw_min must not exceed cw_max")

        if self.retry_limit < 0:
            errors.append("retry_limit must be non-negative")

        return errors


class StationPhase(str, Enum):
    IDLE = "idle"
    DEFERRING = "deferring"
    COUNTING_DOWN = "counting-down"
    TRANSMITTING = "transmitting"
    WAITING_ACK = "waiting-ack"


class Observation(str, Enum):
    IDLE_SLOT = "channel-idle-slot"
    BUSY = "channel-busy"
    ACK = "ack"
    NO_ACK = "no-ack"


class DcfAction(str, Enum):
    NONE = "none"
    START_TRANSMISSION = "start-transmission"
    DROP_PACKET = "drop-packet"


@dataclass(frozen=True)
class DcfStationState:
    backoff_counter: int = 0
    retry_stage: int = 0
    phase: StationPhase = StationPhase.IDLE


class AccessKind(str, Enum):
    IDLE = "idle"
    SUCCESS = "success"
    COLLISION = "collision"


@dataclass(frozen=True)
class AccessOutcome:
    kind: AccessKind
    stations: Tuple[int, ...] = ()


def contention_window(stage: int, config: DcfConfig) -> int:
    return min((config.cw_min + 1) * 2 ** stage - 1, config.cw_max)


def draw_backoff(
    stage: int, rng: np.random.Generator, config: DcfConfig
) -> int:
    """Uniform integer in [0, CW(stage)]."""

    if stage < 0:
        raise ValueError("retry stage must be non-negative.")

    return int(rng.integers(0, contention_window(stage, config) + 1))


def resolve_access(transmitters: Set[int]) -> AccessOutcome:
    if not transmitters:
        return AccessOutcome(AccessKind.IDLE)

    stations = tuple(sorted(transmitters))

    if len(stations) == 1:
        return AccessOutcome(AccessKind.SUCCESS, stations)

    return AccessOutcome(AccessKind.COLLISION, stations)


def begin_access(
    state: DcfStationState, rng: np.random.Generator, config: DcfConfig
) -> DcfStationState:
    """An idle station with traffic draws a backoff at its current stage."""

    if state.phase != StationPhase.IDLE:
        return state

    return replace(
        state,
        backoff_counter=draw_backoff(state.retry_stage, rng, config),
        phase=StationPhase.COUNTING_DOWN,
    )


def step_station(
    state: DcfStationState,
    observation: Observation,
    rng: np.random.Generator,
    config: DcfConfig,
    slots: int = 1,
) -> Tuple[DcfStationState, DcfAction]:
    """
    One CSMA/CA transition. `slots` lets a run of idle slots be applied at
    once; it must not exceed the remaining backoff counter.
    """

    phase = state.phase

    if phase == StationPhase.IDLE and observation in (
        Observation.IDLE_SLOT,
        Observation.BUSY,
    ):
        return state, DcfAction.NONE

    if phase in (StationPhase.DEFERRING, StationPhase.COUNTING_DOWN):
        if observation == Observation.BUSY:
            deferring = replace(state, phase=StationPhase.DEFERRING)
            return deferring, DcfAction.NONE

        if observation == Observation.IDLE_SLOT:
            if not 0 <= slots <= state.backoff_counter:
                raise ProtocolError(
                    f"{slots} idle slots exceed the backoff counter "
                    f"{state.backoff_counter}."
                )

            counter = state.backoff_counter - slots

            if counter == 0:
                return (
                    replace(
                        state,
                        backoff_counter=0,
                        phase=StationPhase.TRANSMITTING,
                    ),
                    DcfAction.START_TRANSMISSION,
                )

            return (
                replace(
                    state,
                    backoff_counter=counter,
                    phase=StationPhase.COUNTING_DOWN,
                ),
                DcfAction.NONE,
            )

    if phase in (StationPhase.TRANSMITTING, StationPhase.WAITING_ACK):
        if observation == Observation.BUSY:
            waiting = replace(state, phase=StationPhase.WAITING_ACK)
            return waiting, DcfAction.NONE

        if observation == Observation.ACK:
            return (
                DcfStationState(
                    backoff_counter=draw_backoff(0, rng, config),
                    retry_stage=0,
                    phase=StationPhase.COUNTING_DOWN,
                ),
                DcfAction.NONE,
            )

        if observation == Observation.NO_ACK:
            if state.retry_stage >= config.retry_limit:
                return (
                    DcfStationState(
                        backoff_counter=draw_backoff(0, rng, config),
                        retry_stage=0,
                        phase=StationPhase.COUNTING_DOWN,
                    ),
                    DcfAction.DROP_PACKET,
                )

            stage = state.retry_stage + 1
            return (
                DcfStationState(
                    backoff_counter=draw_backoff(stage, rng, config),
                    retry_stage=stage,
                    phase=StationPhase.COUNTING_DOWN,
                ),
                DcfAction.NONE,
            )

    raise ProtocolError(
        f"observation {observation.value} is illegal in phase {phase.value}."
    )


@dataclass
class DcfMember:
    station: int
    rng: np.random.Generator
    state: DcfStationState = field(default_factory=DcfStationState)

    count_from: Optional[int] = None
    """Slot boundary from which the counter runs; None while frozen."""

    attempts: int = 0
    collided_attempts: int = 0

    @property
    def contending(self) -> bool:
        return self.state.phase in (
            StationPhase.COUNTING_DOWN,
            StationPhase.DEFERRING,
        )


class DcfContention:
    """
    Backoff bookkeeping of every DCF-capable station of a BSS.

    The owner tells the component when the channel is released (`resume`),
    taken by someone else (`freeze`) or when eligibility changed
    (`refresh`), and receives the outcome of every access through
    `on_access(outcome, now)`.
    """

    def __init__(
        self,
        simulator: Simulator,
        config: DcfConfig,
        on_access: Callable[[AccessOutcome, int], None],
        eligible: Callable[[int, int], bool],
    ):
        self.simulator = simulator
        self.config = config
        self.members: Dict[int, DcfMember] = {}

        self._on_access = on_access
        self._eligible = eligible
        self._idle_since: Optional[int] = None
        self._pending: Optional[EventHandle] = None

        simulator.register(EventKind.SLOT_BOUNDARY, self._on_slot_boundary)

    def add_member(self, station: int, rng: np.random.Generator) -> None:
        self.members[station] = DcfMember(station=station, rng=rng)

    @property
    def channel_idle(self) -> bool:
        return self._idle_since is not None

    def _aligned_start(self, now: int) -> int:
        """First common slot boundary at or after `now`."""

        start = self._idle_since + self.config.difs_us

        if now <= start:
            return start

        slot = self.config.slot_us
        return start + -(-(now - start) // slot) * slot

    def _elapsed_slots(self, member: DcfMember, now: int) -> int:
        if member.count_from is None or now <= member.count_from:
            return 0

        return (now - member.count_from) // self.config.slot_us

    def _stop_counting(self, member: DcfMember, now: int) -> None:
        """Apply the idle slots completed before `now`, then freeze."""

        if member.count_from is None:
            return

        # A counter expiring exactly at `now` loses the race to whoever
        # takes the channel at `now`.
        counter = member.state.backoff_counter
        elapsed = min(self._elapsed_slots(member, now), max(counter - 1, 0))
        state = member.state

        if elapsed > 0:
            state, _ = step_station(
                state,
                Observation.IDLE_SLOT,
                member.rng,
                self.config,
                slots=elapsed,
            )

        state, _ = step_station(
            state, Observation.BUSY, member.rng, self.config
        )
        member.state = state
        member.count_from = None

    def join(self, station: int, now: int) -> None:
        """Station got traffic; it starts a backoff if it was idle."""

        member = self.members[station]
        member.state = begin_access(member.state, member.rng, self.config)
        self.refresh(now)

    def resume(self, now: int) -> None:
        """The channel became idle at `now`."""

        self._idle_since = now
        self.refresh(now)

    def freeze(self, now: int) -> None:
        """Someone else takes the channel at `now`."""

        self.simulator.cancel(self._pending)
        self._pending = None

        for member in self.members.values():
            self._stop_counting(member, now)

        self._idle_since = None

    def refresh(self, now: int) -> None:
        """Re-evaluate who counts and reschedule the next access."""

        if self._idle_since is None:
            return

        for member in self.members.values():
            eligible = self._eligible(member.station, now)

            if member.count_from is not None and not eligible:
                self._stop_counting(member, now)

            elif member.contending and member.count_from is None and eligible:
                member.count_from = self._aligned_start(now)

        self._reschedule()

    def _transmission_time(self, member: DcfMember) -> int:
        return (
            member.count_from
            + member.state.backoff_counter * self.config.slot_us
        )

    def _reschedule(self) -> None:
        counting = [
            m for m in self.members.values() if m.count_from is not None
        ]
        next_time = min(
            (self._transmission_time(m) for m in counting), default=None
        )

        if self._pending is not None:
            if next_time == self._pending.fire_time:
                return

            self.simulator.cancel(self._pending)
            self._pending = None

        if next_time is not None:
            self._pending = self.simulator.schedule_at(
                next_time, EventKind.SLOT_BOUNDARY
            )

    def _on_slot_boundary(self, event) -> None:
        now = event.fire_time
        self._pending = None

        transmitters = set()

        for member in self.members.values():
            if member.count_from is None:
                continue

            if self._transmission_time(member) == now and self._eligible(
                member.station, now
            ):
                member.state, action = step_station(
                    member.state,
                    Observation.IDLE_SLOT,
                    member.rng,
                    self.config,
                    slots=member.state.backoff_counter,
                )
                assert action == DcfAction.START_TRANSMISSION
                member.count_from = None
                transmitters.add(member.station)
            else:
                self._stop_counting(member, now)

        self._idle_since = None

        outcome = resolve_access(transmitters)

        for station in outcome.stations:
            member = self.members[station]
            member.attempts += 1

            if outcome.kind == AccessKind.COLLISION:
                member.collided_attempts += 1

        self._on_access(outcome, now)

    def complete(self, station: int, acknowledged: bool) -> DcfAction:
        """Feed the exchange result back into the station state machine."""

        member = self.members[station]
        member.state, action = step_station(
            member.state,
            Observation.ACK if acknowledged else Observation.NO_ACK,
            member.rng,
            self.config,
        )
        return action

    def go_idle(self, station: int) -> None:
        """A station without traffic abandons its pending backoff."""

        member = self.members[station]
        member.count_from = None
        member.state = replace(
            member.state, backoff_counter=0, phase=StationPhase.IDLE
        )

    def withdraw(
        self, outcome: AccessOutcome, stations: List[int]
    ) -> AccessOutcome:
        """
        Take back the attempt of transmitters that had nothing left to send
        and return the access as seen by the others.
        """

        for station in stations:
            member = self.members[station]
            member.attempts -= 1

            if outcome.kind == AccessKind.COLLISION:
                member.collided_attempts -= 1

            self.go_idle(station)

        remaining = resolve_access(set(outcome.stations) - set(stations))

        if (
            outcome.kind == AccessKind.COLLISION
            and remaining.kind == AccessKind.SUCCESS
        ):
            self.members[remaining.stations[0]].collided_attempts -= 1

        return remaining
