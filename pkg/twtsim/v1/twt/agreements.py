"""
TWT agreements: parameters, setup messages, the negotiation state machine,
wake-time arithmetic and broadcast sessions.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Set, Tuple

from ..types import JSONDataclassMixin


logger = logging.getLogger(__name__)

MIN_WAKE_DURATION_US = 256
"""Smallest minimum wake duration, and its encoding unit."""

MAX_AGREEMENTS = 8
"""Agreement ids are 3-bit values."""


class NegotiationError(ValueError):
    pass


class AgreementLimitError(ValueError):
    pass


class SetupCommand(str, Enum):
    REQUEST = "request"
    SUGGEST = "suggest"
    DEMAND = "demand"
    ACCEPT = "accept"
    ALTERNATE = "alternate"
    DICTATE = "dictate"
    REJECT = "reject"


class Direction(str, Enum):
    REQUEST = "request"
    RESPONSE = "response"


REQUEST_COMMANDS = {
    SetupCommand.REQUEST,
    SetupCommand.SUGGEST,
    SetupCommand.DEMAND,
}
RESPONSE_COMMANDS = {
    SetupCommand.ACCEPT,
    SetupCommand.ALTERNATE,
    SetupCommand.DICTATE,
    SetupCommand.REJECT,
}


@dataclass(frozen=True)
class TwtParams(JSONDataclassMixin):
    target_wake_time: int
    """First (or next announced) wake time, microseconds."""

    wake_interval: int
    """Period between sessions; 0 for a single session."""

    min_wake_duration: int
    """Microseconds the station stays awake from each wake time."""

    channel: int = 0
    protection: bool = True
    """Session exchanges are protected by (MU-)RTS/CTS."""

    trigger_enabled: bool = True
    implicit: bool = True
    announced: bool = False

    def violations(self) -> List[str]:
        errors = []

        if self.min_wake_duration < MIN_WAKE_DURATION_US:
            errors.append(
                f"min_wake_duration must be at least {MIN_WAKE_DURATION_US} us"
            )

        if self.implicit and self.wake_interval <= 0:
            errors.append("implicit agreements need a positive wake_interval")

        if self.target_wake_time < 0 or self.wake_interval < 0:
            errors.append("wake times must be non-negative")

        return errors


@dataclass(frozen=True)
class BroadcastInfo(JSONDataclassMixin):
    session_id: int
    next_target_beacon: int
    """Time of the next beacon carrying this session's parameters."""

    listen_interval: int
    """Beacons between two beacons carrying this session's parameters."""


@dataclass(frozen=True)
class TwtMessage(JSONDataclassMixin):
    direction: Direction
    command: SetupCommand
    params: Optional[TwtParams] = None
    """Absent for Reject and for a Request without preference."""

    broadcast: Optional[BroadcastInfo] = None
    agreement_id: int = 0

    def violations(self) -> List[str]:
        errors = []

        expected = (
            REQUEST_COMMANDS
            if self.direction == Direction.REQUEST
            else RESPONSE_COMMANDS
        )
        if self.command not in expected:
            errors.append(
                f"{self.command.value} is not a {self.direction.value} command"
            )

        optional_params = (SetupCommand.REQUEST, SetupCommand.REJECT)
        if self.params is None and self.command not in optional_params:
            errors.append(f"{self.command.value} must carry parameters")

        if self.command == SetupCommand.REJECT and self.params is not None:
            errors.append("reject carries no parameters")

        if self.params is not None:
            errors += self.params.violations()

        if not 0 <= self.agreement_id < MAX_AGREEMENTS:
            errors.append("agreement_id must be in 0..7")

        return errors


def request(command: SetupCommand, params=None, **kwargs) -> TwtMessage:
    return TwtMessage(Direction.REQUEST, command, params, **kwargs)


def response(command: SetupCommand, params=None, **kwargs) -> TwtMessage:
    return TwtMessage(Direction.RESPONSE, command, params, **kwargs)


@dataclass
class ApPolicy:
    preferred: TwtParams
    """Parameters the AP proposes when it picks them."""

    accepts: Optional[Callable[[TwtParams], bool]] = None
    """Acceptable-parameter predicate; defaults to equality with preferred."""

    max_rounds: int = 4
    """Request/response pairs before the AP gives up."""

    dictate: bool = False
    """Answer Request with Dictate instead of Accept."""

    broadcast: Optional[BroadcastInfo] = None
    """Set when the AP is negotiating membership of a broadcast session."""

    def acceptable(self, params: Optional[TwtParams]) -> bool:
        if params is None or params.violations():
            return False

        if self.accepts is None:
            return params == self.preferred

        return self.accepts(params)


def negotiate(
    incoming: TwtMessage, policy: ApPolicy, round: int = 1
) -> TwtMessage:
    """AP answer to one setup request; `round` counts from 1."""

    if incoming.direction != Direction.REQUEST or incoming.violations():
        raise NegotiationError(
            f"malformed setup request: {incoming.violations() or 'direction'}"
        )

    if not 1 <= round <= policy.max_rounds:
        raise NegotiationError(
            f"round {round} outside 1..{policy.max_rounds}."
        )

    def answer(command, params=None):
        return response(
            command,
            params,
            broadcast=policy.broadcast if params is not None else None,
            agreement_id=incoming.agreement_id,
        )

    last_round = round == policy.max_rounds
    command = incoming.command

    if command == SetupCommand.DEMAND:
        if policy.acceptable(incoming.params):
            return answer(SetupCommand.ACCEPT, incoming.params)

        return answer(SetupCommand.REJECT)

    if command == SetupCommand.SUGGEST:
        if policy.acceptable(incoming.params):
            return answer(SetupCommand.ACCEPT, incoming.params)

        if last_round:
            return answer(SetupCommand.REJECT)

        return answer(SetupCommand.ALTERNATE, policy.preferred)

    # Request: the AP specifies the parameters.
    if not policy.dictate:
        return answer(SetupCommand.ACCEPT, policy.preferred)

    if last_round:
        return answer(SetupCommand.REJECT)

    return answer(SetupCommand.DICTATE, policy.preferred)


@dataclass
class Dialogue:
    messages: List[TwtMessage]

    @property
    def outcome(self) -> TwtMessage:
        return self.messages[-1]

    @property
    def accepted(self) -> bool:
        return self.outcome.command == SetupCommand.ACCEPT


def run_dialogue(first: TwtMessage, policy: ApPolicy) -> Dialogue:
    """
    Setup dialogue of a requesting station that concedes to the AP: after
    Alternate it suggests the alternative, after Dictate it demands it.
    """

    messages = []
    message = first

    for round in range(1, policy.max_rounds + 1):
        answer = negotiate(message, policy, round)
        messages += [message, answer]

        if answer.command in (SetupCommand.ACCEPT, SetupCommand.REJECT):
            break

        follow_up = (
            SetupCommand.SUGGEST
            if answer.command == SetupCommand.ALTERNATE
            else SetupCommand.DEMAND
        )
        message = request(
            follow_up, answer.params, agreement_id=first.agreement_id
        )

    return Dialogue(messages)


class AgreementKind(str, Enum):
    INDIVIDUAL = "individual"
    BROADCAST = "broadcast"


class AgreementState(str, Enum):
    NEGOTIATING = "negotiating"
    ACTIVE = "active"
    TORN_DOWN = "torn-down"


@dataclass
class TwtAgreement:
    agreement_id: int
    station: int
    params: TwtParams
    kind: AgreementKind = AgreementKind.INDIVIDUAL
    session_id: Optional[int] = None
    """Broadcast session the agreement binds the station to."""

    state: AgreementState = AgreementState.NEGOTIATING

    announced_next: Optional[int] = None
    """Explicit agreements: last target wake time announced by the AP."""


@dataclass
class AgreementTable:
    """Agreements of every station, at most 8 live ones per station."""

    agreements: Dict[int, List[TwtAgreement]] = field(default_factory=dict)

    def live(self, station: int) -> List[TwtAgreement]:
        return [
            a
            for a in self.agreements.get(station, [])
            if a.state != AgreementState.TORN_DOWN
        ]

    def active(self, station: int) -> List[TwtAgreement]:
        return [
            a for a in self.live(station) if a.state == AgreementState.ACTIVE
        ]

    def open(
        self,
        station: int,
        params: TwtParams,
        kind: AgreementKind = AgreementKind.INDIVIDUAL,
        session_id: Optional[int] = None,
    ) -> TwtAgreement:
        used = {a.agreement_id for a in self.live(station)}
        free = [i for i in range(MAX_AGREEMENTS) if i not in used]

        if not free:
            raise AgreementLimitError(
                f"station {station} already holds {MAX_AGREEMENTS} agreements."
            )

        agreement = TwtAgreement(
            agreement_id=free[0],
            station=station,
            params=params,
            kind=kind,
            session_id=session_id,
        )
        self.agreements.setdefault(station, []).append(agreement)

        return agreement

    def settle(self, agreement: TwtAgreement, dialogue: Dialogue) -> None:
        """Activate with the accepted parameters, or tear down."""

        if dialogue.accepted:
            agreement.params = dialogue.outcome.params
            agreement.state = AgreementState.ACTIVE
        else:
            agreement.state = AgreementState.TORN_DOWN

    def teardown(self, agreement: TwtAgreement) -> None:
        agreement.state = AgreementState.TORN_DOWN


def next_wake_time(agreement: TwtAgreement, now: int) -> Optional[int]:
    """Next wake time strictly after `now`, None if none is known yet."""

    if agreement.state != AgreementState.ACTIVE:
        raise NegotiationError(
            f"agreement {agreement.agreement_id} of station "
            f"{agreement.station} is not active."
        )

    params = agreement.params

    if params.implicit:
        first = params.target_wake_time

        if now < first:
            return first

        periods = (now - first) // params.wake_interval + 1
        return first + periods * params.wake_interval

    announced = (
        agreement.announced_next
        if agreement.announced_next is not None
        else params.target_wake_time
    )

    return announced if announced > now else None


def announce(agreement: TwtAgreement, target_wake_time: int) -> None:
    """AP announcement of the next session of an explicit agreement."""

    agreement.announced_next = target_wake_time


@dataclass
class BroadcastSession:
    session_id: int
    params: TwtParams
    members: Set[int] = field(default_factory=set)
    next_target_beacon: int = 0
    listen_interval: int = 1

    updates: int = 0
    """Parameter updates announced through beacons."""

    def info(self) -> BroadcastInfo:
        return BroadcastInfo(
            session_id=self.session_id,
            next_target_beacon=self.next_target_beacon,
            listen_interval=self.listen_interval,
        )

    def carries_info(self, beacon_time: int, beacon_interval_us: int) -> bool:
        """Beacon at `beacon_time` is one the members must receive."""

        spacing = self.listen_interval * beacon_interval_us

        return (
            beacon_time >= self.next_target_beacon
            and (beacon_time - self.next_target_beacon) % spacing == 0
        )

    def apply_update(self, params: TwtParams) -> None:
        self.params = params
        self.updates += 1


class WakeState(str, Enum):
    AWAKE = "awake"
    DOZING = "dozing"


@dataclass
class WakeSchedule:
    """When a station must be awake."""

    twt: bool = False
    """Non-TWT stations are always awake."""

    windows: List[Tuple[int, int, int]] = field(default_factory=list)
    """Periodic (start, duration, period) session windows."""

    beacons: Optional[Tuple[int, int, int]] = None
    """Periodic (first, spacing, duration) beacon reception windows."""


def _inside(now: int, start: int, duration: int, period: int) -> bool:
    if now < start:
        return False

    if period <= 0:
        return now < start + duration

    return (now - start) % period < duration


def wake_state(schedule: WakeSchedule, now: int) -> WakeState:
    if not schedule.twt:
        return WakeState.AWAKE

    windows = list(schedule.windows)
    if schedule.beacons is not None:
        first, spacing, duration = schedule.beacons
        windows.append((first, duration, spacing))

    if any(_inside(now, *window) for window in windows):
        return WakeState.AWAKE

    return WakeState.DOZING
