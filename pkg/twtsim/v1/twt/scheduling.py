"""Placement of stations into periodic, non-overlapping TWT sessions."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SessionSlot:
    session_id: int
    offset: int
    """Start of the session inside each period, microseconds."""

    duration: int
    members: Tuple[int, ...]

    def start(self, period: int, occurrence: int) -> int:
        return occurrence * period + self.offset

    def end(self, period: int, occurrence: int) -> int:
        return self.start(period, occurrence) + self.duration


class TimelinePolicy(ABC):
    """Decides which stations share a session and when sessions happen."""

    @abstractmethod
    def build(
        self,
        num_sessions: int,
        period: int,
        stations: Sequence[int],
        rng: np.random.Generator,
    ) -> List[SessionSlot]:
        pass


def group_sizes(num_stations: int, num_sessions: int) -> List[int]:
    """Equal split; leftover stations go to the first groups."""

    base, extra = divmod(num_stations, num_sessions)
    return [base + (1 if i < extra else 0) for i in range(num_sessions)]


class UniformRandomPartition(TimelinePolicy):
    """
    Random equal-size groups, one per session. Sessions split the period in
    back-to-back windows of period // num_sessions microseconds.
    """

    def build(self, num_sessions, period, stations, rng):
        shuffled = [int(s) for s in rng.permutation(list(stations))]
        duration = period // num_sessions

        slots = []
        cursor = 0
        for session_id, size in enumerate(
            group_sizes(len(shuffled), num_sessions)
        ):
            members = tuple(sorted(shuffled[cursor:cursor + size]))
            cursor += size

            slots.append(
                SessionSlot(
                    session_id=session_id,
                    offset=session_id * duration,
                    duration=duration,
                    members=members,
                )
            )

        return slots


def build_timeline(
    num_sessions: int,
    period: int,
    stations: Sequence[int],
    rng: np.random.Generator,
    policy: Optional[TimelinePolicy] = None,
) -> List[SessionSlot]:
    if num_sessions < 1:
        raise ValueError("num_sessions must be at least 1.")

    if not stations:
        raise ValueError("cannot build a timeline without stations.")

    if num_sessions > len(stations):
        raise ValueError(
            f"{num_sessions} sessions for {len(stations)} stations would "
            "leave sessions empty."
        )

    if period < num_sessions:
        raise ValueError("period too short for the number of sessions.")

    policy = policy or UniformRandomPartition()
    slots = policy.build(num_sessions, period, stations, rng)

    logger.debug(
        "Timeline: "
        + ", ".join(
            f"session {s.session_id} @{s.offset}us x{len(s.members)}"
            for s in slots
        )
    )

    return slots
