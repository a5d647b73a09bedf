"""
Closed-form count of the TWT management frames a BSS exchanges over a
horizon, for individual/broadcast and periodic/aperiodic agreements.

Setup costs one request/response pair per station in every mode. Periodic
agreements are never updated. Aperiodic individual agreements need one
message per station and update, while a broadcast update reaches every
member of the session with a single message. A BSS without stations
sends no updates.
"""

import logging
from argparse import ArgumentParser
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Sequence

import pandas as pd


logger = logging.getLogger(__name__)


class OverheadMode(str, Enum):
    INDIVIDUAL_PERIODIC = "IP"
    INDIVIDUAL_APERIODIC = "IA"
    BROADCAST_PERIODIC = "BP"
    BROADCAST_APERIODIC = "BA"


MODE_ORDER = [
    OverheadMode.INDIVIDUAL_PERIODIC,
    OverheadMode.INDIVIDUAL_APERIODIC,
    OverheadMode.BROADCAST_PERIODIC,
    OverheadMode.BROADCAST_APERIODIC,
]

REFERENCE_VALUES: Dict[tuple, int] = {
    (OverheadMode.BROADCAST_APERIODIC, 10, 100): 30,
}
"""Published cells that disagree with 2N + k, keyed by (mode, N, k)."""


@dataclass
class OverheadQuery:
    mode: OverheadMode
    n_stations: int
    updates_per_hour: int
    """Parameter updates over the horizon (k)."""

    per_exchange_us: int = 2000
    """Airtime of one control message and its acknowledgment."""

    horizon_s: float = 3600.0


@dataclass
class OverheadResult:
    setup_messages: int
    update_messages: int
    total: int
    messages_per_second: float
    airtime_fraction: float


def control_messages(query: OverheadQuery) -> OverheadResult:
    n, k = query.n_stations, query.updates_per_hour

    if n < 0 or k < 0:
        raise ValueError("station and update counts must be non-negative.")

    if query.horizon_s <= 0:
        raise ValueError("horizon must be positive.")

    setup = 2 * n
    updates = {
        OverheadMode.INDIVIDUAL_PERIODIC: 0,
        OverheadMode.INDIVIDUAL_APERIODIC: k * n,
        OverheadMode.BROADCAST_PERIODIC: 0,
        OverheadMode.BROADCAST_APERIODIC: k if n > 0 else 0,
    }[query.mode]

    total = setup + updates
    airtime = total * query.per_exchange_us / (query.horizon_s * 1e6)

    return OverheadResult(
        setup_messages=setup,
        update_messages=updates,
        total=total,
        messages_per_second=total / query.horizon_s,
        airtime_fraction=min(airtime, 1.0),
    )


def table_report(
    n_values: Sequence[int],
    k_values: Sequence[int],
    per_exchange_us: int = 2000,
    horizon_s: float = 3600.0,
) -> pd.DataFrame:
    """One row per (N, k, mode): N outer, k inner, modes IP, IA, BP, BA."""

    if not n_values or not k_values:
        raise ValueError("table needs at least one N and one k.")

    rows = []

    for n in n_values:
        for k in k_values:
            for mode in MODE_ORDER:
                result = control_messages(
                    OverheadQuery(mode, n, k, per_exchange_us, horizon_s)
                )
                reference = REFERENCE_VALUES.get((mode, n, k))

                rows.append(
                    {
                        "n_stations": n,
                        "updates_per_hour": k,
                        "mode": mode.value,
                        "setup_messages": result.setup_messages,
                        "update_messages": result.update_messages,
                        "total": result.total,
                        "messages_per_second": result.messages_per_second,
                        "airtime_fraction": result.airtime_fraction,
                        "note": (
                            f"published value {reference}, 2N+k gives "
                            f"{result.total}"
                            if reference is not None
                            else ""
                        ),
                    }
                )

    return pd.DataFrame(rows)


if __name__ == "__main__":
    parser = ArgumentParser()

    parser.add_argument("--n", type=int, nargs="+", default=[10, 100])
    parser.add_argument("--k", type=int, nargs="+", default=[10, 100])
    parser.add_argument("--output", type=str)

    args = parser.parse_args()

    table = table_report(args.n, args.k)

    if args.output:
        table.to_csv(args.output, index=False)
    else:
        print(table.to_string(index=False))
