import numpy as np
import pytest

from twtsim.v1.mu import (
    AllocationError,
    MuPolicy,
    RuAllocation,
    RuEntry,
    allocate,
    build_trigger,
    grant_sizes,
    mu_exchange_duration,
    station_query,
    validate,
)
from twtsim.v1.phy import AirtimeQuery, exchange_airtime, ppdu_airtime


A, B, C, D = 1, 2, 3, 4


def test_mixed_allocation_on_40_mhz():
    allocation = allocate(
        40, [(A, 10), (B, 5), (C, 4), (D, 9)], policy=MuPolicy.MIXED
    )
    rus = allocation.rus()

    shared = [entries for entries in rus.values() if len(entries) == 2]
    assert len(shared) == 1
    assert {e.station for e in shared[0]} == {A, D}
    assert {e.ru_tones for e in shared[0]} == {242}

    for station in (B, C):
        entry = allocation.entry(station)
        assert entry.ru_tones == 106
        assert len(rus[entry.ru_index]) == 1

    assert allocation.entry(B).ru_index != allocation.entry(C).ru_index
    assert validate(allocation) == []


def test_mu_mimo_profile_on_20_mhz():
    demands = [(station, 64) for station in range(1, 9)]

    allocation = allocate(20, demands)

    assert len(allocation.rus()) == 1
    assert {e.ru_tones for e in allocation.entries} == {242}
    assert all(len(e.stream_set) == 1 for e in allocation.entries)
    assert sorted(allocation.stations) == list(range(1, 9))
    assert validate(allocation) == []


def test_single_station_gets_full_width_mimo():
    allocation = allocate(80, [(5, 3)], policy=MuPolicy.OFDMA)

    assert allocation.entries == [RuEntry(0, 5, 996, (0, 1))]


def test_stations_beyond_max_mu_are_deferred():
    demands = [(station, 100 - station) for station in range(1, 12)]

    allocation = allocate(20, demands, max_mu=8)

    assert allocation.stations == list(range(1, 9))
    assert allocation.deferred == [9, 10, 11]


def test_stations_without_traffic_are_left_out():
    allocation = allocate(20, [(1, 0), (2, 4)])

    assert allocation.stations == [2]
    assert allocation.deferred == []

    empty = allocate(20, [(1, 0)])
    assert empty.entries == []


@pytest.mark.parametrize(
    "width,demands,max_mu",
    [(30, [(1, 1)], 8), (20, [], 8), (20, [(1, 1)], 9), (20, [(1, 1)], 0)],
)
def test_allocate_rejects_bad_requests(width, demands, max_mu):
    with pytest.raises(AllocationError):
        allocate(width, demands, max_mu=max_mu)


def test_random_allocations_validate():
    rng = np.random.default_rng(31)
    widths = [20, 40, 80, 160]

    for _ in range(10 ** 4):
        n = int(rng.integers(1, 17))
        stations = rng.choice(np.arange(1, 100), size=n, replace=False)
        demands = [
            (int(s), int(rng.integers(0, 600))) for s in stations
        ]

        allocation = allocate(
            widths[int(rng.integers(4))],
            demands,
            max_mu=int(rng.integers(1, 9)),
            policy=list(MuPolicy)[int(rng.integers(3))],
            su_streams=int(rng.integers(1, 3)),
        )

        assert validate(allocation) == []

        with_traffic = {s for s, d in demands if d > 0}
        assert set(allocation.stations) | set(allocation.deferred) == (
            with_traffic
        )


def test_mu_mimo_on_small_ru_is_a_violation():
    allocation = RuAllocation(
        20, [RuEntry(0, 1, 26, (0,)), RuEntry(0, 2, 26, (1,))]
    )

    assert any("MU-MIMO" in v for v in validate(allocation))


def test_nine_streams_on_one_ru_is_a_violation():
    entries = [RuEntry(0, s, 242, (s % 8,)) for s in range(8)]
    entries.append(RuEntry(0, 8, 242, (0,)))

    violations = validate(RuAllocation(20, entries))

    assert any("9 streams" in v for v in violations)


def test_tone_budget_violation():
    allocation = RuAllocation(
        20, [RuEntry(0, 1, 242, (0,)), RuEntry(1, 2, 106, (0,))]
    )

    assert any("budget" in v for v in validate(allocation))


def test_other_violations():
    allocation = RuAllocation(
        20,
        [
            RuEntry(0, 1, 484, (0,)),
            RuEntry(1, 1, 26, (8,)),
        ],
    )

    assert len(validate(allocation)) >= 3
    assert validate(RuAllocation(30)) != []


def test_single_station_exchange_matches_trigger_exchange(phy_config):
    allocation = allocate(20, [(1, 10)])
    ppdu = ppdu_airtime(
        AirtimeQuery(12_000, 7, spatial_streams=2), 10, phy_config
    )

    for protection in (False, True):
        assert mu_exchange_duration(
            allocation, {1: (10, 7)}, 12_000, phy_config, protection
        ) == exchange_airtime(ppdu, protection, True, phy_config)


def test_slowest_station_sets_the_duration(phy_config):
    allocation = allocate(20, [(1, 2), (2, 1)])
    shares = {1: (2, 5), 2: (1, 5)}

    slow = ppdu_airtime(station_query(allocation, 1, 5, 12_000), 2, phy_config)

    assert mu_exchange_duration(
        allocation, shares, 12_000, phy_config
    ) == exchange_airtime(slow, False, True, phy_config)


def test_eight_full_aggregates(phy_config):
    allocation = allocate(20, [(s, 64) for s in range(1, 9)])
    shares = {s: (64, 3) for s in range(1, 9)}
    ppdu = ppdu_airtime(AirtimeQuery(12_000, 3), 64, phy_config)

    assert mu_exchange_duration(
        allocation, shares, 12_000, phy_config, protection=True
    ) == 60 + 16 + 44 + 16 + 100 + 16 + ppdu + 16 + 100


def test_duration_is_monotone_in_mpdus(phy_config):
    allocation = allocate(20, [(s, 64) for s in range(1, 5)])
    rng = np.random.default_rng(8)

    for _ in range(200):
        shares = {s: (int(rng.integers(1, 64)), 4) for s in range(1, 5)}
        before = mu_exchange_duration(allocation, shares, 12_000, phy_config)

        grown = dict(shares)
        station = int(rng.integers(1, 5))
        grown[station] = (shares[station][0] + 1, 4)

        assert mu_exchange_duration(
            allocation, grown, 12_000, phy_config
        ) >= before


def test_invalid_allocation_has_no_duration(phy_config):
    allocation = RuAllocation(
        20, [RuEntry(0, 1, 26, (0,)), RuEntry(0, 2, 26, (1,))]
    )

    with pytest.raises(AllocationError):
        mu_exchange_duration(allocation, {1: (1, 0)}, 12_000, phy_config)

    with pytest.raises(AllocationError):
        mu_exchange_duration(allocate(20, [(1, 1)]), {}, 12_000, phy_config)


def test_grants_and_trigger(phy_config):
    allocation = allocate(20, [(1, 100), (2, 3)])
    limit = phy_config.max_ppdu_us

    grants = grant_sizes(
        allocation, {1: 100, 2: 3}, {1: 11, 2: 11}, 12_000, limit, phy_config
    )

    assert grants[2] == 3
    assert 3 < grants[1] <= 64
    assert ppdu_airtime(
        station_query(allocation, 1, 11, 12_000), grants[1], phy_config
    ) <= limit

    trigger = build_trigger(allocation, grants, limit)
    assert trigger.grants == grants
    assert trigger.allocation is allocation

    with pytest.raises(AllocationError):
        build_trigger(allocation, {7: 1}, limit)


def test_no_grant_when_nothing_fits(phy_config):
    allocation = allocate(20, [(1, 5)])

    grants = grant_sizes(allocation, {1: 5}, {1: 0}, 12_000, 10, phy_config)

    assert grants == {}
