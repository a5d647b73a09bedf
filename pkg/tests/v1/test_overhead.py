import pytest

from twtsim.v1.overhead import (
    MODE_ORDER,
    REFERENCE_VALUES,
    OverheadMode,
    OverheadQuery,
    control_messages,
    table_report,
)


IP, IA, BP, BA = MODE_ORDER

PUBLISHED = {
    (10, 10): [20, 120, 20, 30],
    (10, 100): [20, 1020, 20, 30],
    (100, 10): [200, 1200, 200, 210],
    (100, 100): [200, 10200, 200, 300],
}
"""Total control messages in one hour, modes IP, IA, BP, BA."""


def _total(mode, n, k):
    return control_messages(OverheadQuery(mode, n, k)).total


@pytest.mark.parametrize(
    "mode,n,k,total",
    [
        (IP, 10, 10, 20),
        (IA, 100, 100, 10200),
        (BA, 100, 10, 210),
        (IA, 10, 100, 1020),
        (BA, 10, 100, 120),
    ],
)
def test_control_messages(mode, n, k, total):
    assert _total(mode, n, k) == total


@pytest.mark.parametrize("mode", list(OverheadMode))
def test_empty_bss(mode):
    result = control_messages(OverheadQuery(mode, 0, 0))

    assert result.total == 0
    assert result.airtime_fraction == 0.0


def test_result_fields():
    result = control_messages(OverheadQuery(IA, 100, 100))

    assert result.setup_messages == 200
    assert result.update_messages == 10_000
    assert result.total == result.setup_messages + result.update_messages
    assert result.messages_per_second == pytest.approx(10200 / 3600)
    # 10200 exchanges of 2 ms in one hour.
    assert result.airtime_fraction == pytest.approx(0.005667, abs=1e-6)


def test_airtime_fraction_is_capped():
    query = OverheadQuery(IA, 1000, 1000, per_exchange_us=2000, horizon_s=1)

    assert control_messages(query).airtime_fraction == 1.0


@pytest.mark.parametrize(
    "query",
    [OverheadQuery(IP, -1, 0), OverheadQuery(IP, 1, -1),
     OverheadQuery(IP, 1, 1, horizon_s=0)],
)
def test_invalid_queries(query):
    with pytest.raises(ValueError):
        control_messages(query)


def test_published_table():
    table = table_report([10, 100], [10, 100])

    assert len(table) == 16
    assert list(table["mode"][:4]) == ["IP", "IA", "BP", "BA"]

    for (n, k), totals in PUBLISHED.items():
        rows = table[
            (table["n_stations"] == n) & (table["updates_per_hour"] == k)
        ]

        for mode, published, (_, row) in zip(
            MODE_ORDER, totals, rows.iterrows()
        ):
            assert row["mode"] == mode.value

            if (mode, n, k) in REFERENCE_VALUES:
                assert row["total"] == 2 * n + k
                assert str(published) in row["note"]
            else:
                assert row["total"] == published
                assert row["note"] == ""


def test_first_block_and_order():
    table = table_report([10], [10])

    assert list(table["total"]) == [20, 120, 20, 30]

    table = table_report([10, 100], [10, 100])
    assert list(zip(table["n_stations"], table["updates_per_hour"]))[::4] == [
        (10, 10),
        (10, 100),
        (100, 10),
        (100, 100),
    ]


def test_no_stations_no_messages():
    table = table_report([0], [5])

    assert len(table) == 4
    assert (table["total"] == 0).all()


def test_broadcast_updates_need_a_member():
    empty = control_messages(
        OverheadQuery(OverheadMode.BROADCAST_APERIODIC, 0, 100)
    )
    single = control_messages(
        OverheadQuery(OverheadMode.BROADCAST_APERIODIC, 1, 100)
    )

    assert empty.update_messages == 0
    assert empty.airtime_fraction == 0
    assert single.update_messages == 100


def test_empty_axes_rejected():
    with pytest.raises(ValueError):
        table_report([], [10])


def test_mode_ordering_and_linearity():
    for n in range(1, 30, 7):
        for k in range(1, 30, 5):
            ip, ia, bp, ba = (_total(mode, n, k) for mode in MODE_ORDER)

            assert ip == bp <= ba <= ia
            assert ip == _total(IP, n, k + 11)
            assert _total(BA, n, k + 1) - ba == 1
            assert _total(IA, n + 1, k) - ia == 2 + k
