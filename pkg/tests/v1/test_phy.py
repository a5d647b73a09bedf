import math

import numpy as np
import pytest

from twtsim.v1.phy import (
    MCS_INFEASIBLE,
    AirtimeQuery,
    PhyError,
    exchange_airtime,
    exchange_overhead,
    exchange_segments,
    max_mpdus_within,
    path_loss_db,
    ppdu_airtime,
    received_power_dbm,
    select_mcs,
    snr_db,
)
from twtsim.v1.types import ChannelState


def test_path_loss_at_reference_distance(phy_config):
    expected = (
        phy_config.reference_loss_db + phy_config.linear_attenuation_db_per_m
    )

    assert path_loss_db(1.0, phy_config) == pytest.approx(expected)


def test_path_loss_at_area_corner(phy_config):
    d = 14.14
    expected = (
        54.12 + 10 * 2.06067 * math.log10(d) + 0.770175 * d
    )

    assert path_loss_db(d, phy_config) == pytest.approx(expected)


def test_path_loss_is_monotone(phy_config):
    distances = np.linspace(0.1, 100, 1000)
    losses = path_loss_db(distances, phy_config)

    assert np.all(losses >= 0)
    assert np.all(np.diff(losses) >= 0)
    assert np.all(path_loss_db(2 * distances, phy_config) >= losses)


@pytest.mark.parametrize("distance", [0.0, -3.0])
def test_path_loss_rejects_non_positive_distance(phy_config, distance):
    with pytest.raises(PhyError):
        path_loss_db(distance, phy_config)


def test_snr_identities(phy_config):
    d = 7.5
    rx = received_power_dbm(d, phy_config)

    assert rx == pytest.approx(16.0 - path_loss_db(d, phy_config))
    assert snr_db(d, phy_config) == pytest.approx(rx + 95.0)


def test_every_station_of_the_area_is_covered(phy_config):
    corner = math.hypot(10, 10)

    assert select_mcs(snr_db(corner, phy_config), phy_config) >= 0


@pytest.mark.parametrize(
    "snr,expected",
    [
        (13.0, 0),
        (12.99, MCS_INFEASIBLE),
        (20.0, 2),
        (36.0, 8),
        (math.inf, 11),
    ],
)
def test_select_mcs(phy_config, snr, expected):
    assert select_mcs(snr, phy_config) == expected


def test_select_mcs_matches_table_scan(phy_config, rng):
    for snr in rng.uniform(0, 50, size=500):
        eligible = [
            m.index for m in phy_config.mcs_table if m.min_snr_db <= snr
        ]
        expected = max(eligible) if eligible else MCS_INFEASIBLE

        assert select_mcs(snr, phy_config) == expected


def test_single_mpdu_airtime_at_lowest_mcs(phy_config):
    # 234 data tones x 0.5 bits = 117 bits per symbol;
    # 22 + 12000 + 32 bits need 104 symbols of 13.6 us.
    query = AirtimeQuery(payload_bits=12_000, mcs=0)

    assert ppdu_airtime(query, 1, phy_config) == 52 + 1415


def test_aggregation_amortizes_the_preamble(phy_config):
    for mcs in range(12):
        query = AirtimeQuery(payload_bits=12_000, mcs=mcs, spatial_streams=2)

        one = ppdu_airtime(query, 1, phy_config)
        durations = [ppdu_airtime(query, n, phy_config) for n in range(1, 65)]

        assert ppdu_airtime(query, 2, phy_config) < 2 * one
        assert all(b > a for a, b in zip(durations, durations[1:]))


def test_rts_cts_prefix(phy_config):
    plain = AirtimeQuery(payload_bits=12_000, mcs=5)
    protected = AirtimeQuery(payload_bits=12_000, mcs=5, includes_rts_cts=True)

    assert ppdu_airtime(protected, 3, phy_config) == ppdu_airtime(
        plain, 3, phy_config
    ) + (52 + 44 + 2 * 16)


@pytest.mark.parametrize("n_mpdus", [0, 65])
def test_ampdu_size_out_of_range(phy_config, n_mpdus):
    with pytest.raises(PhyError):
        ppdu_airtime(AirtimeQuery(12_000, 0), n_mpdus, phy_config)


def test_infeasible_or_illegal_queries(phy_config):
    with pytest.raises(PhyError):
        ppdu_airtime(AirtimeQuery(12_000, MCS_INFEASIBLE), 1, phy_config)

    with pytest.raises(PhyError):
        ppdu_airtime(AirtimeQuery(12_000, 0, ru_tones=100), 1, phy_config)

    with pytest.raises(PhyError):
        ppdu_airtime(AirtimeQuery(12_000, 0, spatial_streams=9), 1, phy_config)


def test_max_mpdus_within(phy_config):
    query = AirtimeQuery(payload_bits=12_000, mcs=0)
    limit = phy_config.max_ppdu_us

    n = max_mpdus_within(query, limit, 64, phy_config)

    assert 1 <= n < 64
    assert ppdu_airtime(query, n, phy_config) <= limit
    assert ppdu_airtime(query, n + 1, phy_config) > limit

    assert max_mpdus_within(query, 10, 64, phy_config) == 0
    assert max_mpdus_within(query, limit, 2, phy_config) == 2


def test_exchange_airtime_composition(phy_config):
    data = 1000

    assert exchange_airtime(data, False, False, phy_config) == 1000 + 16 + 68
    assert exchange_airtime(data, False, True, phy_config) == exchange_airtime(
        data, False, False, phy_config
    ) - 68 + 100 + (100 + 16)


def test_trigger_adds_trigger_and_sifs_with_equal_acks(phy_config):
    phy_config.block_ack_us = phy_config.multi_sta_ack_us

    for protection in (False, True):
        single = exchange_airtime(1500, protection, False, phy_config)
        multi = exchange_airtime(1500, protection, True, phy_config)
        mu_rts = phy_config.mu_rts_us - phy_config.rts_us

        assert multi - single == 100 + 16 + (mu_rts if protection else 0)


def test_full_protected_trigger_exchange(phy_config):
    # MU-RTS, SIFS, CTS, SIFS, trigger, SIFS, data, SIFS, multi-STA ACK.
    expected = 60 + 16 + 44 + 16 + 100 + 16 + 2500 + 16 + 100

    assert exchange_airtime(2500, True, True, phy_config) == expected
    assert exchange_overhead(True, True, phy_config) == expected - 2500


def test_exchange_segments_split_data_from_control(phy_config):
    segments = exchange_segments(800, True, False, phy_config)

    assert [state for _, state in segments].count(ChannelState.SUCCESS) == 1
    assert (800, ChannelState.SUCCESS) in segments
    assert sum(d for d, _ in segments) == exchange_airtime(
        800, True, False, phy_config
    )

    with pytest.raises(PhyError):
        exchange_segments(0, False, False, phy_config)


def test_config_validation(phy_config):
    assert phy_config.validate() == []

    phy_config.channel_width_mhz = 30
    phy_config.mcs_table = list(reversed(phy_config.mcs_table))

    assert len(phy_config.validate()) == 2
