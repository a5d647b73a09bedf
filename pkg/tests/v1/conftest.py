import numpy as np
import pytest

from twtsim.v1.dcf import DcfConfig
from twtsim.v1.engine import EventKind, Simulator
from twtsim.v1.harness.config import build_config
from twtsim.v1.metrics import MetricsReport
from twtsim.v1.phy import PhyConfig


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run the full-length scenario checks",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-length scenario check")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return

    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def phy_config():
    return PhyConfig()


@pytest.fixture
def dcf_config():
    return DcfConfig()


@pytest.fixture
def simulator():
    """Simulator whose TIMER events run the callable in their payload."""

    simulator = Simulator(seed=7)
    simulator.register(EventKind.TIMER, lambda event: event.payload())

    return simulator


@pytest.fixture
def short_config():
    """Two simulated seconds of the default preset."""

    def _short_config(**overrides):
        document = {"sim": {"duration_s": 2.0, "seed": 11}}
        for section, values in overrides.items():
            if isinstance(values, dict):
                document.setdefault(section, {}).update(values)
            else:
                document[section] = values

        return build_config(document)

    return _short_config


@pytest.fixture
def fake_report():
    """Stand-in for `run_scenario`: a report echoing the scenario's seed."""

    def _fake_report(config):
        return MetricsReport(
            seed=config.sim.seed,
            duration_us=config.horizon_us,
            warmup_us=0,
            stations=[],
            mean_delay_us=1_000.0 * config.traffic.load_mbps,
            mean_queue=0.5,
            delivered=10,
            dropped=0,
            throughput_bps=1e6,
            offered_rate_pps=100.0,
            idle_fraction=0.9,
            success_fraction=0.1,
            collision_fraction=0.0,
            control_fraction=0.0,
            mean_awake_fraction=1.0,
            attempts=10,
            collided_attempts=0,
            collision_probability=0.0,
            twt_setup_messages=0,
            twt_update_messages=0,
            beacons=0,
            trace_digest=f"{config.sim.seed:x}",
            config=config.to_dict(),
        )

    return _fake_report
