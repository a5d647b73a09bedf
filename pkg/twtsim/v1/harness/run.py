import logging
from typing import Dict

import numpy as np

from ..bss import Bss
from ..engine import Simulator, StreamPurpose
from ..metrics import MetricsCollector, MetricsReport
from ..types import Point
from .config import ConfigError, ScenarioConfig, TopologyConfig


logger = logging.getLogger(__name__)


def place_stations(
    topology: TopologyConfig, rng: np.random.Generator
) -> Dict[int, float]:
    """
    Uniform placement over the square; returns the distance of every station
    (ids from 1) to the AP in the center.
    """

    ap = Point(topology.area_m / 2, topology.area_m / 2)
    coordinates = rng.uniform(
        0, topology.area_m, size=(topology.num_stations, 2)
    )

    return {
        station: max(Point(x, y).distance_to(ap), topology.min_distance_m)
        for station, (x, y) in enumerate(coordinates, start=1)
    }


def run_scenario(config: ScenarioConfig) -> MetricsReport:
    errors = config.validate()
    if errors:
        raise ConfigError(errors)

    seed = config.sim.seed
    horizon = config.horizon_us

    logger.info(
        f"Running {config.access.value} at {config.traffic.load_mbps} Mbps "
        f"per station, seed {seed}, {config.sim.duration_s} s."
    )

    simulator = Simulator(seed)
    distances = place_stations(
        config.topology, simulator.rng.stream(StreamPurpose.TOPOLOGY)
    )
    metrics = MetricsCollector(
        horizon, sorted(distances), config.sim.warmup_fraction
    )

    bss = Bss(
        simulator,
        config.access,
        distances,
        config.phy,
        config.dcf,
        config.twt,
        config.mu,
        config.traffic,
        metrics,
    )
    bss.start()
    delivered, _ = simulator.run(horizon)
    bss.close()

    report = metrics.finalize(
        bss.in_system(), seed, simulator.trace_digest, config.to_dict()
    )

    logger.info(
        f"Done: {delivered} events, mean delay {report.mean_delay_us} us, "
        f"idle fraction {report.idle_fraction:.3f}."
    )

    return report
