"""
Scenario configuration: JSON documents merged over a named preset and loaded
strictly into dataclasses.
"""

import json
import logging
from copy import deepcopy
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from dacite.exceptions import DaciteError

from ..bss import AccessMode, MuConfig, TrafficConfig, TwtConfig
from ..dcf import DcfConfig
from ..engine import MAX_SEED
from ..mu import MAX_MU_USERS
from ..phy import PhyConfig
from ..types import JSONDataclassMixin


logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    def __init__(self, diagnostics: List[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


@dataclass
class TopologyConfig:
    area_m: float = 20.0
    """Side of the square floor plan; the AP sits in its center."""

    num_stations: int = 16

    min_distance_m: float = 1.0
    """Closer stations are placed at this distance from the AP."""


@dataclass
class SimConfig:
    duration_s: float = 60.0
    seed: int = 0
    replications: int = 5
    """Runs per sweep point."""

    warmup_fraction: float = 0.05
    """Leading share of the run excluded from delay and queue averages."""


@dataclass
class ScenarioConfig(JSONDataclassMixin):
    name: str = "uplink-16"
    access: AccessMode = AccessMode.DCF
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    twt: TwtConfig = field(default_factory=TwtConfig)
    mu: MuConfig = field(default_factory=MuConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    phy: PhyConfig = field(default_factory=PhyConfig)
    dcf: DcfConfig = field(default_factory=DcfConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    @property
    def horizon_us(self) -> int:
        return int(round(self.sim.duration_s * 1e6))

    def validate(self) -> List[str]:
        errors = []

        topology = self.topology
        if topology.num_stations < 1:
            errors.append("topology.num_stations must be at least 1")
        if topology.area_m <= 0:
            errors.append("topology.area_m must be positive")
        if topology.min_distance_m <= 0:
            errors.append("topology.min_distance_m must be positive")

        traffic = self.traffic
        if traffic.load_mbps < 0:
            errors.append("traffic.load_mbps must be non-negative")
        if traffic.mpdu_bits <= 0:
            errors.append("traffic.mpdu_bits must be positive")
        if traffic.buffer_packets < 1:
            errors.append("traffic.buffer_packets must be at least 1")

        if not 1 <= self.mu.max_mu <= MAX_MU_USERS:
            errors.append(f"mu.max_mu must be in 1..{MAX_MU_USERS}")

        sim = self.sim
        if sim.duration_s <= 0:
            errors.append("sim.duration_s must be positive")
        if not 0 <= sim.seed < MAX_SEED:
            errors.append("sim.seed must be an unsigned 64-bit integer")
        if sim.replications < 1:
            errors.append("sim.replications must be at least 1")
        if not 0 <= sim.warmup_fraction < 1:
            errors.append("sim.warmup_fraction must be in [0, 1)")

        errors += [f"phy: {e}" for e in self.phy.validate()]
        errors += [f"dcf: {e}" for e in self.dcf.validate()]

        if self.access == AccessMode.TWT:
            errors += self.twt.validate(topology.num_stations)

        return errors


PRESETS = {
    "uplink-16": ScenarioConfig(),
}
"""16 uplink stations in a 20x20 m area around the AP."""

PRESETS["paper-3.4"] = PRESETS["uplink-16"]

DEFAULT_PRESET = "uplink-16"


def merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Nested objects merge key by key; any other value replaces."""

    merged = deepcopy(base)

    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value

    return merged


def preset(name: str = DEFAULT_PRESET) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError(
            [f"unknown preset {name!r}, choose from {sorted(PRESETS)}"]
        )

    return deepcopy(PRESETS[name])


def build_config(
    overrides: Dict[str, Any], preset_name: str = DEFAULT_PRESET
) -> ScenarioConfig:
    document = merge(preset(preset_name).to_dict(), overrides)

    try:
        config = ScenarioConfig.from_dict(document)
    except (DaciteError, ValueError, TypeError) as e:
        raise ConfigError([str(e)])

    errors = config.validate()
    if errors:
        raise ConfigError(errors)

    return config


def parse_config(
    text: Optional[str], preset_name: str = DEFAULT_PRESET
) -> ScenarioConfig:
    """
    Load a (possibly partial) JSON scenario. Missing fields come from the
    preset; unknown keys, wrong types and invalid values raise ConfigError.
    """

    if text is None or not text.strip():
        return build_config({}, preset_name)

    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            [f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"]
        )

    if not isinstance(document, dict):
        raise ConfigError(["a scenario document must be a JSON object"])

    return build_config(document, preset_name)
