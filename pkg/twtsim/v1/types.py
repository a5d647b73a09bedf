import json
from dataclasses import dataclass, asdict
from enum import Enum
from pathlib import Path
from typing import Type, TypeVar, Union

import numpy as np
from dacite import Config, from_dict


T = TypeVar("T", bound="JSONDataclassMixin")

AP_ID = 0
"""Station id reserved for the access point."""

DACITE_CONFIG = Config(strict=True, cast=[Enum], type_hooks={float: float})
"""Unknown keys are errors; enums are cast back and ints accepted as floats."""


class JSONDataclassMixin:
    """Mixin for adding JSON file capabilities to Python dataclasses."""

    @classmethod
    def from_dict(cls: Type[T], data: dict) -> T:
        return from_dict(cls, data, config=DACITE_CONFIG)

    @classmethod
    def from_json(cls: Type[T], text: str) -> T:
        """Load dataclass instance from a JSON document."""

        return cls.from_dict(json.loads(text))

    @classmethod
    def from_file(cls: Type[T], path: Union[Path, str]) -> T:
        """Load dataclass instance from provided file path."""

        with open(path) as f:
            data = json.load(f)

        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return json.loads(self.to_json())

    def to_json(self) -> str:
        """Stable serialization: sorted keys, fixed indentation."""

        return json.dumps(asdict(self), sort_keys=True, indent=2)

    def to_file(self, path: Union[Path, str]) -> None:
        """Save dataclass instance to provided file path."""

        with open(path, "w") as f:
            f.write(self.to_json())
            f.write("\n")

        return


@dataclass(unsafe_hash=True)
class Point:
    """Point in the simulated floor plan, in meters."""

    x: float
    """Horizontal coordinate."""

    y: float
    """Vertical coordinate."""

    def distance_to(self, other: "Point") -> float:
        return float(np.hypot(self.x - other.x, self.y - other.y))


class ChannelState(str, Enum):
    """What occupies the shared channel during an interval."""

    IDLE = "idle"
    SUCCESS = "success-busy"
    COLLISION = "collision-busy"
    CONTROL = "control-busy"
