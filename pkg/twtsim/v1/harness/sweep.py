"""
Sweeps over loads and access modes. Every (point, replication) run is
stored as its own report file, so an interrupted sweep resumes where it
stopped.
"""

import logging
import os
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ..bss import AccessMode
from ..metrics import MetricsReport
from ..types import JSONDataclassMixin
from .config import DEFAULT_PRESET, ConfigError, build_config, merge
from .run import run_scenario


logger = logging.getLogger(__name__)

SUMMARY_FIELDS = [
    "mean_delay_us",
    "mean_queue",
    "delivered",
    "dropped",
    "throughput_bps",
    "offered_rate_pps",
    "idle_fraction",
    "success_fraction",
    "collision_fraction",
    "control_fraction",
    "mean_awake_fraction",
    "attempts",
    "collided_attempts",
    "collision_probability",
    "twt_setup_messages",
    "twt_update_messages",
    "beacons",
    "trace_digest",
]
"""Report fields copied into every sweep row."""


@dataclass
class SweepSpec(JSONDataclassMixin):
    base: Dict[str, Any] = field(default_factory=dict)
    """Partial scenario document applied over the preset."""

    preset: str = DEFAULT_PRESET
    loads_mbps: List[float] = field(
        default_factory=lambda: [1.0, 2.0, 4.0, 6.0, 8.0]
    )
    modes: List[str] = field(
        default_factory=lambda: ["dcf", "twt-2", "twt-4"]
    )
    """Either dcf or twt-<sessions>."""

    replications: Optional[int] = None
    """Defaults to the scenario's sim.replications."""

    base_seed: int = 0

    paired_seeds: bool = False
    """Share seeds across modes at equal load and replication."""


@dataclass(frozen=True)
class SweepTask:
    point: int
    load_index: int
    load_mbps: float
    mode: str
    replication: int
    seed: int
    document: Dict[str, Any] = field(hash=False, compare=False)

    @property
    def key(self) -> str:
        return f"p{self.point:03d}-r{self.replication:02d}"


def parse_mode(mode: str) -> Tuple[AccessMode, Optional[int]]:
    if mode == AccessMode.DCF.value:
        return AccessMode.DCF, None

    prefix = f"{AccessMode.TWT.value}-"
    if mode.startswith(prefix) and mode[len(prefix):].isdigit():
        return AccessMode.TWT, int(mode[len(prefix):])

    raise ConfigError([f"unknown mode {mode!r}, use dcf or twt-<sessions>"])


def derive_seed(base_seed: int, *key: int) -> int:
    """Deterministic 64-bit seed for one run of the sweep."""

    sequence = np.random.SeedSequence(entropy=base_seed, spawn_key=key)
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def expand(spec: SweepSpec) -> List[SweepTask]:
    """Runs of the sweep, ordered by point then replication."""

    base = build_config(spec.base, spec.preset)
    replications = spec.replications or base.sim.replications
    tasks = []
    point = 0

    for load_index, load in enumerate(spec.loads_mbps):
        for mode in spec.modes:
            access, sessions = parse_mode(mode)

            overrides = {
                "access": access.value,
                "traffic": {"load_mbps": load},
            }
            if sessions is not None:
                overrides["twt"] = {"num_sessions": sessions}

            for replication in range(replications):
                seed = (
                    derive_seed(spec.base_seed, load_index, replication)
                    if spec.paired_seeds
                    else derive_seed(spec.base_seed, point, replication)
                )
                document = merge(
                    spec.base, merge(overrides, {"sim": {"seed": seed}})
                )

                tasks.append(
                    SweepTask(
                        point=point,
                        load_index=load_index,
                        load_mbps=load,
                        mode=mode,
                        replication=replication,
                        seed=seed,
                        document=document,
                    )
                )

            point += 1

    return tasks


def _row(task: SweepTask, report: MetricsReport) -> Dict[str, Any]:
    row = {
        "point": task.point,
        "mode": task.mode,
        "load_mbps": task.load_mbps,
        "replication": task.replication,
        "seed": task.seed,
    }
    row.update({name: getattr(report, name) for name in SUMMARY_FIELDS})

    return row


def _run_task(args: Tuple[SweepTask, str, Optional[str]]) -> Dict[str, Any]:
    task, preset_name, output_dir = args
    path = Path(output_dir) / f"{task.key}.json" if output_dir else None

    if path is not None and path.is_file():
        report = MetricsReport.from_file(path)
    else:
        report = run_scenario(build_config(task.document, preset_name))

        if path is not None:
            report.to_file(path)

    return _row(task, report)


def run_sweep(
    spec: SweepSpec,
    output_dir: Optional[Path] = None,
    workers: Optional[int] = None,
) -> pd.DataFrame:
    """One row per run; reports already present in `output_dir` are reused."""

    tasks = expand(spec)

    if output_dir is not None:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)

    logger.info(f"Sweep of {len(tasks)} runs.")

    args = [
        (task, spec.preset, str(output_dir) if output_dir else None)
        for task in tasks
    ]
    workers = workers or os.cpu_count()

    if workers == 1:
        rows = [_run_task(a) for a in tqdm(args, total=len(args))]
    else:
        with Pool(workers) as pool:
            rows = list(tqdm(pool.imap(_run_task, args), total=len(args)))

    table = pd.DataFrame(rows)

    if output_dir is not None:
        table.to_csv(output_dir / "sweep.csv", index=False)

    return table
