"""
Command-line entry point.

    twtsim run [--preset NAME] [--config PATH] [--seed N] [--duration S]
               [--access dcf|twt] [--load MBPS] [--sessions N] [--out PATH]
    twtsim sweep --spec PATH --out DIR [--workers N]
    twtsim overhead-table [--n N ...] [--k K ...] [--out PATH]
    twtsim codec encode --message PATH | codec decode --hex HEX

Exit status is 0 when the output was written, 2 for invalid input or a
failed consistency check, 1 for anything unexpected.
"""

import logging
import os
import sys
from argparse import ArgumentParser
from pathlib import Path
from typing import List, Optional

from dacite.exceptions import DaciteError

from ..dcf import ProtocolError
from ..engine import SchedulingError
from ..metrics import ConsistencyError
from ..mu import AllocationError
from ..overhead import table_report
from ..phy import PhyError
from ..twt.agreements import AgreementLimitError, NegotiationError
from ..twt.agreements import TwtMessage
from ..twt.element import ElementDecodeError, ElementEncodeError
from ..twt.element import from_hex, to_hex
from .config import DEFAULT_PRESET, PRESETS, build_config, merge
from .config import ConfigError, parse_config
from .run import run_scenario
from .sweep import SweepSpec, run_sweep


logger = logging.getLogger(__name__)

KNOWN_ERRORS = (
    ConfigError,
    SchedulingError,
    PhyError,
    ProtocolError,
    NegotiationError,
    AgreementLimitError,
    ElementDecodeError,
    ElementEncodeError,
    AllocationError,
    ConsistencyError,
    OSError,
)

LOG_LEVEL_VARIABLE = "TWTSIM_LOG_LEVEL"


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="twtsim")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="simulate one scenario")
    run.add_argument(
        "--preset", choices=sorted(PRESETS), default=DEFAULT_PRESET
    )
    run.add_argument("--config", type=str)
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=float, help="seconds")
    run.add_argument("--access", choices=["dcf", "twt"])
    run.add_argument("--load", type=float, help="Mbps per station")
    run.add_argument("--sessions", type=int)
    run.add_argument("--out", type=str)

    sweep = commands.add_parser("sweep", help="run a load/mode sweep")
    sweep.add_argument("--spec", type=str)
    sweep.add_argument("--out", type=str, required=True)
    sweep.add_argument("--workers", type=int)

    table = commands.add_parser(
        "overhead-table", help="TWT management-frame counts"
    )
    table.add_argument("--n", type=int, nargs="+", default=[10, 100])
    table.add_argument("--k", type=int, nargs="+", default=[10, 100])
    table.add_argument("--out", type=str)

    codec = commands.add_parser("codec", help="TWT element inspection")
    codec.add_argument("direction", choices=["encode", "decode"])
    codec.add_argument("--message", type=str, help="JSON TwtMessage file")
    codec.add_argument("--hex", type=str)

    return parser


def _load(cls, path: str):
    """Strictly load a JSON document file into `cls`."""

    try:
        return cls.from_file(path)
    except (DaciteError, ValueError, TypeError) as e:
        raise ConfigError([f"{path}: {e}"])


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _run(args) -> None:
    text = Path(args.config).read_text() if args.config else None
    config = parse_config(text, args.preset)

    overrides = {}
    if args.seed is not None:
        overrides["sim"] = {"seed": args.seed}
    if args.duration is not None:
        overrides = merge(overrides, {"sim": {"duration_s": args.duration}})
    if args.access is not None:
        overrides["access"] = args.access
    if args.load is not None:
        overrides["traffic"] = {"load_mbps": args.load}
    if args.sessions is not None:
        overrides["twt"] = {"num_sessions": args.sessions}

    if overrides:
        config = build_config(merge(config.to_dict(), overrides), args.preset)

    report = run_scenario(config)
    _emit(report.to_json() + "\n", args.out)


def _sweep(args) -> None:
    spec = _load(SweepSpec, args.spec) if args.spec else SweepSpec()
    run_sweep(spec, Path(args.out), args.workers)


def _overhead_table(args) -> None:
    table = table_report(args.n, args.k)

    if args.out:
        table.to_csv(args.out, index=False)
    else:
        sys.stdout.write(table.to_csv(index=False))


def _codec(args) -> None:
    if args.direction == "encode":
        if not args.message:
            raise ConfigError(["codec encode needs --message"])

        _emit(to_hex(_load(TwtMessage, args.message)) + "\n", None)
        return

    if not args.hex:
        raise ConfigError(["codec decode needs --hex"])

    _emit(from_hex(args.hex).to_json() + "\n", None)


COMMANDS = {
    "run": _run,
    "sweep": _sweep,
    "overhead-table": _overhead_table,
    "codec": _codec,
}


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=os.environ.get(LOG_LEVEL_VARIABLE, "INFO").upper()
    )
    args = build_parser().parse_args(argv)

    try:
        COMMANDS[args.command](args)
    except KNOWN_ERRORS as e:
        print(f"twtsim: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(e)
        return 1

    return 0


if __name__ == "__main__":
    sys.exit(main())
