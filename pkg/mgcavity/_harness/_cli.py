import argparse
import logging
from collections.abc import Sequence
from pathlib import Path

from soupape import SyncInjector

from mgcavity._harness._commands import command_metadata, get_command
from mgcavity._harness._config import CliOverrides, Mode, load_config
from mgcavity._harness._services import define_services
from mgcavity.errors import (
    ConfigError,
    DegenerateFieldError,
    DegenerateReactionError,
    InvalidGameConfigError,
    MinorityGameError,
    NoBracketError,
    NotConvergedError,
    ParameterMismatchError,
    RangeExhaustedError,
    ReconciliationError,
    ReplicaSymmetryBrokenError,
    WrongSError,
)

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


def exit_code(err: MinorityGameError) -> int:
    match err:
        case ConfigError() | InvalidGameConfigError() | WrongSError() | ParameterMismatchError():
            return 2
        case (
            NotConvergedError()
            | ReplicaSymmetryBrokenError()
            | NoBracketError()
            | RangeExhaustedError()
            | DegenerateReactionError()
            | DegenerateFieldError()
        ):
            return 3
        case ReconciliationError():
            return 4
        case _:
            return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mg-cavity",
        description="Minority game simulations and their cavity solution.",
    )
    commands = parser.add_subparsers(dest="mode", required=True, metavar="MODE")
    for mode in Mode:
        found = command_metadata(get_command(mode))
        sub = commands.add_parser(str(mode), help=found.description if found else None)
        sub.add_argument("--config", type=Path, required=True, help="TOML run configuration")
        sub.add_argument("--workers", type=int, default=None, help="worker processes for seed ensembles")
        sub.add_argument("--out", type=Path, default=None, help="output directory")
        sub.add_argument("--seed", type=int, default=None, help="base seed of the ensemble")
        sub.add_argument(
            "--log-level",
            default="INFO",
            choices=("DEBUG", "INFO", "WARNING", "ERROR"),
            help="logging threshold",
        )
    return parser


def configure_logging(level: str) -> None:
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger("mgcavity")
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    mode = Mode(args.mode)
    try:
        config = load_config(args.config, CliOverrides(mode=mode, workers=args.workers, out=args.out, seed=args.seed))
        logger.info("Running %s from %s (config %s)", mode, config.source, config.config_hash[:12])
        with SyncInjector(define_services(config)) as injector:
            injector.call(get_command(mode))
    except MinorityGameError as err:
        logger.error("%s", err)
        return exit_code(err)
    return 0
