"""
tentlab - weighted tent-space verification toolkit
Command-line entry point: python -m app.main <config.yaml> [flags]
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from . import __version__
from .config import config, parse_ladder
from .errors import ConfigError
from .parser import load_suite
from .schemas import ResolutionStep, SuiteConfig
from .suite import EXIT_CONFIG_ERROR, run_suite

logger = logging.getLogger("app")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tentlab",
        description="Run numerical checks of weighted tent-space estimates and write JSON/CSV reports",
    )
    parser.add_argument("config", help="Suite configuration (YAML)")
    parser.add_argument("--seed", type=int, help="Override the global seed")
    parser.add_argument(
        "--resolution-ladder",
        help="Override the ladders of both dimensions, e.g. 64x8,128x16",
    )
    parser.add_argument("--jobs", type=int, help="Checks run concurrently")
    parser.add_argument("--format", choices=config.FORMATS, help="Report formats to write")
    parser.add_argument("--output", help="Report directory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def apply_overrides(suite: SuiteConfig, args: argparse.Namespace) -> SuiteConfig:
    """
    Apply command-line overrides to a parsed suite.

    Raises:
        ConfigError: If an override is invalid
    """
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.resolution_ladder is not None:
        try:
            ladder = [ResolutionStep(cells=cells, levels=levels) for cells, levels in parse_ladder(args.resolution_ladder)]
        except ValueError as e:
            raise ConfigError(f"--resolution-ladder: {e}")
        update["ladder_1d"] = update["ladder_2d"] = ladder
    if args.jobs is not None:
        update["jobs"] = args.jobs
    if args.format is not None:
        update["format"] = args.format
    if args.output is not None:
        update["output_dir"] = args.output
    try:
        return SuiteConfig.model_validate({**suite.model_dump(), **update})
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"--{first['loc'][0]}: {first['msg']}")


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run a suite.

    Returns:
        0 when every check behaved as designed, 1 on check failures, 2 on configuration errors
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(format="%(message)s", level=config.LOG_LEVEL.upper())

    # Fail fast on a bad environment
    try:
        config.validate()
        logger.info("✓ tentlab configuration validated")
    except ValueError as e:
        logger.error(f"✗ Configuration error: {e}")
        return EXIT_CONFIG_ERROR

    try:
        suite = apply_overrides(load_suite(args.config), args)
    except ConfigError as e:
        logger.error(f"✗ {e}")
        return EXIT_CONFIG_ERROR

    status, _ = run_suite(suite)
    return status


if __name__ == "__main__":
    sys.exit(main())
