#!/usr/bin/env python
"""Command line entry point: verify, cone-check and solve."""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"

import argparse
import logging
import os
import sys

# Thread count of the BLAS and FFT back ends has to be fixed before numpy loads.
THREADS = os.environ.get("KRYLOV_THREADS")
if THREADS:
    for variable in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[variable] = THREADS

import src.cli as cli  # noqa: E402
import src.config as config  # noqa: E402
from src.errors import ConfigError, MathematicalFailure  # noqa: E402

LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")
logging.basicConfig(level=LOG_LEVEL)
LOGGER = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_MATHEMATICAL = 2


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse the command line."""
    parser = argparse.ArgumentParser(prog="krylov", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)
    for name in cli.COMMANDS:
        command = commands.add_parser(name)
        command.add_argument("--config", required=True, help="Path to the JSON run configuration")
        command.add_argument("--out", help="Output directory or s3://bucket/prefix")
        if name == "verify":
            command.add_argument("--seed", type=int, help="Seed of the random generator")
            command.add_argument("--trials", type=int, help="Samples per suite")
    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    """
    Run one command.

    Args:
    ----
        argv: Command line arguments without the program name.

    Returns:
    -------
        The process exit code.

    """
    args = parse_args(argv)
    try:
        settings = config.with_overrides(
            config.load_config(args.config),
            seed=getattr(args, "seed", None),
            trials=getattr(args, "trials", None),
            out=args.out,
        )
        if settings.mode != args.command:
            raise ConfigError(f"Config is for {settings.mode}, not {args.command}")  # noqa: TRY301
        cli.COMMANDS[args.command](settings)
    except ConfigError:
        LOGGER.exception("Invalid configuration")
        return EXIT_CONFIG
    except MathematicalFailure:
        LOGGER.exception("Mathematical failure")
        return EXIT_MATHEMATICAL
    return 0


if __name__ == "__main__":
    try:
        code = main()
    except Exception:
        LOGGER.exception("Execution failed")
        sys.exit(1)
    if code == 0:
        LOGGER.info("Execution successful")
    sys.exit(code)
