"""
The `tagreuse` command.

Exit codes: 0 on success, 1 for usage and parameter errors, 2 for dataset
and I/O errors, 3 for anything else.
"""

import logging
import sys
from typing import List, Optional

from ..utils import DataError, ParameterError, ParseError
from . import analyze, evaluate, synth
from .common import add_common_arguments, configure_logging, gather_config

logger = logging.getLogger(__name__)

COMMANDS = {
    "analyze": analyze,
    "evaluate": evaluate,
    "synth": synth,
}

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def build_parser():
    import argparse

    parser = argparse.ArgumentParser(prog="tagreuse")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, module in COMMANDS.items():
        command = commands.add_parser(name, help=module.__doc__)
        add_common_arguments(command)
        module.add_arguments(command)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the command given by `argv` (by default the process arguments).

    Returns:
        the exit code
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exit:
        # argparse exits with 2 on usage errors, and 0 after `--help`
        return EXIT_USAGE if exit.code else 0

    configure_logging(args.verbose)
    try:
        config = gather_config(args).validate(args.command)
        COMMANDS[args.command].main(config)
    except ParameterError as error:
        logger.error("%s", error)
        return EXIT_USAGE
    except (ParseError, DataError, OSError) as error:
        logger.error("%s", error)
        return EXIT_DATA
    except Exception as error:
        logger.debug("internal error", exc_info=True)
        logger.error("internal error: %s", error)
        return EXIT_INTERNAL
    return 0


def main_args():
    sys.exit(main())


if __name__ == "__main__":
    main_args()
