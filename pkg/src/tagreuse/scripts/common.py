"""Arguments and helpers shared by the subcommands."""

import argparse
import logging
import os
from pathlib import Path
from typing import Any, Dict

from ..config import RunConfig, build_config, load_config, parse_overrides
from ..folksonomy import Folksonomy, read_posts
from ..synthetic import SynthParams, synth_folksonomy

logger = logging.getLogger(__name__)

LOG_LEVEL = os.getenv("TAGREUSE_LOG_LEVEL", "WARNING")

# parsed arguments which are not configuration values
NOT_CONFIG = {"command", "config", "verbose", "overrides"}


def configure_logging(verbose: int):
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = logging.getLevelName(LOG_LEVEL.upper())
        if not isinstance(level, int):
            level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("tagreuse").setLevel(level)


def add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, help="TOML run configuration")
    parser.add_argument("--dataset", type=Path, help="TSV dataset file")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument(
        "overrides", nargs="*", metavar="key=value", help="dotted overrides, e.g. bll.d=0.5"
    )


def gather_config(args: argparse.Namespace) -> RunConfig:
    """
    Merge the configuration file, the flags and the overrides of `args`, in
    that order of precedence.
    """
    values: Dict[str, Any] = {}
    if args.config is not None:
        values.update(load_config(args.config))
    values.update(
        {k: v for k, v in vars(args).items() if k not in NOT_CONFIG and v is not None}
    )
    values.update(parse_overrides(args.overrides))
    config = build_config(values)
    if args.command == "synth" and config.synth is None:
        config = config._replace(synth=SynthParams())
    return config


def load_folksonomy(config: RunConfig) -> Folksonomy:
    """Read the configured dataset, or generate it."""
    if config.dataset is not None:
        folksonomy = read_posts(config.dataset)
        logger.info("read %s from %s", folksonomy, config.dataset)
        return folksonomy
    return synth_folksonomy(config.synth, config.seed)
