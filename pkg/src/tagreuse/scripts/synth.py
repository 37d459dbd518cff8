"""Generate a synthetic dataset."""

import argparse
import sys
from pathlib import Path
from typing import Optional, TextIO

from ..config import RunConfig
from ..folksonomy import format_posts, narrowness_degree
from ..synthetic import synth_folksonomy
from ..utils import atomic_write

DATASET_NAME = "dataset.tsv"


def main(config: RunConfig, stream: Optional[TextIO] = None) -> Path:
    folksonomy = synth_folksonomy(config.synth, config.seed)
    path = Path(config.out) / DATASET_NAME
    atomic_write(path, format_posts(folksonomy.posts))
    (stream or sys.stdout).write(f"{path}: {narrowness_degree(folksonomy)}\n")
    return path


def add_arguments(parser: argparse.ArgumentParser):
    # generator parameters are given as `synth.*` overrides
    pass
