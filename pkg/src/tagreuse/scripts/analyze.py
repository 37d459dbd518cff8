"""Pool tag reuse by frequency, recency and context, and fit power laws."""

import argparse
import math
import sys
from typing import List, Optional, Sequence, TextIO

import pandas as pd

from ..config import RunConfig
from ..folksonomy import chronological_split, split_hash
from ..reuse import BINNINGS, FACTORS, ReuseCurve, pool_curves, write_curves
from .common import load_folksonomy


def summary_table(curves: Sequence[ReuseCurve], dataset: str) -> pd.DataFrame:
    rows = [
        (
            dataset,
            c.factor,
            c.fit.k if c.fit else math.nan,
            c.fit.r2 if c.fit else math.nan,
            len(c.points),
        )
        for c in curves
    ]
    return pd.DataFrame(rows, columns=["dataset", "factor", "k", "r2", "points"])


def main(config: RunConfig, stream: Optional[TextIO] = None) -> List[ReuseCurve]:
    folksonomy = load_folksonomy(config)
    split = chronological_split(folksonomy)
    curves = pool_curves(
        split,
        factors=config.factors,
        binning=config.binning,
        weighted=config.weighted,
        min_support=config.min_support,
    )
    # nothing is written until every curve is pooled
    write_curves(curves, config.out, config.dataset_name, split_hash(split))
    table = summary_table(curves, config.dataset_name)
    (stream or sys.stdout).write(table.to_string(index=False) + "\n")
    return curves


def add_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--factor", choices=FACTORS + ("all",))
    parser.add_argument("--min-support", dest="min_support", type=int)
    parser.add_argument("--bin", choices=BINNINGS)
    parser.add_argument(
        "--weighted",
        action="store_const",
        const=True,
        help="weight regression points by their number of instances",
    )
