"""Evaluate tag predictors on the chronological split of a dataset."""

import argparse
import sys
from typing import List, Optional, TextIO

from ..config import RunConfig
from ..evaluation import EvalConfig, EvalReport, results_table, run_predictors, write_reports
from ..folksonomy import chronological_split, split_hash
from .common import load_folksonomy


def eval_config(config: RunConfig) -> EvalConfig:
    return EvalConfig(
        f1_k=config.f1_k,
        ndcg_k=config.ndcg_k,
        fixed_denominator=config.fixed_denominator,
        threads=config.threads,
        params=config.params,
        seed=config.seed,
    )


def main(config: RunConfig, stream: Optional[TextIO] = None) -> List[EvalReport]:
    settings = eval_config(config)
    split = chronological_split(load_folksonomy(config))
    reports = run_predictors(config.predictors, split, settings)
    write_reports(reports, config.out, split_hash(split), settings)
    table = results_table(reports, settings)
    (stream or sys.stdout).write(table.to_string(float_format="%.4f") + "\n")
    return reports


def add_arguments(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--predictors", help="comma separated predictor names, e.g. mp,recency,bll"
    )
