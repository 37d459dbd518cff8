"""
Chronological evaluation of tag predictors.

Each predictor is fitted on the training posts of a `ChronoSplit`, then
queried once per test post with the post's user, resource and timestamp.
Its top tags are compared with the tags of the test post.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import (
    Any,
    Dict,
    FrozenSet,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import pandas as pd

from .folksonomy import ChronoSplit, Post
from .predictors import ScoredTagList, TagPredictor
from .registry import build_predictor
from .utils import DataError, ParameterError, ScoredTag, TagReuseError, atomic_write

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

Predicted = Sequence[Union[ScoredTag, str]]


def _predicted_tags(predicted: Predicted, k: int) -> List[str]:
    return [p.tag if isinstance(p, ScoredTag) else p for p in predicted[:k]]


def _check_query(relevant: FrozenSet[str], k: int):
    if not relevant:
        raise ParameterError("the relevant tag set is empty")
    if k < 1:
        raise ParameterError(f"k must be positive: {k}")


def precision_recall_at_k(
    predicted: Predicted, relevant: FrozenSet[str], k: int, fixed_denominator: bool = True
) -> Tuple[float, float]:
    """
    Precision and recall of the top `k` predicted tags.

    Args:
        predicted: the ranked predictions
        relevant: the tags which should be predicted
        k: the cut-off rank
        fixed_denominator: divide hits by `k` even when fewer tags were
            predicted, otherwise by the number of predicted tags

    Returns:
        the precision and recall
    """
    _check_query(relevant, k)
    tags = _predicted_tags(predicted, k)
    hits = len(set(tags) & relevant)
    denominator = k if fixed_denominator else len(tags)
    precision = hits / denominator if denominator else 0.0
    return precision, hits / len(relevant)


def f1_at_k(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall, 0 when both are 0."""
    if precision == 0 and recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def ndcg_at_k(predicted: Predicted, relevant: FrozenSet[str], k: int) -> float:
    """Normalized discounted cumulative gain with binary relevance."""
    _check_query(relevant, k)
    tags = _predicted_tags(predicted, k)
    dcg = sum(1 / math.log2(i + 2) for i, tag in enumerate(tags) if tag in relevant)
    idcg = sum(1 / math.log2(i + 2) for i in range(min(k, len(relevant))))
    return dcg / idcg


class EvalConfig(NamedTuple):
    f1_k: int = 5
    ndcg_k: int = 10
    fixed_denominator: bool = True
    # number of threads querying the predictor
    threads: int = 1
    # retain the per-query predictions in the report
    keep_records: bool = False
    # dotted predictor parameters, see `registry.build_predictor`
    params: Optional[Mapping[str, Any]] = None
    seed: Optional[int] = None

    @property
    def list_k(self) -> int:
        """The number of tags requested from the predictor per query."""
        return max(self.f1_k, self.ndcg_k)

    def validate(self) -> "EvalConfig":
        for k in (self.f1_k, self.ndcg_k):
            if not 1 <= k <= 100:
                raise ParameterError(f"metric k must be in 1..100: {k}")
        if self.threads < 1:
            raise ParameterError(f"threads must be positive: {self.threads}")
        return self


class QueryRecord(NamedTuple):
    user: str
    resource: str
    predicted: ScoredTagList
    relevant: FrozenSet[str]


class MetricValue(NamedTuple):
    metric: str
    k: int
    value: float


class EvalReport(NamedTuple):
    """The macro-averaged accuracy of one predictor."""

    predictor: str
    query_count: int
    metrics: Tuple[MetricValue, ...]
    records: Tuple[QueryRecord, ...] = ()
    # set when the predictor could not be fitted or queried
    error: Optional[str] = None

    def value(self, metric: str, k: int) -> float:
        for item in self.metrics:
            if item.metric == metric and item.k == k:
                return item.value
        raise KeyError(f"{metric}@{k}")

    @property
    def f1(self) -> float:
        """The first F1 value (F1@5 with the default configuration)."""
        return next(m.value for m in self.metrics if m.metric == "f1")

    @property
    def ndcg(self) -> float:
        """The nDCG value (nDCG@10 with the default configuration)."""
        return next(m.value for m in self.metrics if m.metric == "ndcg")


def _query_metrics(
    predicted: ScoredTagList, relevant: FrozenSet[str], config: EvalConfig
) -> Tuple[float, float, float, float]:
    precision, recall = precision_recall_at_k(
        predicted, relevant, config.f1_k, config.fixed_denominator
    )
    return (
        precision,
        recall,
        f1_at_k(precision, recall),
        ndcg_at_k(predicted, relevant, config.ndcg_k),
    )


def run_protocol(
    predictor: Union[str, TagPredictor], split: ChronoSplit, config: EvalConfig = EvalConfig()
) -> EvalReport:
    """
    Fit a predictor on `split.train` and evaluate it on every test post whose
    user has training posts.

    Queries for which the predictor returns nothing count as zero-accuracy
    queries. Metrics are averaged over queries (macro average).

    Args:
        predictor: a predictor, or the name of a registered predictor
        split: the data to fit and evaluate on
        config: the evaluation settings

    Returns:
        the report
    """
    config.validate()
    if isinstance(predictor, str):
        predictor = build_predictor(predictor, config.params, config.seed)
    name = predictor.name or type(predictor).__name__

    queries: List[Post] = [p for p in split.test if p.user in split.train.user_index]
    if not queries:
        raise DataError("the test set has no queries")

    predictor.fit(split.train)

    def evaluate(post: Post) -> Tuple[ScoredTagList, Tuple[float, ...]]:
        predicted = predictor.predict(post.user, post.resource, post.timestamp, config.list_k)
        return predicted, _query_metrics(predicted, post.tags, config)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(evaluate, queries))
    else:
        results = [evaluate(p) for p in queries]

    # `fsum` is exactly rounded, so the averages don't depend on query order
    n = len(results)
    columns = list(zip(*(values for _, values in results)))
    precision, recall, f1, ndcg = (math.fsum(c) / n for c in columns)
    metrics = (
        MetricValue("f1", config.f1_k, f1),
        MetricValue("ndcg", config.ndcg_k, ndcg),
        MetricValue("precision", config.f1_k, precision),
        MetricValue("recall", config.f1_k, recall),
    )

    records = ()
    if config.keep_records:
        records = tuple(
            QueryRecord(p.user, p.resource, predicted, p.tags)
            for p, (predicted, _) in zip(queries, results)
        )

    logger.info("%s: F1@%d %.4f, nDCG@%d %.4f", name, config.f1_k, f1, config.ndcg_k, ndcg)
    return EvalReport(name, n, metrics, records)


def run_predictors(
    names: Sequence[str], split: ChronoSplit, config: EvalConfig = EvalConfig()
) -> List[EvalReport]:
    """
    Run the protocol for each named predictor.

    Names and parameters are validated before anything runs. After that, a
    predictor failing to fit or predict is recorded in its report and
    doesn't stop the others.
    """
    config.validate()
    predictors = [build_predictor(n, config.params, config.seed) for n in names]
    if not any(p.user in split.train.user_index for p in split.test):
        raise DataError("the test set has no queries")

    reports = []
    for name, predictor in zip(names, predictors):
        try:
            reports.append(run_protocol(predictor, split, config))
        except TagReuseError as error:
            logger.warning("predictor %s failed: %s", name, error)
            reports.append(EvalReport(name, 0, (), error=str(error)))
        except Exception as error:
            logger.warning("predictor %s failed", name, exc_info=True)
            reports.append(EvalReport(name, 0, (), error=f"{type(error).__name__}: {error}"))
    return reports


def reports_frame(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """All metrics in long format: `predictor,metric,k,value,queries`."""
    rows = [
        (r.predictor, m.metric, m.k, m.value, r.query_count)
        for r in reports
        for m in r.metrics
    ]
    return pd.DataFrame(rows, columns=["predictor", "metric", "k", "value", "queries"])


def results_table(reports: Sequence[EvalReport], config: EvalConfig = EvalConfig()) -> pd.DataFrame:
    """One row per predictor, with F1 and nDCG columns."""
    f1_column = f"F1@{config.f1_k}"
    ndcg_column = f"nDCG@{config.ndcg_k}"
    rows = []
    for report in reports:
        if report.error is None:
            rows.append((report.predictor, report.f1, report.ndcg))
        else:
            rows.append((report.predictor, math.nan, math.nan))
    table = pd.DataFrame(rows, columns=["predictor", f1_column, ndcg_column])
    return table.set_index("predictor")


def report_document(reports: Sequence[EvalReport], split_digest: str) -> Dict[str, Any]:
    """The JSON document describing a set of reports."""

    def record(r: QueryRecord) -> Dict[str, Any]:
        return {
            "user": r.user,
            "resource": r.resource,
            "predicted": [[t.tag, t.score] for t in r.predicted],
            "relevant": sorted(r.relevant),
        }

    return {
        "format_version": FORMAT_VERSION,
        "split_hash": split_digest,
        "reports": [
            {
                "predictor": r.predictor,
                "queries": r.query_count,
                "metrics": [m._asdict() for m in r.metrics],
                "error": r.error,
                "records": [record(q) for q in r.records],
            }
            for r in reports
        ],
    }


def write_reports(
    reports: Sequence[EvalReport],
    out_dir: Path,
    split_digest: str,
    config: EvalConfig = EvalConfig(),
):
    """
    Write `evaluation.csv` (long format), `table.csv` (one row per predictor)
    and `report.json` into `out_dir`.
    """
    out_dir = Path(out_dir)
    long_csv = reports_frame(reports).to_csv(index=False, lineterminator="\n")
    table_csv = results_table(reports, config).to_csv(lineterminator="\n")
    document = json.dumps(report_document(reports, split_digest), indent=2, sort_keys=True)
    atomic_write(out_dir / "evaluation.csv", long_csv)
    atomic_write(out_dir / "table.csv", table_csv)
    atomic_write(out_dir / "report.json", document + "\n")
