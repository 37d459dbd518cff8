"""
Empirical tag reuse analysis.

For every test user, each tag of their training vocabulary is an instance:
it has a factor value (how often it was used, how many days ago it was last
used, or how strongly it co-occurs with the tags other users assigned to the
test resource) and it is either reused in the test post or not. Instances
are pooled by factor value into reuse probabilities, and a power law is
fitted to the pooled points by least squares in log-log space.
"""

import json
import logging
from collections import Counter
from pathlib import Path
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .folksonomy import (
    ChronoSplit,
    TagHistory,
    build_cooccurrence,
    resource_context,
)
from .utils import SECONDS_PER_DAY, DataError, ParameterError, atomic_write

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
FACTORS = ("frequency", "recency", "context")
BINNINGS = ("raw", "log2")


class ReusePoint(NamedTuple):
    """Instances pooled at one factor value."""

    x: int
    n_total: int
    n_reused: int

    @property
    def p(self) -> float:
        """The reuse probability."""
        return self.n_reused / self.n_total


class RegressionFit(NamedTuple):
    """`log10(p) = k * log10(x) + b`, and the determination coefficient."""

    k: float
    b: float
    r2: float
    # the number of points the fit used
    points: int


class ReuseCurve(NamedTuple):
    factor: str
    # sorted by `x`
    points: Tuple[ReusePoint, ...]
    # `None` when fewer than 2 points are eligible for the fit
    fit: Optional[RegressionFit]


class Pool:
    """Counts of instances and reused instances by factor value."""

    def __init__(self):
        self.total = Counter()
        self.reused = Counter()

    def add(self, x: int, reused: bool):
        self.total[x] += 1
        if reused:
            self.reused[x] += 1

    def points(self) -> Tuple[ReusePoint, ...]:
        return tuple(
            ReusePoint(x, self.total[x], self.reused[x]) for x in sorted(self.total)
        )


def _check_split(split: ChronoSplit):
    if not split.test:
        raise DataError("the split has no test users")


def eligible_points(
    points: Iterable[ReusePoint], min_support: int = 1
) -> List[ReusePoint]:
    """The points usable in a log-log fit."""
    return [p for p in points if p.x > 0 and p.n_reused > 0 and p.n_total >= min_support]


def loglog_regression(
    points: Sequence[ReusePoint], weighted: bool = False, min_support: int = 1
) -> RegressionFit:
    """
    Ordinary least squares of `log10(p)` on `log10(x)`.

    Points with `p = 0` or fewer than `min_support` instances are left out.
    Points are weighted equally unless `weighted`, in which case each is
    weighted by its number of instances.

    Returns:
        the slope, intercept and determination coefficient (1 when the
        points have no variance in `p`)
    """
    eligible = eligible_points(points, min_support)
    if len({p.x for p in eligible}) < 2:
        raise DataError("insufficient data: fewer than 2 points to fit")

    x = np.log10([p.x for p in eligible])
    y = np.log10([p.p for p in eligible])
    w = np.array([p.n_total for p in eligible], dtype=np.float64)
    if not weighted:
        w = np.ones_like(w)

    # polyfit weights multiply the residuals, so pass the square roots
    k, b = np.polyfit(x, y, 1, w=np.sqrt(w))

    y_mean = np.average(y, weights=w)
    ss_res = np.sum(w * (y - (k * x + b)) ** 2)
    ss_tot = np.sum(w * (y - y_mean) ** 2)
    r2 = 1.0 if np.ptp(y) == 0 else 1.0 - ss_res / ss_tot
    r2 = min(max(r2, 0.0), 1.0)
    return RegressionFit(float(k), float(b), float(r2), len(eligible))


def _curve(factor: str, pool: Pool, weighted: bool, min_support: int) -> ReuseCurve:
    points = pool.points()
    try:
        fit = loglog_regression(points, weighted=weighted, min_support=min_support)
    except DataError as error:
        logger.warning("%s: %s", factor, error)
        fit = None
    return ReuseCurve(factor, points, fit)


def pool_by_frequency(
    split: ChronoSplit, weighted: bool = False, min_support: int = 1
) -> ReuseCurve:
    """Pool instances by the number of training posts using the tag."""
    _check_split(split)
    history = TagHistory(split.train)
    pool = Pool()
    for post in split.test:
        for tag, count in history.counts(post.user).items():
            pool.add(count, tag in post.tags)
    return _curve("frequency", pool, weighted, min_support)


def recency_days(t_test: int, t_last: int) -> int:
    """Whole days elapsed since the last use, at least 1."""
    return max(1, (t_test - t_last) // SECONDS_PER_DAY)


def pool_by_recency(
    split: ChronoSplit, weighted: bool = False, min_support: int = 1
) -> ReuseCurve:
    """Pool instances by the days elapsed since the tag's last use."""
    _check_split(split)
    history = TagHistory(split.train)
    pool = Pool()
    for post in split.test:
        for tag, last in history.last_use(post.user).items():
            pool.add(recency_days(post.timestamp, last), tag in post.tags)
    return _curve("recency", pool, weighted, min_support)


def _bin_raw(value: int) -> int:
    return value


def _bin_log2(value: int) -> int:
    # lower edge of the power-of-two bin
    return 1 << (value.bit_length() - 1)


BINNERS: Dict[str, Callable[[int], int]] = {"raw": _bin_raw, "log2": _bin_log2}


def pool_by_context(
    split: ChronoSplit, binning: str = "raw", weighted: bool = False, min_support: int = 1
) -> ReuseCurve:
    """
    Pool instances by the tag's co-occurrence with the tags other users
    assigned to the test resource. Tags with no co-occurrence, and test posts
    on resources without foreign tags, contribute nothing.
    """
    binner = BINNERS.get(binning, None)
    if binner is None:
        raise ParameterError(f"unknown binning: {binning}")
    _check_split(split)

    history = TagHistory(split.train)
    cooc = build_cooccurrence(split.train)
    pool = Pool()
    for post in split.test:
        context = resource_context(split.train, post.resource, post.user)
        if not context:
            continue
        scores = cooc.context_scores(context)
        for tag in history.usages(post.user):
            value = int(scores.get(tag, 0))
            if value > 0:
                pool.add(binner(value), tag in post.tags)

    curve = _curve("context", pool, weighted, min_support)
    if not curve.points:
        logger.warning("context: no test post has foreign tags on its resource")
    return curve


def pool_curves(
    split: ChronoSplit,
    factors: Sequence[str] = FACTORS,
    binning: str = "raw",
    weighted: bool = False,
    min_support: int = 1,
) -> List[ReuseCurve]:
    """Pool the split by each of `factors`."""
    curves = []
    for factor in factors:
        if factor == "frequency":
            curves.append(pool_by_frequency(split, weighted, min_support))
        elif factor == "recency":
            curves.append(pool_by_recency(split, weighted, min_support))
        elif factor == "context":
            curves.append(pool_by_context(split, binning, weighted, min_support))
        else:
            raise ParameterError(f"unknown factor: {factor}")
    return curves


def curve_frame(curve: ReuseCurve) -> pd.DataFrame:
    """The points of `curve` as columns `x,n_total,n_reused,p`."""
    return pd.DataFrame(
        [(p.x, p.n_total, p.n_reused, p.p) for p in curve.points],
        columns=["x", "n_total", "n_reused", "p"],
    )


def curve_document(curve: ReuseCurve, split_digest: str) -> Dict:
    fit = curve.fit
    return {
        "format_version": FORMAT_VERSION,
        "factor": curve.factor,
        "k": fit.k if fit else None,
        "b": fit.b if fit else None,
        "r2": fit.r2 if fit else None,
        "points": fit.points if fit else 0,
        "split_hash": split_digest,
    }


def write_curves(
    curves: Sequence[ReuseCurve], out_dir: Path, dataset: str, split_digest: str
) -> List[Path]:
    """
    Write `<dataset>_<factor>.csv` and `<dataset>_<factor>.json` for each
    curve into `out_dir`.

    Returns:
        the written paths
    """
    out_dir = Path(out_dir)
    paths = []
    for curve in curves:
        csv_path = out_dir / f"{dataset}_{curve.factor}.csv"
        json_path = out_dir / f"{dataset}_{curve.factor}.json"
        atomic_write(csv_path, curve_frame(curve).to_csv(index=False, lineterminator="\n"))
        document = json.dumps(curve_document(curve, split_digest), indent=2, sort_keys=True)
        atomic_write(json_path, document + "\n")
        paths += [csv_path, json_path]
    return paths
