"""
Tag predictors built on individual reuse factors (frequency, recency,
semantic context) and their combinations (GIRP, BLL, BLL_AC).

All predictors share the `TagPredictor` interface: they are fitted once on a
training folksonomy, then score candidate tags for a query made of a user,
a resource and a reference time.
"""

import abc
import heapq
import math
from typing import Dict, NamedTuple, Tuple

import numpy as np
from scipy.special import logsumexp

from .folksonomy import (
    CoocMatrix,
    Folksonomy,
    TagHistory,
    build_cooccurrence,
    resource_context,
)
from .utils import SECONDS_PER_DAY, DataError, ParameterError, ScoredTag

Scores = Dict[str, float]
ScoredTagList = Tuple[ScoredTag, ...]

# floor added inside the GIRP logarithm
GIRP_EPSILON = 1e-12


class BLLParams(NamedTuple):
    """Parameters of the base-level learning models."""

    # power-law decay exponent
    d: float = 0.5
    # weight of the base-level component against the context (BLL_AC only)
    beta: float = 0.5

    def validate(self) -> "BLLParams":
        if not self.d >= 0:
            raise ParameterError(f"bll decay must be non-negative: {self.d}")
        if not 0 <= self.beta <= 1:
            raise ParameterError(f"bllac beta must be in [0, 1]: {self.beta}")
        return self


class GIRPParams(NamedTuple):
    """Parameters of the exponential time-decay model."""

    # decay rate per day
    lam: float = 0.1

    def validate(self) -> "GIRPParams":
        if not self.lam > 0:
            raise ParameterError(f"girp lambda must be positive: {self.lam}")
        return self


def top_k(scores: Scores, k: int) -> ScoredTagList:
    """
    Take the `k` highest-scored tags. Ties are broken by tag in ascending
    order. Fewer than `k` tags are returned if fewer are scored.
    """
    if k < 1:
        raise ParameterError(f"k must be positive: {k}")
    best = heapq.nsmallest(k, scores.items(), key=lambda i: (-i[1], i[0]))
    return tuple(ScoredTag(tag, float(score)) for tag, score in best)


def max_normalize(scores: Scores) -> Scores:
    """Divide non-negative scores by their maximum."""
    if not scores:
        return {}
    top = max(scores.values())
    if top <= 0:
        return {tag: 0.0 for tag in scores}
    return {tag: score / top for tag, score in scores.items()}


def max_normalize_log(scores: Scores) -> Scores:
    """
    Max-normalize scores given in log space: `exp(s - max s)`, in (0, 1].
    """
    if not scores:
        return {}
    top = max(scores.values())
    return {tag: math.exp(score - top) for tag, score in scores.items()}


def time_lags(times: np.ndarray, t_ref: int) -> np.ndarray:
    """Seconds elapsed from each of `times` to `t_ref`, at least 1."""
    return np.maximum(t_ref - times, 1).astype(np.float64)


def bll_activation(history: TagHistory, user: str, t_ref: int, d: float) -> Scores:
    """
    Base-level activation of each tag of `user`:
    `B(i) = ln(sum_j lag_j ** -d)` with lags in seconds.
    """
    return {
        tag: float(logsumexp(-d * np.log(time_lags(times, t_ref))))
        for tag, times in history.usages(user).items()
    }


def girp_score(history: TagHistory, user: str, t_ref: int, lam: float) -> Scores:
    """
    Exponential-decay analogue of the base-level activation:
    `G(i) = ln(sum_j exp(-lam * lag_j) + eps)` with lags in days.
    """
    scores = {}
    for tag, times in history.usages(user).items():
        lags = time_lags(times, t_ref) / SECONDS_PER_DAY
        scores[tag] = math.log(float(np.exp(-lam * lags).sum()) + GIRP_EPSILON)
    return scores


class TagPredictor(abc.ABC):
    """
    Scores tags for a (user, resource) query at a reference time.

    Tags absent from the returned scores have no evidence, which ranks them
    below all scored tags.
    """

    # the name under which the predictor is registered
    name: str = None

    def fit(self, train: Folksonomy) -> "TagPredictor":
        """Build the predictor's state from the training posts."""
        self.train = train
        return self

    @abc.abstractmethod
    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        pass

    def predict(self, user: str, resource: str, t_ref: int, k: int) -> ScoredTagList:
        """The `k` best tags for the query. See `top_k`."""
        return top_k(self.score(user, resource, t_ref), k)

    def _fitted(self, attr: str):
        value = getattr(self, attr, None)
        if value is None:
            raise DataError(f"{type(self).__name__} is not fitted")
        return value


class HistoryPredictor(TagPredictor):
    """Base for predictors using only the user's own tagging history."""

    def fit(self, train: Folksonomy) -> "HistoryPredictor":
        super().fit(train)
        self.history = TagHistory(train)
        return self


class MostPopularPredictor(HistoryPredictor):
    """Ranks a user's tags by how many of their posts use them (MP_u)."""

    name = "mp"

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        history = self._fitted("history")
        return {tag: float(n) for tag, n in history.counts(user).items()}


class RecencyPredictor(HistoryPredictor):
    """Ranks a user's tags by the timestamp of their last usage."""

    name = "recency"

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        history = self._fitted("history")
        return {tag: float(t) for tag, t in history.last_use(user).items()}


class BLLPredictor(HistoryPredictor):
    """Ranks a user's tags by their base-level activation (power-law decay)."""

    name = "bll"

    def __init__(self, params: BLLParams = BLLParams()):
        self.params = params.validate()

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        history = self._fitted("history")
        return bll_activation(history, user, t_ref, self.params.d)


class GIRPPredictor(HistoryPredictor):
    """Ranks a user's tags by frequency with exponential time decay."""

    name = "girp"

    def __init__(self, params: GIRPParams = GIRPParams()):
        self.params = params.validate()

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        history = self._fitted("history")
        return girp_score(history, user, t_ref, self.params.lam)


class SemConPredictor(TagPredictor):
    """
    Ranks tags by their co-occurrence with the tags other users already
    assigned to the queried resource.
    """

    name = "semcon"

    def fit(self, train: Folksonomy) -> "SemConPredictor":
        super().fit(train)
        self.cooc: CoocMatrix = build_cooccurrence(train)
        return self

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        cooc = self._fitted("cooc")
        context = resource_context(self.train, resource, user)
        if not context:
            return {}
        return cooc.context_scores(context)


class BLLACPredictor(TagPredictor):
    """
    Combines the base-level activation with the semantic context:
    `A(i) = beta * norm(B)(i) + (1 - beta) * norm(S)(i)`.

    Each component is max-normalized over its own support, a tag missing
    from a component contributes 0 to it.
    """

    name = "bllac"

    def __init__(self, params: BLLParams = BLLParams()):
        self.params = params.validate()
        self.bll = BLLPredictor(BLLParams(d=params.d))
        self.semcon = SemConPredictor()

    def fit(self, train: Folksonomy) -> "BLLACPredictor":
        super().fit(train)
        self.bll.fit(train)
        self.semcon.fit(train)
        return self

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        self._fitted("train")
        beta = self.params.beta
        base = max_normalize_log(self.bll.score(user, resource, t_ref))
        context = max_normalize(self.semcon.score(user, resource, t_ref))
        return {
            tag: beta * base.get(tag, 0.0) + (1 - beta) * context.get(tag, 0.0)
            for tag in base.keys() | context.keys()
        }
