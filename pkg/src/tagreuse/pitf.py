"""
Pairwise interaction tensor factorization (PITF).

A tag's score for a (user, resource) post is the sum of a user-tag and a
resource-tag interaction:

```
y(u, r, t) = <U[u], TU[t]> + <R[r], TR[t]>
```

The factors are learned by stochastic gradient ascent on the pairwise
ranking objective `ln sigmoid(y(u, r, t_pos) - y(u, r, t_neg))` with L2
regularization, where `t_pos` is a tag of the post and `t_neg` is not.
"""

import io
import logging
import math
from pathlib import Path
from typing import Callable, Dict, NamedTuple, Optional, Tuple

import numpy as np
from numba import njit
from scipy.special import expit

from .folksonomy import Folksonomy
from .predictors import Scores, TagPredictor
from .utils import DataError, ParameterError, atomic_write

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
INIT_STD = 0.01


class TrainConfig(NamedTuple):
    learn_rate: float = 0.05
    regularization: float = 5e-5
    epochs: int = 100
    # negative tags sampled for each (post, tag) incidence
    negatives: int = 1
    seed: int = 0

    def validate(self) -> "TrainConfig":
        if not self.learn_rate > 0:
            raise ParameterError(f"pitf learn rate must be positive: {self.learn_rate}")
        if not self.regularization >= 0:
            raise ParameterError(
                f"pitf regularization must be non-negative: {self.regularization}"
            )
        if self.epochs < 1:
            raise ParameterError(f"pitf epochs must be positive: {self.epochs}")
        if self.negatives < 1:
            raise ParameterError(f"pitf negatives must be positive: {self.negatives}")
        return self


class EpochStats(NamedTuple):
    """Summary of one training epoch."""

    epoch: int
    # number of pairwise updates applied
    steps: int
    # mean of `-ln sigmoid(x)` over the updates, measured before each update
    mean_loss: float


class PitfModel:
    """The four factor tables of a PITF model."""

    def __init__(
        self,
        user_factors: np.ndarray,
        resource_factors: np.ndarray,
        tag_user_factors: np.ndarray,
        tag_resource_factors: np.ndarray,
        seed: int,
    ):
        self.user_factors = user_factors
        self.resource_factors = resource_factors
        self.tag_user_factors = tag_user_factors
        self.tag_resource_factors = tag_resource_factors
        self.seed = seed

    @property
    def k(self) -> int:
        return self.user_factors.shape[1]

    @property
    def sizes(self) -> Tuple[int, int, int]:
        """The number of users, resources and tags."""
        return (
            self.user_factors.shape[0],
            self.resource_factors.shape[0],
            self.tag_user_factors.shape[0],
        )

    def tables(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (
            self.user_factors,
            self.resource_factors,
            self.tag_user_factors,
            self.tag_resource_factors,
        )

    def copy(self) -> "PitfModel":
        return PitfModel(*[t.copy() for t in self.tables()], seed=self.seed)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PitfModel):
            return NotImplemented
        return self.seed == other.seed and all(
            a.dtype == b.dtype and np.array_equal(a, b)
            for a, b in zip(self.tables(), other.tables())
        )

    __hash__ = None


def init_model(
    num_users: int, num_resources: int, num_tags: int, k: int, seed: int
) -> PitfModel:
    """
    Draw all factors from `normal(0, 0.01)` with a generator seeded by
    `seed`. The same arguments always give the same model.
    """
    if k < 1:
        raise ParameterError(f"pitf factor count must be positive: {k}")
    if min(num_users, num_resources, num_tags) < 1:
        raise ParameterError("pitf needs at least one user, resource and tag")
    rng = np.random.default_rng(seed)
    tables = [
        rng.normal(0.0, INIT_STD, size=(n, k))
        for n in (num_users, num_resources, num_tags, num_tags)
    ]
    return PitfModel(*tables, seed=seed)


def _check_index(index: int, size: int, what: str):
    if not 0 <= index < size:
        raise ParameterError(f"{what} index out of range: {index} (size {size})")


def pitf_score(model: PitfModel, user: int, resource: int, tag: int) -> float:
    """The bilinear score of `tag` for the (`user`, `resource`) post."""
    num_users, num_resources, num_tags = model.sizes
    _check_index(user, num_users, "user")
    _check_index(resource, num_resources, "resource")
    _check_index(tag, num_tags, "tag")
    return float(
        model.user_factors[user] @ model.tag_user_factors[tag]
        + model.resource_factors[resource] @ model.tag_resource_factors[tag]
    )


@njit(cache=False)
def _bpr_update(U, R, TU, TR, u, r, tp, tn, alpha, gamma):
    k = U.shape[1]
    x = 0.0
    for f in range(k):
        x += U[u, f] * (TU[tp, f] - TU[tn, f]) + R[r, f] * (TR[tp, f] - TR[tn, f])

    # derivative of ln sigmoid(x), and -ln sigmoid(x), without overflow
    if x >= 0:
        e = math.exp(-x)
        delta = e / (1.0 + e)
        loss = math.log1p(e)
    else:
        e = math.exp(x)
        delta = 1.0 / (1.0 + e)
        loss = -x + math.log1p(e)

    for f in range(k):
        uf = U[u, f]
        rf = R[r, f]
        tup = TU[tp, f]
        tun = TU[tn, f]
        trp = TR[tp, f]
        trn = TR[tn, f]
        U[u, f] = uf + alpha * (delta * (tup - tun) - gamma * uf)
        R[r, f] = rf + alpha * (delta * (trp - trn) - gamma * rf)
        TU[tp, f] = tup + alpha * (delta * uf - gamma * tup)
        TU[tn, f] = tun + alpha * (-delta * uf - gamma * tun)
        TR[tp, f] = trp + alpha * (delta * rf - gamma * trp)
        TR[tn, f] = trn + alpha * (-delta * rf - gamma * trn)

    return loss


@njit(cache=False)
def _sgd_epoch(U, R, TU, TR, users, resources, positives, negatives, alpha, gamma):
    total = 0.0
    for i in range(users.shape[0]):
        total += _bpr_update(
            U,
            R,
            TU,
            TR,
            users[i],
            resources[i],
            positives[i],
            negatives[i],
            alpha,
            gamma,
        )
    return total


def bpr_step(
    model: PitfModel,
    user: int,
    resource: int,
    tag_pos: int,
    tag_neg: int,
    learn_rate: float,
    regularization: float,
) -> PitfModel:
    """
    Apply one pairwise update in place, and return the model.

    Only the rows of `user`, `resource`, `tag_pos` and `tag_neg` change.
    """
    if tag_pos == tag_neg:
        raise ParameterError("positive and negative tags must differ")
    num_users, num_resources, num_tags = model.sizes
    _check_index(user, num_users, "user")
    _check_index(resource, num_resources, "resource")
    _check_index(tag_pos, num_tags, "tag")
    _check_index(tag_neg, num_tags, "tag")
    _bpr_update(
        *model.tables(),
        user,
        resource,
        tag_pos,
        tag_neg,
        float(learn_rate),
        float(regularization),
    )
    return model


def _pair_rows(model: PitfModel, user, resource, tag_pos, tag_neg):
    U, R, TU, TR = model.tables()
    return U[user], R[resource], TU[tag_pos], TU[tag_neg], TR[tag_pos], TR[tag_neg]


def bpr_objective(
    model: PitfModel,
    user: int,
    resource: int,
    tag_pos: int,
    tag_neg: int,
    regularization: float,
) -> float:
    """`ln sigmoid(x) - (gamma / 2) * |theta|^2` over the rows of the pair."""
    u, r, tup, tun, trp, trn = _pair_rows(model, user, resource, tag_pos, tag_neg)
    x = u @ (tup - tun) + r @ (trp - trn)
    norm = sum(float(v @ v) for v in (u, r, tup, tun, trp, trn))
    return float(-np.logaddexp(0.0, -x)) - 0.5 * regularization * norm


def bpr_gradient(
    model: PitfModel,
    user: int,
    resource: int,
    tag_pos: int,
    tag_neg: int,
    regularization: float,
) -> Dict[str, np.ndarray]:
    """
    Gradient of `bpr_objective` with respect to each row of the pair, keyed
    by `user`, `resource`, `tag_user_pos`, `tag_user_neg`,
    `tag_resource_pos` and `tag_resource_neg`.
    """
    u, r, tup, tun, trp, trn = _pair_rows(model, user, resource, tag_pos, tag_neg)
    x = u @ (tup - tun) + r @ (trp - trn)
    delta = expit(-x)
    gamma = regularization
    return {
        "user": delta * (tup - tun) - gamma * u,
        "resource": delta * (trp - trn) - gamma * r,
        "tag_user_pos": delta * u - gamma * tup,
        "tag_user_neg": -delta * u - gamma * tun,
        "tag_resource_pos": delta * r - gamma * trp,
        "tag_resource_neg": -delta * r - gamma * trn,
    }


def sampled_bpr_loss(
    model: PitfModel,
    users: np.ndarray,
    resources: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
) -> float:
    """Mean `-ln sigmoid(x)` over a fixed sample of pairs."""
    U, R, TU, TR = model.tables()
    x = np.einsum("ij,ij->i", U[users], TU[positives] - TU[negatives])
    x += np.einsum("ij,ij->i", R[resources], TR[positives] - TR[negatives])
    return float(np.logaddexp(0.0, -x).mean())


class Incidences(NamedTuple):
    """The positive (post, tag) incidences of a folksonomy, as index arrays."""

    users: np.ndarray
    resources: np.ndarray
    tags: np.ndarray
    posts: np.ndarray
    # sorted codes `post * |T| + tag` of every incidence
    codes: np.ndarray


def build_incidences(train: Folksonomy) -> Incidences:
    """
    Index every (post, tag) incidence of `train`. Posts using the whole tag
    vocabulary are left out, since no negative tag exists for them.
    """
    num_tags = len(train.tags)
    users, resources, tags, posts = [], [], [], []
    for post_idx, post in enumerate(train.posts):
        if len(post.tags) >= num_tags:
            logger.warning(
                "post of %s on %s uses every tag, skipped", post.user, post.resource
            )
            continue
        for tag in sorted(post.tags):
            users.append(train.user_index[post.user])
            resources.append(train.resource_index[post.resource])
            tags.append(train.tag_index[tag])
            posts.append(post_idx)

    users = np.array(users, dtype=np.int64)
    resources = np.array(resources, dtype=np.int64)
    tags = np.array(tags, dtype=np.int64)
    posts = np.array(posts, dtype=np.int64)
    codes = np.sort(posts * num_tags + tags)
    return Incidences(users, resources, tags, posts, codes)


def sample_negatives(
    rng: np.random.Generator, incidences: Incidences, order: np.ndarray, num_tags: int
) -> np.ndarray:
    """
    Draw a tag for each index in `order`, uniformly among the tags not in the
    corresponding post (rejection sampling).
    """
    posts = incidences.posts[order]
    negatives = rng.integers(num_tags, size=len(order))
    rejected = np.isin(posts * num_tags + negatives, incidences.codes)
    while rejected.any():
        redraw = rng.integers(num_tags, size=int(rejected.sum()))
        negatives[rejected] = redraw
        rejected[rejected] = np.isin(
            posts[rejected] * num_tags + redraw, incidences.codes
        )
    return negatives


def train(
    model: PitfModel,
    train: Folksonomy,
    config: TrainConfig,
    callback: Optional[Callable[[PitfModel, EpochStats], None]] = None,
) -> PitfModel:
    """
    Fit `model` to `train` in place, and return it.

    Each epoch visits every (post, tag) incidence in an order shuffled by
    a generator seeded with `config.seed`, and for each draws
    `config.negatives` negative tags, applying one `bpr_step` per negative.

    Args:
        model: a model sized to `train`'s vocabularies
        train: the training posts
        config: the learning parameters
        callback: called with the model and statistics after each epoch
    """
    config.validate()
    if not train.posts:
        raise DataError("cannot train on an empty folksonomy")
    num_tags = len(train.tags)
    if num_tags < 2:
        raise ParameterError("pitf training needs at least 2 tags")
    expected = (len(train.users), len(train.resources), num_tags)
    if model.sizes != expected:
        raise ParameterError(f"model sizes {model.sizes} don't match data {expected}")

    incidences = build_incidences(train)
    rng = np.random.default_rng(config.seed)
    tables = model.tables()

    for epoch in range(1, config.epochs + 1):
        order = np.repeat(rng.permutation(len(incidences.tags)), config.negatives)
        negatives = sample_negatives(rng, incidences, order, num_tags)
        total = _sgd_epoch(
            *tables,
            incidences.users[order],
            incidences.resources[order],
            incidences.tags[order],
            negatives,
            float(config.learn_rate),
            float(config.regularization),
        )
        stats = EpochStats(epoch, len(order), total / max(len(order), 1))
        logger.debug("pitf epoch %d: loss %.6f", epoch, stats.mean_loss)
        if callback is not None:
            callback(model, stats)

    return model


def save_model(model: PitfModel, path: Path):
    """Write a checkpoint of `model` (numpy `.npz` archive)."""
    buffer = io.BytesIO()
    np.savez(
        buffer,
        format_version=np.array(FORMAT_VERSION),
        k=np.array(model.k),
        sizes=np.array(model.sizes),
        seed=np.array(model.seed),
        user_factors=model.user_factors,
        resource_factors=model.resource_factors,
        tag_user_factors=model.tag_user_factors,
        tag_resource_factors=model.tag_resource_factors,
    )
    atomic_write(path, buffer.getvalue())


def load_model(path: Path) -> PitfModel:
    """Read a checkpoint written by `save_model`."""
    with np.load(path, allow_pickle=False) as archive:
        version = int(archive["format_version"])
        if version != FORMAT_VERSION:
            raise DataError(f"unsupported pitf checkpoint version: {version}")
        model = PitfModel(
            archive["user_factors"],
            archive["resource_factors"],
            archive["tag_user_factors"],
            archive["tag_resource_factors"],
            seed=int(archive["seed"]),
        )
        if model.k != int(archive["k"]) or model.sizes != tuple(archive["sizes"]):
            raise DataError(f"corrupt pitf checkpoint: {path}")
    return model


class PitfParams(NamedTuple):
    k: int = 64
    learn_rate: float = 0.05
    regularization: float = 5e-5
    epochs: int = 100
    negatives: int = 1


class PitfPredictor(TagPredictor):
    """
    Scores every tag with a PITF model trained on the training posts.

    An unseen user or resource contributes nothing to the score, and a query
    with both unseen has no prediction.
    """

    name = "pitf"

    def __init__(self, params: PitfParams = PitfParams(), seed: int = 0):
        self.params = params
        self.seed = seed
        self.config = TrainConfig(
            params.learn_rate, params.regularization, params.epochs, params.negatives, seed
        ).validate()

    def fit(self, data: Folksonomy) -> "PitfPredictor":
        super().fit(data)
        model = init_model(
            len(data.users), len(data.resources), len(data.tags), self.params.k, self.seed
        )
        self.model = train(model, data, self.config)
        return self

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        model = self._fitted("model")
        user_idx = self.train.user_index.get(user, None)
        resource_idx = self.train.resource_index.get(resource, None)
        if user_idx is None and resource_idx is None:
            return {}
        scores = np.zeros(len(self.train.tags))
        if user_idx is not None:
            scores += model.tag_user_factors @ model.user_factors[user_idx]
        if resource_idx is not None:
            scores += model.tag_resource_factors @ model.resource_factors[resource_idx]
        return {tag: float(s) for tag, s in zip(self.train.tags, scores)}
