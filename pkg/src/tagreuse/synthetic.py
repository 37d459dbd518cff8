"""
Seeded generator of synthetic folksonomies with controllable reuse
behaviour, semantic context and narrowness.

Users post at random intervals, in global chronological order. For each
post, a user either tags a resource another user already posted (with
probability `sharing_rate`) or a new one. Every resource has a few topic
tags. Each tag slot of a post is filled with:

- a topic tag of the resource, with probability `context_strength`;
- otherwise, one of the user's own earlier tags with probability
  `reuse_rate`, chosen with weight `sum_j lag_j ** -d_gen` over its earlier
  usages (lags in days, at least 1);
- otherwise, a tag new to the user, drawn by global Zipf popularity.
"""

import logging
from typing import Dict, List, NamedTuple, Set

import numpy as np

from .folksonomy import Folksonomy, Post
from .utils import SECONDS_PER_DAY, ParameterError

logger = logging.getLogger(__name__)

# 2010-01-01T00:00:00Z
EPOCH_START = 1262304000
# tries to find a shared resource, or a tag new to the user, before giving up
MAX_DRAWS = 32


class SynthParams(NamedTuple):
    num_users: int = 100
    posts_per_user: int = 20
    num_tags: int = 1000
    tags_per_post: int = 3
    # power-law decay exponent of the reuse weights
    d_gen: float = 0.5
    # probability that a tag slot is filled from the resource's topic tags
    context_strength: float = 0.5
    # probability that a post is on a resource posted by another user
    sharing_rate: float = 0.0
    # probability that a non-topic tag slot reuses one of the user's tags
    reuse_rate: float = 0.6
    mean_gap_days: float = 2.0
    # number of topic tags of each resource
    topic_size: int = 4
    zipf_exponent: float = 1.0
    # users start posting within this many days of the start
    horizon_days: float = 30.0

    def validate(self) -> "SynthParams":
        if self.num_users < 1 or self.posts_per_user < 1:
            raise ParameterError("synth needs at least one user and one post per user")
        if self.tags_per_post < 1 or self.topic_size < 1:
            raise ParameterError("synth tags per post and topic size must be positive")
        if self.num_tags < max(self.tags_per_post, self.topic_size):
            raise ParameterError(
                f"synth vocabulary of {self.num_tags} tags is too small for "
                f"{self.tags_per_post} tags per post and {self.topic_size} topic tags"
            )
        for name in ("context_strength", "sharing_rate", "reuse_rate"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ParameterError(f"synth {name} must be in [0, 1]: {value}")
        if not self.d_gen >= 0:
            raise ParameterError(f"synth d_gen must be non-negative: {self.d_gen}")
        if not self.mean_gap_days > 0 or not self.horizon_days >= 0:
            raise ParameterError("synth time scales must be positive")
        if not self.zipf_exponent >= 0:
            raise ParameterError("synth zipf exponent must be non-negative")
        return self


class _UserState:
    """The tagging history of one user during generation."""

    def __init__(self):
        self.vocabulary: Dict[int, int] = {}
        self.tags: List[int] = []
        self.local: List[int] = []
        self.days: List[float] = []
        self.resources: Set[int] = set()

    def record(self, tags: List[int], day: float):
        for tag in tags:
            local = self.vocabulary.setdefault(tag, len(self.vocabulary))
            self.tags.append(tag)
            self.local.append(local)
            self.days.append(day)

    def reuse_weights(self, day: float, d: float) -> np.ndarray:
        """The weight of each vocabulary tag, in order of first use."""
        lags = np.maximum(day - np.array(self.days), 1.0)
        return np.bincount(
            np.array(self.local), weights=lags ** -d, minlength=len(self.vocabulary)
        )


class _Generator:
    def __init__(self, params: SynthParams, seed: int):
        self.params = params
        self.rng = np.random.default_rng(seed)
        ranks = np.arange(1, params.num_tags + 1, dtype=np.float64)
        popularity = ranks ** -params.zipf_exponent
        self.popularity = popularity / popularity.sum()
        width = len(str(params.num_tags - 1))
        self.tag_names = [f"t{i:0{width}d}" for i in range(params.num_tags)]
        self.topics: List[np.ndarray] = []

    def new_resource(self) -> int:
        topic = self.rng.choice(
            self.params.num_tags, self.params.topic_size, replace=False, p=self.popularity
        )
        self.topics.append(topic)
        return len(self.topics) - 1

    def pick_resource(self, state: _UserState) -> int:
        if self.topics and self.rng.random() < self.params.sharing_rate:
            for _ in range(MAX_DRAWS):
                resource = int(self.rng.integers(len(self.topics)))
                if resource not in state.resources:
                    return resource
        return self.new_resource()

    def fresh_tag(self, state: _UserState, chosen: List[int]) -> int:
        for _ in range(MAX_DRAWS):
            tag = int(self.rng.choice(self.params.num_tags, p=self.popularity))
            if tag not in state.vocabulary and tag not in chosen:
                return tag
        # the user knows most popular tags, settle for any unused one
        free = np.setdiff1d(np.arange(self.params.num_tags), chosen)
        return int(self.rng.choice(free))

    def reused_tag(self, state: _UserState, chosen: List[int], day: float) -> int:
        weights = state.reuse_weights(day, self.params.d_gen)
        tags = np.array(list(state.vocabulary))
        weights[np.isin(tags, chosen)] = 0.0
        total = weights.sum()
        if total <= 0:
            return -1
        return int(tags[self.rng.choice(len(tags), p=weights / total)])

    def post_tags(self, state: _UserState, resource: int, day: float) -> List[int]:
        params = self.params
        chosen: List[int] = []
        for _ in range(params.tags_per_post):
            tag = -1
            if self.rng.random() < params.context_strength:
                topic = [t for t in self.topics[resource] if t not in chosen]
                if topic:
                    tag = int(topic[self.rng.integers(len(topic))])
            elif state.vocabulary and self.rng.random() < params.reuse_rate:
                tag = self.reused_tag(state, chosen, day)
            if tag < 0:
                tag = self.fresh_tag(state, chosen)
            chosen.append(tag)
        return chosen


def synth_folksonomy(params: SynthParams, seed: int) -> Folksonomy:
    """
    Generate a folksonomy. The same parameters and seed always give the same
    folksonomy.
    """
    params.validate()
    generator = _Generator(params, seed)
    rng = generator.rng

    events = []
    for user in range(params.num_users):
        start = rng.uniform(0.0, params.horizon_days)
        days = start + np.cumsum(rng.exponential(params.mean_gap_days, params.posts_per_user))
        events += [(float(day), user) for day in days]
    events.sort()

    user_width = len(str(params.num_users - 1))
    states = [_UserState() for _ in range(params.num_users)]
    posts = []
    for day, user in events:
        state = states[user]
        resource = generator.pick_resource(state)
        tags = generator.post_tags(state, resource, day)
        state.resources.add(resource)
        state.record(tags, day)
        posts.append(
            Post(
                user=f"u{user:0{user_width}d}",
                resource=f"r{resource}",
                tags=frozenset(generator.tag_names[t] for t in tags),
                timestamp=EPOCH_START + int(round(day * SECONDS_PER_DAY)),
            )
        )

    folksonomy = Folksonomy(posts)
    logger.info("generated %s", folksonomy)
    return folksonomy
