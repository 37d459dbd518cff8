"""Fixtures and reference predictors for testing."""

import os
import pkgutil
from typing import Dict, Iterable, Tuple

import numpy as np
import pytest

from tagreuse.folksonomy import ChronoSplit, Folksonomy, Post, chronological_split, parse_posts
from tagreuse.predictors import Scores, TagPredictor
from tagreuse.synthetic import SynthParams, synth_folksonomy

SEED = int(os.getenv("TAGREUSE_TEST_SEED", 1))

# a narrow folksonomy whose users drift towards recently used tags
NARROW_PARAMS = SynthParams(
    num_users=150,
    posts_per_user=40,
    num_tags=2000,
    d_gen=1.0,
    context_strength=0.3,
    sharing_rate=0.0,
    reuse_rate=0.8,
)

# a broad folksonomy where resource topics dominate the tags
BROAD_PARAMS = SynthParams(
    num_users=150,
    posts_per_user=40,
    num_tags=2000,
    d_gen=1.0,
    context_strength=0.8,
    sharing_rate=0.8,
    reuse_rate=0.8,
)


def fixture_text() -> str:
    """The packaged 6-line dataset."""
    return pkgutil.get_data("tagreuse", "data/fixture.tsv").decode("utf8")


@pytest.fixture
def fixture_folksonomy() -> Folksonomy:
    """
    3 users, 4 resources and 5 tags. `u1` and `u2` have test posts, `u3` has
    a single post.
    """
    return parse_posts(fixture_text().splitlines(keepends=True), source="fixture.tsv")


@pytest.fixture
def fixture_split(fixture_folksonomy: Folksonomy) -> ChronoSplit:
    return chronological_split(fixture_folksonomy)


def random_folksonomy(
    rng: np.random.Generator,
    num_posts: int = 100,
    num_users: int = 8,
    num_resources: int = 20,
    num_tags: int = 12,
    max_tags: int = 4,
    horizon: int = 100 * 86400,
) -> Folksonomy:
    """A folksonomy of uniformly random posts, for comparing with oracles."""
    posts = []
    for _ in range(num_posts):
        size = int(rng.integers(1, max_tags + 1))
        tags = rng.choice(num_tags, size=size, replace=False)
        posts.append(
            Post(
                user=f"u{rng.integers(num_users)}",
                resource=f"r{rng.integers(num_resources)}",
                tags=frozenset(f"t{t}" for t in tags),
                timestamp=int(rng.integers(horizon)),
            )
        )
    return Folksonomy(posts)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(SEED)


@pytest.fixture(scope="module")
def narrow_split() -> ChronoSplit:
    return chronological_split(synth_folksonomy(NARROW_PARAMS, SEED))


@pytest.fixture(scope="module")
def broad_split() -> ChronoSplit:
    return chronological_split(synth_folksonomy(BROAD_PARAMS, SEED))


def planted_folksonomy(
    seed: int,
    num_users: int = 40,
    posts_per_user: int = 20,
    num_groups: int = 2,
    group_tags: int = 20,
    favourites: int = 5,
    tags_per_post: int = 3,
    favourite_rate: float = 0.8,
) -> Folksonomy:
    """
    Users of a group pick most of their tags among a few favourites from
    their group's tags. Every post is on a new resource.
    """
    rng = np.random.default_rng(seed)
    num_tags = num_groups * group_tags
    posts = []
    resource = 0
    for user in range(num_users):
        group = user % num_groups
        liked = group * group_tags + rng.choice(group_tags, favourites, replace=False)
        for i in range(posts_per_user):
            tags = set()
            while len(tags) < tags_per_post:
                if rng.random() < favourite_rate:
                    tags.add(int(rng.choice(liked)))
                else:
                    tags.add(int(rng.integers(num_tags)))
            posts.append(
                Post(
                    user=f"u{user:02d}",
                    resource=f"r{resource}",
                    tags=frozenset(f"t{t:02d}" for t in tags),
                    timestamp=1000 * i + user,
                )
            )
            resource += 1
    return Folksonomy(posts)


class RandomPredictor(TagPredictor):
    """Scores every training tag at random."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit(self, train: Folksonomy) -> "RandomPredictor":
        super().fit(train)
        self.rng = np.random.default_rng(self.seed)
        return self

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        values = self.rng.random(len(self.train.tags))
        return dict(zip(self.train.tags, values.tolist()))


class OraclePredictor(TagPredictor):
    """Knows the tags of the test posts."""

    name = "oracle"

    def __init__(self, test: Iterable[Post]):
        self.answers: Dict[Tuple[str, str], frozenset] = {
            (p.user, p.resource): p.tags for p in test
        }

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        return {tag: 1.0 for tag in self.answers.get((user, resource), ())}
