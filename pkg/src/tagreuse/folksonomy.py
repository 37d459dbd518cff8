"""
Dataset model for folksonomies: ingestion, chronological splitting, tag
co-occurrence and narrowness classification.

The dataset format is UTF-8 text with one post per line and four TAB
separated fields:

```
user<TAB>resource<TAB>unix_timestamp<TAB>tag1,tag2,...
```

Lines starting with `#` are comments.
"""

import hashlib
import logging
import math
from collections import Counter
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    Iterator,
    List,
    NamedTuple,
    TextIO,
    Tuple,
)

import numpy as np
import scipy.sparse as sp

from .utils import DataError, ParseError

logger = logging.getLogger(__name__)

# a folksonomy is narrow at or below this many posts per resource
NARROW_MAX = Fraction(105, 100)
# and broad at or above this many
BROAD_MIN = Fraction(2)


def normalize_tag(tag: str) -> str:
    """Tags are compared case-insensitively and without surrounding space."""
    return tag.strip().casefold()


class Post(NamedTuple):
    """One tagging event: a user annotating a resource with some tags."""

    user: str
    resource: str
    tags: FrozenSet[str]
    # seconds since the Unix epoch
    timestamp: int

    @staticmethod
    def build(user: str, resource: str, tags: Iterable[str], timestamp: int) -> "Post":
        """Build a post, validating its tags and timestamp."""
        tags = frozenset(tags)
        if not tags:
            raise DataError(f"post of {user} on {resource} has no tags")
        if timestamp < 0:
            raise DataError(f"post of {user} on {resource} has negative timestamp")
        return Post(user, resource, tags, int(timestamp))

    def to_line(self) -> str:
        """Format the post as a canonical dataset line (tags sorted)."""
        tags = ",".join(sorted(self.tags))
        return f"{self.user}\t{self.resource}\t{self.timestamp}\t{tags}\n"


class FolksonomyStats(NamedTuple):
    """Size of a folksonomy."""

    num_users: int
    num_resources: int
    num_tags: int
    num_posts: int
    # total number of (post, tag) incidences
    num_assignments: int


class Folksonomy:
    """
    An indexed, immutable collection of posts.

    At most one post is kept per (user, resource) pair: a re-tagging of the
    same resource by the same user replaces the earlier post. When both
    posts have the same timestamp, the one read last wins.

    Posts are held in canonical order: by user, then by timestamp, with
    ties kept in the order the posts were given.
    """

    def __init__(self, posts: Iterable[Post]):
        latest: Dict[Tuple[str, str], Tuple[int, Post]] = {}
        for seq, post in enumerate(posts):
            key = (post.user, post.resource)
            previous = latest.get(key, None)
            if previous is None or post.timestamp >= previous[1].timestamp:
                latest[key] = (seq, post)

        ordered = sorted(
            latest.values(), key=lambda i: (i[1].user, i[1].timestamp, i[0])
        )
        self.posts: Tuple[Post, ...] = tuple(p for _, p in ordered)

        self.users: Tuple[str, ...] = tuple(sorted({p.user for p in self.posts}))
        self.resources: Tuple[str, ...] = tuple(
            sorted({p.resource for p in self.posts})
        )
        self.tags: Tuple[str, ...] = tuple(
            sorted({t for p in self.posts for t in p.tags})
        )
        self.user_index: Dict[str, int] = {u: i for i, u in enumerate(self.users)}
        self.resource_index: Dict[str, int] = {
            r: i for i, r in enumerate(self.resources)
        }
        self.tag_index: Dict[str, int] = {t: i for i, t in enumerate(self.tags)}

        by_user: Dict[str, List[Post]] = {}
        by_resource: Dict[str, List[Post]] = {}
        for post in self.posts:
            by_user.setdefault(post.user, []).append(post)
            by_resource.setdefault(post.resource, []).append(post)
        self._by_user = {k: tuple(v) for k, v in by_user.items()}
        self._by_resource = {k: tuple(v) for k, v in by_resource.items()}

    def __len__(self) -> int:
        return len(self.posts)

    def __iter__(self) -> Iterator[Post]:
        return iter(self.posts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Folksonomy):
            return NotImplemented
        return self.posts == other.posts

    __hash__ = None

    def __repr__(self) -> str:
        stats = self.stats()
        return (
            f"Folksonomy(users={stats.num_users}, resources={stats.num_resources}, "
            f"tags={stats.num_tags}, posts={stats.num_posts})"
        )

    def user_posts(self, user: str) -> Tuple[Post, ...]:
        """The posts of `user`, sorted by timestamp."""
        return self._by_user.get(user, ())

    def resource_posts(self, resource: str) -> Tuple[Post, ...]:
        """The posts on `resource`, by any user."""
        return self._by_resource.get(resource, ())

    def stats(self) -> FolksonomyStats:
        return FolksonomyStats(
            num_users=len(self.users),
            num_resources=len(self.resources),
            num_tags=len(self.tags),
            num_posts=len(self.posts),
            num_assignments=sum(len(p.tags) for p in self.posts),
        )


def parse_line(line: str, number: int, source: str = "<stream>") -> Post:
    """Parse a single (non-comment) dataset line into a `Post`."""
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 4:
        raise ParseError(f"expected 4 fields, found {len(fields)}", number, source)
    user, resource, timestamp, tags = fields

    user = user.strip()
    resource = resource.strip()
    if not user or not resource:
        raise ParseError("empty user or resource id", number, source)

    try:
        timestamp = int(timestamp.strip())
    except ValueError:
        raise ParseError(f"invalid timestamp: {timestamp!r}", number, source) from None
    if timestamp < 0:
        raise ParseError(f"negative timestamp: {timestamp}", number, source)

    tags = {normalize_tag(t) for t in tags.split(",")}
    tags.discard("")
    if not tags:
        raise ParseError("empty tag list", number, source)

    return Post(user, resource, frozenset(tags), timestamp)


def parse_posts(stream: Iterable[str], source: str = "<stream>") -> Folksonomy:
    """
    Parse a dataset into a `Folksonomy`.

    Args:
        stream: the lines of the dataset
        source: name of the stream, used in error messages

    Returns:
        the folksonomy, with duplicate (user, resource) posts resolved by
        keeping the latest one
    """
    posts = []
    for number, line in enumerate(stream, start=1):
        if line.startswith("#") or not line.strip():
            continue
        posts.append(parse_line(line, number, source))

    if not posts:
        raise DataError(f"empty dataset: {source}")

    folksonomy = Folksonomy(posts)
    if len(folksonomy) < len(posts):
        logger.info(
            "%s: dropped %d re-tagged posts", source, len(posts) - len(folksonomy)
        )
    logger.info("%s: %s", source, folksonomy)
    return folksonomy


def _decode_lines(stream: Iterable[bytes], source: str) -> Iterator[str]:
    for number, raw in enumerate(stream, start=1):
        try:
            yield raw.decode("utf8")
        except UnicodeDecodeError as error:
            raise ParseError(
                f"invalid UTF-8 at byte {error.start}", number, source
            ) from None


def read_posts(path: Path) -> Folksonomy:
    """Read the dataset file at `path`. See `parse_posts`."""
    with open(path, "rb") as fp:
        return parse_posts(_decode_lines(fp, str(path)), source=str(path))


def format_posts(posts: Iterable[Post]) -> str:
    """Format posts in the canonical dataset format."""
    return "".join(p.to_line() for p in posts)


def write_posts(folksonomy: Folksonomy, stream: TextIO):
    """Write `folksonomy` to `stream` in the canonical dataset format."""
    stream.write(format_posts(folksonomy.posts))


class ChronoSplit(NamedTuple):
    """
    Per-user leave-newest-post-out partition of a folksonomy.

    The reference time of a test query is the timestamp of its test post.
    """

    train: Folksonomy
    # one post per user with at least 2 posts, sorted by user
    test: Tuple[Post, ...]


def chronological_split(folksonomy: Folksonomy) -> ChronoSplit:
    """
    Allocate each user's most recent post to the test set, and the others to
    the training set. Users with a single post only contribute training data.

    Among posts sharing the latest timestamp, the one read last is the test
    post.
    """
    train_posts = []
    test_posts = []
    for user in folksonomy.users:
        posts = folksonomy.user_posts(user)
        if len(posts) >= 2:
            train_posts.extend(posts[:-1])
            test_posts.append(posts[-1])
        else:
            train_posts.extend(posts)

    split = ChronoSplit(train=Folksonomy(train_posts), test=tuple(test_posts))
    logger.info("split: %d train posts, %d test posts", len(split.train), len(split.test))
    return split


def split_hash(split: ChronoSplit) -> str:
    """Hex SHA-256 digest identifying the exact content of a split."""
    digest = hashlib.sha256()
    digest.update(format_posts(split.train.posts).encode("utf8"))
    digest.update(b"\x00")
    digest.update(format_posts(split.test).encode("utf8"))
    return digest.hexdigest()


class FolksonomyType(str, Enum):
    """Classes of folksonomies by their degree of narrowness."""

    NARROW = "narrow"
    MIXED = "mixed"
    BROAD = "broad"


class NarrownessReport(NamedTuple):
    """The average number of posts per resource, and the implied class."""

    num_posts: int
    num_resources: int
    posts_per_resource: Fraction
    kind: FolksonomyType

    def truncated(self, digits: int = 3) -> Fraction:
        """The degree of narrowness truncated (not rounded) to `digits` decimals."""
        scale = 10 ** digits
        return Fraction(math.floor(self.posts_per_resource * scale), scale)

    def __str__(self) -> str:
        return f"narrowness {float(self.truncated()):.3f} ({self.kind.value})"


def narrowness_from_counts(num_posts: int, num_resources: int) -> NarrownessReport:
    """Classify a folksonomy from its post and resource counts."""
    if num_resources < 1 or num_posts < 1:
        raise DataError("narrowness of an empty folksonomy is undefined")
    ratio = Fraction(num_posts, num_resources)
    if ratio <= NARROW_MAX:
        kind = FolksonomyType.NARROW
    elif ratio >= BROAD_MIN:
        kind = FolksonomyType.BROAD
    else:
        kind = FolksonomyType.MIXED
    return NarrownessReport(num_posts, num_resources, ratio, kind)


def narrowness_degree(folksonomy: Folksonomy) -> NarrownessReport:
    """Compute `|P| / |R|` for `folksonomy` and classify it."""
    return narrowness_from_counts(len(folksonomy.posts), len(folksonomy.resources))


class CoocMatrix:
    """
    Symmetric tag co-occurrence counts: the number of posts in which two
    distinct tags were assigned together.

    Self co-occurrence is not stored.
    """

    def __init__(self, tags: Tuple[str, ...], matrix: sp.csr_matrix):
        self.tags = tags
        self.tag_index: Dict[str, int] = {t: i for i, t in enumerate(tags)}
        self.matrix = matrix

    @property
    def nnz(self) -> int:
        """Number of stored entries, counting both (a, b) and (b, a)."""
        return self.matrix.nnz

    def get(self, a: str, b: str) -> int:
        """The co-occurrence count of `a` and `b` (0 if never together)."""
        ia = self.tag_index.get(a, None)
        ib = self.tag_index.get(b, None)
        if ia is None or ib is None or ia == ib:
            return 0
        return int(self.matrix[ia, ib])

    def row(self, tag: str) -> Dict[str, int]:
        """The tags co-occurring with `tag`, and their counts."""
        idx = self.tag_index.get(tag, None)
        if idx is None:
            return {}
        start, stop = self.matrix.indptr[idx], self.matrix.indptr[idx + 1]
        return {
            self.tags[j]: int(v)
            for j, v in zip(self.matrix.indices[start:stop], self.matrix.data[start:stop])
        }

    def context_scores(self, context: Counter) -> Dict[str, float]:
        """
        Score every tag by its co-occurrence with a context multiset:
        `score(i) = sum_c multiplicity(c) * cooc(c, i)`.

        Tags with a zero score are omitted.
        """
        weights = np.zeros(len(self.tags), dtype=np.float64)
        for tag, count in context.items():
            idx = self.tag_index.get(tag, None)
            if idx is not None:
                weights[idx] += count
        if not weights.any():
            return {}
        # symmetric, so rows and columns are interchangeable
        scores = self.matrix @ weights
        return {self.tags[i]: float(scores[i]) for i in np.flatnonzero(scores)}


def build_cooccurrence(train: Folksonomy) -> CoocMatrix:
    """Count, for every pair of distinct tags, the posts containing both."""
    rows = []
    cols = []
    for post_idx, post in enumerate(train.posts):
        for tag in post.tags:
            rows.append(post_idx)
            cols.append(train.tag_index[tag])

    incidence = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.int64), (rows, cols)),
        shape=(len(train.posts), len(train.tags)),
    )
    matrix = (incidence.T @ incidence).tocsr()
    # every tag of a post co-occurs with itself, so the diagonal is fully
    # populated and zeroing it doesn't change the sparsity structure
    matrix.setdiag(0)
    matrix.eliminate_zeros()
    matrix.sort_indices()
    return CoocMatrix(train.tags, matrix)


def resource_context(train: Folksonomy, resource: str, user: str) -> Counter:
    """
    The tags assigned to `resource` in `train` by users other than `user`,
    with their multiplicity across posts.
    """
    context = Counter()
    for post in train.resource_posts(resource):
        if post.user != user:
            context.update(post.tags)
    return context


class TagHistory:
    """
    For each user, the timestamps at which each of their tags was used.

    Timestamps of a tag are sorted in increasing order.
    """

    def __init__(self, folksonomy: Folksonomy):
        usages: Dict[str, Dict[str, List[int]]] = {}
        for post in folksonomy.posts:
            user_usages = usages.setdefault(post.user, {})
            for tag in sorted(post.tags):
                user_usages.setdefault(tag, []).append(post.timestamp)
        self._usages: Dict[str, Dict[str, np.ndarray]] = {
            user: {
                tag: np.array(sorted(times), dtype=np.int64)
                for tag, times in user_usages.items()
            }
            for user, user_usages in usages.items()
        }

    def __contains__(self, user: str) -> bool:
        return user in self._usages

    def usages(self, user: str) -> Dict[str, np.ndarray]:
        """The usage timestamps of each tag of `user` (empty if unseen)."""
        return self._usages.get(user, {})

    def counts(self, user: str) -> Dict[str, int]:
        """The number of posts of `user` containing each of their tags."""
        return {tag: len(times) for tag, times in self.usages(user).items()}

    def last_use(self, user: str) -> Dict[str, int]:
        """The last timestamp at which `user` used each of their tags."""
        return {tag: int(times[-1]) for tag, times in self.usages(user).items()}
