"""
FolkRank: PageRank adapted to the tripartite user / resource / tag graph,
with tags ranked by the difference between a preference-biased run and an
unbiased run.
"""

import logging
from typing import Dict, Iterator, NamedTuple, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .folksonomy import Folksonomy
from .predictors import Scores, TagPredictor
from .utils import DataError, ParameterError

logger = logging.getLogger(__name__)

RankVector = np.ndarray


class FolkRankParams(NamedTuple):
    # weight of the propagated rank against the preference vector
    d: float = 0.7
    # L1 distance between successive iterates at which to stop
    tol: float = 1e-8
    max_iter: int = 200
    # use 0/1 edge weights instead of incidence counts
    binary: bool = False

    def validate(self) -> "FolkRankParams":
        if not 0 < self.d < 1:
            raise ParameterError(f"folkrank d must be in (0, 1): {self.d}")
        if not self.tol > 0:
            raise ParameterError(f"folkrank tol must be positive: {self.tol}")
        if self.max_iter < 1:
            raise ParameterError(f"folkrank max_iter must be positive: {self.max_iter}")
        return self


class FolkGraph:
    """
    The folksonomy as an undirected weighted graph over users, resources and
    tags, with its column-stochastic transition operator.

    Nodes are numbered users first, then resources, then tags, each in the
    folksonomy's sorted vocabulary order.
    """

    def __init__(
        self,
        users: Tuple[str, ...],
        resources: Tuple[str, ...],
        tags: Tuple[str, ...],
        adjacency: sp.csr_matrix,
    ):
        self.users = users
        self.resources = resources
        self.tags = tags
        self.adjacency = adjacency

        self.resource_offset = len(users)
        self.tag_offset = len(users) + len(resources)
        self._user_nodes = {u: i for i, u in enumerate(users)}
        self._resource_nodes = {
            r: i + self.resource_offset for i, r in enumerate(resources)
        }

        degree = np.asarray(adjacency.sum(axis=0), dtype=np.float64).ravel()
        # isolated nodes spread their rank uniformly
        self.dangling = degree == 0
        inverse = np.zeros_like(degree)
        inverse[~self.dangling] = 1.0 / degree[~self.dangling]
        self.transition: sp.csr_matrix = (adjacency @ sp.diags(inverse)).tocsr()

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    def user_node(self, user: str) -> Optional[int]:
        return self._user_nodes.get(user, None)

    def resource_node(self, resource: str) -> Optional[int]:
        return self._resource_nodes.get(resource, None)

    def tag_slice(self) -> slice:
        return slice(self.tag_offset, self.num_nodes)


def build_graph(train: Folksonomy, binary: bool = False) -> FolkGraph:
    """
    Build the graph of `train`. Each post `(u, r, S)` adds `|S|` to the
    user-resource edge, and 1 to each user-tag and resource-tag edge.
    """
    if not train.posts:
        raise DataError("cannot build a graph from an empty folksonomy")

    resource_offset = len(train.users)
    tag_offset = resource_offset + len(train.resources)
    num_nodes = tag_offset + len(train.tags)

    rows = []
    cols = []
    weights = []
    for post in train.posts:
        user = train.user_index[post.user]
        resource = resource_offset + train.resource_index[post.resource]
        rows.append(user)
        cols.append(resource)
        weights.append(len(post.tags))
        for tag in post.tags:
            tag = tag_offset + train.tag_index[tag]
            rows += [user, resource]
            cols += [tag, tag]
            weights += [1, 1]

    # each edge is recorded once, duplicates are summed
    upper = sp.coo_matrix(
        (np.array(weights, dtype=np.float64), (rows, cols)),
        shape=(num_nodes, num_nodes),
    ).tocsr()
    adjacency = (upper + upper.T).tocsr()
    if binary:
        adjacency.data[:] = 1.0
    adjacency.sort_indices()

    return FolkGraph(train.users, train.resources, train.tags, adjacency)


def power_iterations(
    graph: FolkGraph, preference: RankVector, d: float
) -> Iterator[RankVector]:
    """Yield the successive iterates of `w <- d * M * w + (1 - d) * p`."""
    n = graph.num_nodes
    rank = preference
    while True:
        dangling_mass = rank[graph.dangling].sum()
        rank = d * (graph.transition @ rank + dangling_mass / n) + (1 - d) * preference
        yield rank


def pagerank(
    graph: FolkGraph,
    preference: RankVector,
    d: float = 0.7,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> RankVector:
    """
    Run the power iteration starting from the preference vector.

    Args:
        graph: the graph whose transition operator is iterated
        preference: non-negative vector summing to 1
        d: the damping factor in (0, 1)
        tol: stop once the L1 distance between iterates is below this
        max_iter: the maximum number of iterations

    Returns:
        the rank of every node
    """
    FolkRankParams(d, tol, max_iter).validate()
    rank = preference
    for iteration, nxt in enumerate(power_iterations(graph, preference, d), start=1):
        delta = np.abs(nxt - rank).sum()
        rank = nxt
        if delta < tol:
            break
        if iteration >= max_iter:
            logger.debug("pagerank: no convergence after %d iterations", max_iter)
            break
    return rank


def preference_vector(num_nodes: int, boosts: Dict[int, float]) -> RankVector:
    """A uniform weight on every node, plus `boosts`, normalized to sum to 1."""
    preference = np.ones(num_nodes, dtype=np.float64)
    for node, boost in boosts.items():
        preference[node] += boost
    return preference / preference.sum()


class FolkRankPredictor(TagPredictor):
    """
    Scores tags by `w_pref - w_base`, where `w_base` is the PageRank under a
    uniform preference and `w_pref` the PageRank with extra preference on
    the queried user (weight `|U|`) and resource (weight `|R|`).
    """

    name = "folkrank"

    def __init__(self, params: FolkRankParams = FolkRankParams()):
        self.params = params.validate()

    def fit(self, train: Folksonomy) -> "FolkRankPredictor":
        super().fit(train)
        self.graph = build_graph(train, binary=self.params.binary)
        self.baseline = self._rank({})
        return self

    def _rank(self, boosts: Dict[int, float]) -> RankVector:
        params = self.params
        preference = preference_vector(self.graph.num_nodes, boosts)
        return pagerank(self.graph, preference, params.d, params.tol, params.max_iter)

    def differential(self, user: str, resource: str) -> RankVector:
        """The differential rank of every node for the query."""
        graph = self._fitted("graph")
        boosts = {}
        user_node = graph.user_node(user)
        if user_node is not None:
            boosts[user_node] = float(len(graph.users))
        resource_node = graph.resource_node(resource)
        if resource_node is not None:
            boosts[resource_node] = float(len(graph.resources))
        if not boosts:
            return np.zeros(graph.num_nodes)
        return self._rank(boosts) - self.baseline

    def score(self, user: str, resource: str, t_ref: int) -> Scores:
        graph = self._fitted("graph")
        scores = self.differential(user, resource)[graph.tag_slice()]
        return {tag: float(s) for tag, s in zip(graph.tags, scores)}
