"""Pairwise similarity graph, maximal clusters and the independent-set bound."""

from __future__ import annotations

import math
from collections.abc import Collection, Iterable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np
from scipy.sparse.csgraph import connected_components as _cc

from .alignment import AlignmentCertificate, FeasibilityOracle
from .errors import SolverFailure

__all__ = [
    "SimilarityGraph",
    "Cluster",
    "build_similarity_graph",
    "connected_components",
    "enumerate_maximal_clusters",
    "independent_set",
    "mis_lower_bound",
]


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """Weighted undirected graph over matrix indices.

    ``weights[i, j] = pi/2 - div({A_i, A_j})`` when the pair is
    alpha-alignable and 0 otherwise.
    """

    weights: np.ndarray
    alpha: float

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("similarity matrix must be square")
        if not np.allclose(w, w.T, atol=1e-12) or np.any(np.diag(w) != 0) or np.any(w < 0):
            raise ValueError("similarity matrix must be symmetric, nonnegative, zero-diagonal")
        w = (w + w.T) / 2
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @cached_property
    def adjacency(self) -> np.ndarray:
        return self.weights > 0

    @cached_property
    def _neighbors(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(np.flatnonzero(row).tolist()) for row in self.adjacency)

    def neighbors(self, v: int) -> frozenset[int]:
        return self._neighbors[v]

    def degree(self, v: int, within: Collection[int] | None = None) -> int:
        nb = self._neighbors[v]
        return len(nb) if within is None else len(nb.intersection(within))

    def subgraph_weights(self, vertices: Iterable[int]) -> np.ndarray:
        idx = list(vertices)
        return self.weights[np.ix_(idx, idx)]


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    certificate: AlignmentCertificate | None = None

    def __post_init__(self):
        members = tuple(sorted(int(i) for i in self.members))
        if not members or len(set(members)) != len(members):
            raise ValueError("cluster members must be nonempty and distinct")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)


def build_similarity_graph(matrices, alpha: float, oracle: FeasibilityOracle | None = None,
                           *, jobs: int = 1) -> SimilarityGraph:
    """Query every pair at ``alpha`` and weight alignable pairs by ``pi/2 - diversity``."""
    if oracle is None:
        oracle = FeasibilityOracle(matrices)
    n = len(oracle)

    def weight(pair):
        i, j = pair
        try:
            if oracle.feasible(pair, alpha) is None:
                return 0.0
            return math.pi / 2 - oracle.diversity(pair, upper=alpha).value
        except SolverFailure as exc:
            raise SolverFailure(f"pair ({i}, {j}): {exc}") from exc

    pairs = list(combinations(range(n), 2))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(weight, pairs))
    else:
        values = [weight(p) for p in pairs]
    W = np.zeros((n, n))
    for (i, j), w in zip(pairs, values):
        W[i, j] = W[j, i] = max(w, 0.0)
    return SimilarityGraph(W, float(alpha))


def connected_components(G: SimilarityGraph, vertices: Iterable[int] | None = None
                         ) -> list[list[int]]:
    """Components of the positive-weight graph, ordered by smallest member."""
    idx = list(range(G.n)) if vertices is None else sorted(vertices)
    if not idx:
        return []
    _, labels = _cc(G.adjacency[np.ix_(idx, idx)], directed=False)
    groups: dict[int, list[int]] = {}
    for v, lab in zip(idx, labels):
        groups.setdefault(lab, []).append(v)
    return sorted(groups.values(), key=lambda g: g[0])


def enumerate_maximal_clusters(G: SimilarityGraph, root: int, uncovered: Collection[int],
                               oracle: FeasibilityOracle) -> list[Cluster]:
    """All inclusion-maximal alignable subsets of ``uncovered`` that contain ``root``.

    Bron-Kerbosch style recursion over the pairwise graph: a candidate may
    join the current set only if it is adjacent to every member and the
    oracle accepts the enlarged set.  When the current set plus all remaining
    candidates is itself alignable it is the only maximal set left in that
    subtree, which cuts most of the search on well-aligned instances.
    """
    unc = set(uncovered)
    if root not in unc:
        raise ValueError("root must be uncovered")
    alpha = G.alpha
    adj = G.adjacency
    found: dict[tuple[int, ...], AlignmentCertificate] = {}

    def accepts(R: tuple[int, ...], v: int) -> bool:
        if not all(adj[v, u] for u in R):
            return False
        return oracle.feasible(R + (v,), alpha) is not None

    def is_clique(vs: list[int]) -> bool:
        return all(adj[a, b] for a, b in combinations(vs, 2))

    def bk(R: tuple[int, ...], P: list[int], X: list[int]) -> None:
        if not P:
            if not X:
                found[tuple(sorted(R))] = oracle.feasible(R, alpha)
            return
        if len(P) > 1 and is_clique(P):
            full = R + tuple(P)
            cert = oracle.feasible(full, alpha)
            if cert is not None:
                if not any(accepts(full, x) for x in X):
                    found[tuple(sorted(full))] = cert
                return
        P = list(P)
        X = list(X)
        while P:
            v = P.pop(0)
            R2 = R + (v,)
            bk(R2, [w for w in P if accepts(R2, w)], [x for x in X if accepts(R2, x)])
            X.append(v)

    start = [w for w in sorted(unc - {root}) if adj[root, w] and accepts((root,), w)]
    bk((root,), start, [])
    return [Cluster(members, cert) for members, cert in sorted(found.items())]


def independent_set(G: SimilarityGraph, uncovered: Iterable[int] | None = None) -> list[int]:
    """Reducing-peeling independent set of the positive-weight graph.

    Vertices of degree 0 or 1 are taken greedily (their neighbour removed);
    otherwise the highest-degree vertex is peeled off.  Ties go to the
    smallest index.
    """
    nodes = set(range(G.n)) if uncovered is None else set(uncovered)
    nbrs = {v: set(G.neighbors(v)) & nodes for v in nodes}
    chosen = []

    def drop(v):
        for u in nbrs.pop(v):
            nbrs[u].discard(v)

    while nbrs:
        low = min(nbrs, key=lambda v: (len(nbrs[v]), v))
        if len(nbrs[low]) <= 1:
            chosen.append(low)
            for u in list(nbrs[low]):
                drop(u)
            drop(low)
        else:
            drop(max(nbrs, key=lambda v: (len(nbrs[v]), -v)))
    return sorted(chosen)


def mis_lower_bound(G: SimilarityGraph, uncovered: Iterable[int] | None = None) -> int:
    """Lower bound on the number of clusters needed to cover ``uncovered``."""
    return len(independent_set(G, uncovered))
