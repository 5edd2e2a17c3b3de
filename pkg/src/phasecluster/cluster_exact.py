"""Exact minimum clustering: branch-and-recurse, brute force and cluster swapping."""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

from .alignment import FeasibilityOracle, certify
from .errors import BudgetExceeded, InvalidSwapError, SolverFailure, TooLargeError
from .simgraph import (
    Cluster,
    SimilarityGraph,
    connected_components,
    enumerate_maximal_clusters,
    mis_lower_bound,
)

__all__ = [
    "SOURCES",
    "Partition",
    "check_partition",
    "singleton_partition",
    "finalize_clusters",
    "bnr_min_clustering",
    "brute_force_min_partition",
    "swap_partition",
    "set_partitions",
]

SOURCES = ("BnR", "HBnB", "BruteForce", "Singletons")
DEFAULT_NODE_BUDGET = 10**7
BRUTE_FORCE_MAX = 12


@dataclass(frozen=True)
class Partition:
    clusters: tuple[Cluster, ...]
    alpha: float
    source: str
    stats: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        ordered = tuple(sorted(self.clusters, key=lambda c: c.members[0]))
        object.__setattr__(self, "clusters", ordered)

    def __len__(self) -> int:
        return len(self.clusters)

    def member_lists(self) -> list[list[int]]:
        return [list(c.members) for c in self.clusters]

    def assignment(self) -> dict[int, int]:
        return {v: k for k, c in enumerate(self.clusters) for v in c.members}


def check_partition(partition: Partition, n: int, matrices=None) -> list[str]:
    """Return a list of violated partition invariants (empty when valid).

    With ``matrices`` given every certificate is re-verified at the
    partition's alpha.
    """
    problems = []
    seen: set[int] = set()
    for c in partition.clusters:
        overlap = seen.intersection(c.members)
        if overlap:
            problems.append(f"vertices {sorted(overlap)} appear in more than one cluster")
        seen.update(c.members)
    if seen != set(range(n)):
        problems.append(f"clusters cover {sorted(seen)}, expected 0..{n - 1}")
    if matrices is not None:
        for c in partition.clusters:
            if c.certificate is None:
                problems.append(f"cluster {c.members} has no certificate")
            elif certify(matrices.subset(c.members), partition.alpha, c.certificate.K) is None:
                problems.append(f"certificate of cluster {c.members} does not verify")
    return problems


def finalize_clusters(member_sets: Sequence[Sequence[int]], oracle: FeasibilityOracle,
                      alpha: float) -> tuple[Cluster, ...]:
    """Attach freshly verified certificates to the given clusters."""
    out = []
    for members in member_sets:
        cert = oracle.verified(members, alpha)
        if cert is None:
            raise SolverFailure(f"cluster {sorted(members)} could not be re-certified at alpha={alpha}")
        out.append(Cluster(tuple(members), cert))
    return tuple(out)


def singleton_partition(G: SimilarityGraph, oracle: FeasibilityOracle | None = None) -> Partition:
    """One cluster per vertex; certificates are attached when an oracle is given."""
    if oracle is None:
        clusters = tuple(Cluster((v,)) for v in range(G.n))
    else:
        clusters = finalize_clusters([(v,) for v in range(G.n)], oracle, G.alpha)
    return Partition(clusters, G.alpha, "Singletons")


@dataclass
class _Counter:
    nodes: int = 0
    budget: int = DEFAULT_NODE_BUDGET

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetExceeded(f"branch node budget of {self.budget} exceeded")


def _bnr_component(G, comp, oracle, counter, prune) -> list[tuple[int, ...]]:
    best: list[tuple[int, ...]] = [(v,) for v in comp]

    def rec(uncovered: frozenset[int], current: list[tuple[int, ...]]) -> None:
        nonlocal best
        counter.tick()
        if not uncovered:
            if len(current) < len(best):
                best = list(current)
            return
        bound = mis_lower_bound(G, uncovered) if prune else 1
        if len(current) + bound >= len(best):
            return
        root = min(uncovered, key=lambda u: (G.degree(u, uncovered), u))
        for cl in enumerate_maximal_clusters(G, root, uncovered, oracle):
            rec(uncovered.difference(cl.members), current + [cl.members])

    rec(frozenset(comp), [])
    return best


def bnr_min_clustering(G: SimilarityGraph, oracle: FeasibilityOracle, *,
                       node_budget: int = DEFAULT_NODE_BUDGET, prune: bool = True) -> Partition:
    """Minimum clustering by branching on maximal clusters of a minimum-degree root.

    Components are solved independently.  ``prune`` applies the
    independent-set bound, which never discards a strictly better completion.

    Raises
    ------
    BudgetExceeded
        More than ``node_budget`` branch nodes were expanded.
    """
    counter = _Counter(budget=node_budget)
    calls0 = oracle.stats.calls
    member_sets: list[tuple[int, ...]] = []
    for comp in connected_components(G):
        member_sets.extend(_bnr_component(G, comp, oracle, counter, prune))
    clusters = finalize_clusters(member_sets, oracle, G.alpha)
    stats = {"nodes_expanded": counter.nodes, "oracle_calls": oracle.stats.calls - calls0}
    return Partition(clusters, G.alpha, "BnR", stats)


def set_partitions(n: int, p: int) -> Iterator[list[list[int]]]:
    """Set partitions of ``range(n)`` into exactly ``p`` blocks, restricted-growth order."""
    blocks: list[list[int]] = []

    def rec(i: int) -> Iterator[list[list[int]]]:
        if n - i < p - len(blocks):
            return
        if i == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1)
            b.pop()
        if len(blocks) < p:
            blocks.append([i])
            yield from rec(i + 1)
            blocks.pop()

    yield from rec(0)


def brute_force_min_partition(oracle: FeasibilityOracle, alpha: float) -> Partition:
    """Exhaustive minimum clustering for at most 12 matrices (test oracle).

    Partitions are scanned by increasing block count; a partial block that is
    already infeasible cuts the scan since no superset can be feasible.
    """
    n = len(oracle)
    if n > BRUTE_FORCE_MAX:
        raise TooLargeError(f"brute force is limited to {BRUTE_FORCE_MAX} matrices, got {n}")
    calls0 = oracle.stats.calls
    for p in range(1, n + 1):
        blocks: list[list[int]] = []

        def rec(i: int) -> list[list[int]] | None:
            if n - i < p - len(blocks):
                return None
            if i == n:
                return [list(b) for b in blocks]
            for b in blocks:
                if oracle.feasible(b + [i], alpha) is None:
                    continue
                b.append(i)
                res = rec(i + 1)
                b.pop()
                if res is not None:
                    return res
            if len(blocks) < p:
                blocks.append([i])
                res = rec(i + 1)
                blocks.pop()
                if res is not None:
                    return res
            return None

        found = rec(0)
        if found is not None:
            clusters = finalize_clusters(found, oracle, alpha)
            return Partition(clusters, alpha, "BruteForce",
                             {"oracle_calls": oracle.stats.calls - calls0})
    return Partition((), alpha, "BruteForce")


def swap_partition(C: Partition, X: Sequence[Cluster], Y: Sequence[Cluster],
                   matrices=None) -> Partition:
    """Replace the clusters ``X`` of ``C`` by ``Y`` without increasing the count.

    ``Y`` must cover ``Q`` with ``U = union(X)`` contained in ``Q`` and
    ``|Y| <= |X|``.  Elements of ``Q \\ U`` are removed from the remaining
    clusters; those shrunken clusters keep their old ``K``, re-verified on
    the smaller set when ``matrices`` is given.
    """
    current = {c.members: c for c in C.clusters}
    x_keys = [tuple(sorted(c.members)) for c in X]
    if any(k not in current for k in x_keys) or len(set(x_keys)) != len(x_keys):
        raise InvalidSwapError("X must be distinct clusters of the partition")
    if len(Y) > len(X):
        raise InvalidSwapError("|Y| must not exceed |X|")
    Q: set[int] = set()
    for c in Y:
        if Q.intersection(c.members):
            raise InvalidSwapError("clusters in Y must be pairwise disjoint")
        Q.update(c.members)
    U = {v for k in x_keys for v in k}
    if not U <= Q:
        raise InvalidSwapError("union of X must be contained in union of Y")
    if matrices is not None:
        for c in Y:
            if c.certificate is None or certify(matrices.subset(c.members), C.alpha,
                                                c.certificate.K) is None:
                raise InvalidSwapError(f"cluster {c.members} in Y is not certified at alpha")
    extra = Q - U
    out = list(Y)
    for key, c in current.items():
        if key in x_keys:
            continue
        kept = tuple(v for v in key if v not in extra)
        if not kept:
            continue
        cert = c.certificate
        if kept != key and matrices is not None and cert is not None:
            cert = certify(matrices.subset(kept), C.alpha, cert.K)
            if cert is None:
                raise InvalidSwapError(f"shrunken cluster {kept} lost its certificate")
        out.append(Cluster(kept, cert if kept == key or matrices is not None else None))
    return Partition(tuple(out), C.alpha, C.source, dict(C.stats))
