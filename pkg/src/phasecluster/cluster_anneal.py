"""Annealed branch-and-bound clustering (HBnB).

A single partial path of clusters is grown root by root.  Branches are
sampled from a softmax over a potential at the branch temperature ``t``;
finished or hopeless paths trigger a backtrack whose depth grows with the
global temperature ``T``.  ``T`` cools by ``beta`` at every backtrack, ``t``
cools by ``gamma`` at every branching step and is reset to ``T`` after each
backtrack.  The run ends once ``T`` drops below ``e`` or the search tree
is exhausted.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .alignment import FeasibilityOracle
from .cluster_exact import Partition, finalize_clusters, singleton_partition
from .errors import BudgetExceeded, EmptyPathError
from .simgraph import (
    Cluster,
    SimilarityGraph,
    connected_components,
    enumerate_maximal_clusters,
    mis_lower_bound,
)

__all__ = [
    "AnnealConfig",
    "SearchPath",
    "LogRecord",
    "ConvergenceLog",
    "EVENTS",
    "potential",
    "choose_branch",
    "backtrack",
    "hbnb_min_clustering",
    "multistart_hbnb",
    "singleton_partition",
]

EVENTS = ("improve", "prune", "complete", "backtrack")
# stand-in for 1/0 in the potential: an empty remainder finishes the component
LARGE_INVERSE = 1e6


@dataclass(frozen=True)
class AnnealConfig:
    T0: float = 100.0
    beta: float = 0.9
    gamma: float = 0.9
    e: float = 1e-5
    seed: int = 0
    node_budget: int | None = None
    invert_diversity: bool = False
    backtrack_scale: float | None = None

    def __post_init__(self):
        if not self.T0 > 0 or not self.e > 0 or not self.e < self.T0:
            raise ValueError("need 0 < e < T0")
        for name in ("beta", "gamma"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.node_budget is not None and self.node_budget <= 0:
            raise ValueError("node_budget must be positive")

    @property
    def scale(self) -> float:
        return self.T0 if self.backtrack_scale is None else self.backtrack_scale

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "AnnealConfig":
        """Read ``key=value`` lines (``#`` comments allowed)."""
        casts = {"T0": float, "beta": float, "gamma": float, "e": float, "seed": int,
                 "node_budget": int, "backtrack_scale": float,
                 "invert_diversity": lambda s: s.strip().lower() in ("1", "true", "yes")}
        values = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in casts:
                raise ValueError(f"{path}:{lineno}: expected one of {sorted(casts)} as key=value")
            values[key] = casts[key](val.strip())
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass
class SearchPath:
    steps: list[tuple[int, Cluster]]
    uncovered: set[int]
    visited_signatures: set[tuple] = field(default_factory=set)

    def signature(self, extra: Cluster | None = None) -> tuple[tuple[int, ...], ...]:
        sig = tuple(c.members for _, c in self.steps)
        return sig + (extra.members,) if extra is not None else sig

    def extend(self, root: int, cluster: Cluster) -> None:
        self.steps.append((root, cluster))
        self.uncovered.difference_update(cluster.members)

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class LogRecord:
    iteration: int
    best_count: int
    T: float
    t: float
    event: str
    path_len: int = 0
    bound: int = 0


@dataclass
class ConvergenceLog:
    records: list[LogRecord] = field(default_factory=list)

    def best_counts(self) -> list[int]:
        return [r.best_count for r in self.records]


def potential(G: SimilarityGraph, path: SearchPath, candidates: Sequence[Cluster],
              diversities: Sequence[float], *, invert_diversity: bool = False) -> list[float]:
    """Branch potentials: normalized diversity plus normalized inverse remainder bound.

    Zero diversities contribute nothing (uniform first term if all are zero);
    an empty remainder counts as a very large inverse bound.
    """
    if not candidates:
        raise ValueError("no candidates")
    d = np.asarray(diversities, dtype=float)
    if invert_diversity:
        d = np.where(d > 0, 1 / np.where(d > 0, d, 1), LARGE_INVERSE)
    first = d / d.sum() if d.sum() > 0 else np.full(len(d), 1 / len(d))
    rem = [mis_lower_bound(G, path.uncovered.difference(c.members)) for c in candidates]
    inv = np.array([1 / r if r > 0 else LARGE_INVERSE for r in rem])
    second = inv / inv.sum()
    return (first + second).tolist()


def choose_branch(potentials: Sequence[float], t: float, rng: np.random.Generator) -> int:
    """Sample an index from ``softmax(potentials / t)``."""
    if t <= 0:
        raise ValueError("branch temperature must be positive")
    p = np.asarray(potentials, dtype=float)
    w = np.exp((p - p.max()) / t)
    return int(rng.choice(len(p), p=w / w.sum()))


def backtrack_depth_probabilities(length: int, T: float, scale: float) -> np.ndarray:
    q = 1 / (1 + T / scale)
    d = np.arange(length)
    w = q * (1 - q) ** d
    return w / w.sum()


def backtrack(path: SearchPath, T: float, rng: np.random.Generator, scale: float = 1.0
              ) -> SearchPath:
    """Drop the last ``d`` steps, ``d`` truncated-geometric with a heavier tail at high ``T``.

    The abandoned path is recorded in ``visited_signatures``.
    """
    if not path.steps:
        raise EmptyPathError("cannot backtrack an empty path")
    depth = 1 + int(rng.choice(len(path.steps),
                               p=backtrack_depth_probabilities(len(path.steps), T, scale)))
    path.visited_signatures.add(path.signature())
    kept = path.steps[:len(path.steps) - depth]
    restored = set(path.uncovered)
    for _, c in path.steps[len(kept):]:
        restored.update(c.members)
    return SearchPath(list(kept), restored, path.visited_signatures)


def _anneal_component(G, comp, oracle, config, rng, log, state) -> list[tuple[int, ...]]:
    best = [(v,) for v in comp]
    T = config.T0
    t = T
    path = SearchPath([], set(comp))

    def record(event, bound=0):
        state["iteration"] += 1
        state["best"][state["ci"]] = len(best)
        log.records.append(LogRecord(state["iteration"], sum(state["best"]), T, t, event,
                                     len(path), bound))

    while T >= config.e:
        if not path.uncovered:
            improved = len(path) < len(best)
            if improved:
                best = [c.members for _, c in path.steps]
            record("improve" if improved else "complete")
            T *= config.beta
            t = T
            path = backtrack(path, T, rng, config.scale)
            continue
        bound = mis_lower_bound(G, path.uncovered)
        if len(path) + bound >= len(best):
            record("prune", bound)
            T *= config.beta
            t = T
            if not path.steps:
                break  # the bound certifies the incumbent
            path = backtrack(path, T, rng, config.scale)
            continue
        root = min(path.uncovered, key=lambda u: (G.degree(u, path.uncovered), u))
        cands = enumerate_maximal_clusters(G, root, path.uncovered, oracle)
        fresh = [c for c in cands if path.signature(c) not in path.visited_signatures]
        if not fresh:
            path.visited_signatures.add(path.signature())
            record("backtrack")
            T *= config.beta
            t = T
            if not path.steps:
                break  # every branch has been explored
            path = backtrack(path, T, rng, config.scale)
            continue
        divs = [oracle.diversity(c.members).value for c in fresh]
        p = potential(G, path, fresh, divs, invert_diversity=config.invert_diversity)
        path.extend(root, fresh[choose_branch(p, t, rng)])
        t *= config.gamma
        state["nodes"] += 1
        if config.node_budget is not None and state["nodes"] > config.node_budget:
            raise BudgetExceeded(f"node budget of {config.node_budget} exceeded")
    return best


def hbnb_min_clustering(G: SimilarityGraph, oracle: FeasibilityOracle,
                        config: AnnealConfig = AnnealConfig()) -> tuple[Partition, ConvergenceLog]:
    """Approximate minimum clustering with the dual-temperature annealed search.

    Each connected component starts from singletons and is searched on its
    own schedule; the log reports the total best count across components.
    """
    rng = np.random.default_rng(config.seed)
    comps = connected_components(G)
    log = ConvergenceLog()
    state = {"iteration": 0, "nodes": 0, "ci": 0, "best": [len(c) for c in comps]}
    calls0 = oracle.stats.calls
    member_sets: list[tuple[int, ...]] = []
    for ci, comp in enumerate(comps):
        state["ci"] = ci
        if len(comp) == 1:
            member_sets.append(tuple(comp))
            continue
        member_sets.extend(_anneal_component(G, comp, oracle, config, rng, log, state))
    clusters = finalize_clusters(member_sets, oracle, G.alpha)
    stats = {"seed": config.seed, "iterations": state["iteration"],
             "nodes_expanded": state["nodes"], "oracle_calls": oracle.stats.calls - calls0}
    return Partition(clusters, G.alpha, "HBnB", stats), log


def multistart_hbnb(G: SimilarityGraph, oracle: FeasibilityOracle, config: AnnealConfig,
                    starts: int, *, jobs: int = 1) -> tuple[Partition, ConvergenceLog]:
    """Run ``starts`` seeds (``config.seed``, ``config.seed + 1``, ...) and keep the best.

    Ties go to the lowest seed so the result does not depend on ``jobs``.
    """
    configs = [replace(config, seed=(config.seed + i) % 2**64) for i in range(starts)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda c: hbnb_min_clustering(G, oracle, c), configs))
    else:
        results = [hbnb_min_clustering(G, oracle, c) for c in configs]
    return min(results, key=lambda r: len(r[0]))
