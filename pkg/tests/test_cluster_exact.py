import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import stirling2

from oracles import min_partition_count, scalar_alignable
from phasecluster.alignment import FeasibilityOracle, MatrixSet, ScalarPhaseOracle
from phasecluster.cluster_exact import (
    Partition,
    bnr_min_clustering,
    brute_force_min_partition,
    check_partition,
    set_partitions,
    singleton_partition,
    swap_partition,
)
from phasecluster.errors import BudgetExceeded, InvalidSwapError, TooLargeError
from phasecluster.simgraph import (
    Cluster,
    SimilarityGraph,
    build_similarity_graph,
    connected_components,
)


def scalars(thetas):
    return MatrixSet([[[np.exp(1j * t)]] for t in thetas])


def scalar_setup(thetas, alpha):
    ms = scalars(thetas)
    oracle = ScalarPhaseOracle(ms)
    return ms, oracle, build_similarity_graph(ms, alpha, oracle)


def test_all_alignable_gives_one_cluster():
    _, oracle, G = scalar_setup([0.0, 0.1, 0.2, -0.1], 0.5)
    part = bnr_min_clustering(G, oracle)
    assert len(part) == 1 and part.source == "BnR"


def test_edgeless_gives_singletons():
    _, oracle, G = scalar_setup([0.0, 2.0, -2.0], 0.3)
    assert bnr_min_clustering(G, oracle).member_lists() == [[0], [1], [2]]


def test_two_tight_pairs():
    ms, oracle, G = scalar_setup([0.0, 0.1, 0.5, 0.6], 0.06)
    part = bnr_min_clustering(G, oracle)
    assert part.member_lists() == [[0, 1], [2, 3]]
    assert check_partition(part, 4, ms) == []


def test_brute_force_small_cases():
    ms = scalars([0.3])
    assert len(brute_force_min_partition(ScalarPhaseOracle(ms), 0.1)) == 1
    ms = scalars([0.0, 2.5])
    assert len(brute_force_min_partition(ScalarPhaseOracle(ms), 0.1)) == 2


def test_brute_force_refuses_large_sets():
    ms = scalars(np.linspace(0, 1, 13))
    with pytest.raises(TooLargeError):
        brute_force_min_partition(ScalarPhaseOracle(ms), 0.1)


def test_node_budget():
    _, oracle, G = scalar_setup(np.linspace(0, 1.5, 8), 0.15)
    with pytest.raises(BudgetExceeded):
        bnr_min_clustering(G, oracle, node_budget=1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-np.pi, np.pi), min_size=1, max_size=8), st.floats(0.02, 1.0))
def test_bnr_is_optimal_against_independent_enumeration(thetas, alpha):
    ms, oracle, G = scalar_setup(thetas, alpha)
    part = bnr_min_clustering(G, oracle)
    expected = min_partition_count(len(thetas),
                                   lambda b: scalar_alignable([thetas[i] for i in b], alpha))
    assert len(part) == expected
    assert len(brute_force_min_partition(oracle, alpha)) == expected
    assert check_partition(part, len(thetas), ms) == []


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-np.pi, np.pi), min_size=2, max_size=8), st.floats(0.02, 1.0))
def test_pruning_never_changes_the_optimum(thetas, alpha):
    _, oracle, G = scalar_setup(thetas, alpha)
    assert len(bnr_min_clustering(G, oracle)) == len(bnr_min_clustering(G, oracle, prune=False))


def test_component_additivity_and_determinism():
    thetas = [0.0, 0.1, 0.3, 2.0, 2.05, -2.0, -2.2, -2.4]
    ms, oracle, G = scalar_setup(thetas, 0.12)
    whole = bnr_min_clustering(G, oracle)
    total = 0
    for comp in connected_components(G):
        sub = scalars([thetas[i] for i in comp])
        so = ScalarPhaseOracle(sub)
        total += len(bnr_min_clustering(build_similarity_graph(sub, 0.12, so), so))
    assert len(whole) == total
    again = bnr_min_clustering(G, ScalarPhaseOracle(ms))
    assert again.member_lists() == whole.member_lists()


def test_bnr_with_sdp_oracle_matches_brute_force():
    rng = np.random.default_rng(3)
    mats = [np.exp(1j * rng.uniform(-0.8, 0.8)) * (np.eye(2) + 0.25 * rng.normal(size=(2, 2)))
            for _ in range(5)]
    oracle = FeasibilityOracle(mats)
    G = build_similarity_graph(mats, 0.35, oracle)
    part = bnr_min_clustering(G, oracle)
    assert len(part) == len(brute_force_min_partition(oracle, 0.35))
    assert check_partition(part, 5, MatrixSet(mats)) == []


@pytest.mark.parametrize("n", range(0, 8))
def test_set_partitions_counts_are_stirling_numbers(n):
    for p in range(0, n + 1):
        parts = list(set_partitions(n, p))
        assert len(parts) == round(stirling2(n, p, exact=True))
        for part in parts:
            assert sorted(v for b in part for v in b) == list(range(n))
            assert len(part) == p


def test_singletons():
    G = SimilarityGraph(np.zeros((5, 5)), 0.2)
    part = singleton_partition(G)
    assert len(part) == 5 and check_partition(part, 5) == []
    assert len(singleton_partition(SimilarityGraph(np.zeros((0, 0)), 0.2))) == 0


def test_check_partition_reports_problems():
    part = Partition((Cluster((0, 1)), Cluster((1, 2))), 0.2, "BnR")
    problems = check_partition(part, 4)
    assert any("more than one" in p for p in problems)
    assert any("expected" in p for p in problems)
    ms = scalars([0.0, 0.1, 0.2, 0.3])
    uncert = Partition((Cluster((0, 1, 2, 3)),), 0.2, "BnR")
    assert any("no certificate" in p for p in check_partition(uncert, 4, ms))


def test_partition_rejects_unknown_source():
    with pytest.raises(ValueError):
        Partition((), 0.1, "magic")


# -- swapping --------------------------------------------------------------

def certified(ms, oracle, members, alpha):
    return Cluster(members, oracle.feasible(members, alpha))


def test_swap_identity_and_merge():
    ms = scalars([0.0, 0.05, 1.0])
    oracle = ScalarPhaseOracle(ms)
    C = Partition(tuple(certified(ms, oracle, (v,), 0.1) for v in range(3)), 0.1, "BnR")
    same = swap_partition(C, C.clusters[:2], C.clusters[:2], ms)
    assert same.member_lists() == C.member_lists()
    merged = swap_partition(C, C.clusters[:2], [certified(ms, oracle, (0, 1), 0.1)], ms)
    assert merged.member_lists() == [[0, 1], [2]]


def test_swap_absorbs_extra_members():
    ms = scalars([0.0, 0.05, 0.08, 1.0])
    oracle = ScalarPhaseOracle(ms)
    C = Partition((certified(ms, oracle, (0,), 0.1), certified(ms, oracle, (1, 2), 0.1),
                   certified(ms, oracle, (3,), 0.1)), 0.1, "BnR")
    out = swap_partition(C, [C.clusters[0]], [certified(ms, oracle, (0, 1), 0.1)], ms)
    assert out.member_lists() == [[0, 1], [2], [3]]
    assert check_partition(out, 4, ms) == []


def test_swap_rejects_invalid_inputs():
    ms = scalars([0.0, 0.05, 1.0])
    oracle = ScalarPhaseOracle(ms)
    C = Partition(tuple(certified(ms, oracle, (v,), 0.1) for v in range(3)), 0.1, "BnR")
    with pytest.raises(InvalidSwapError):
        swap_partition(C, C.clusters[:1], [Cluster((0,)), Cluster((1,))])
    with pytest.raises(InvalidSwapError):
        swap_partition(C, C.clusters[:2], [Cluster((0,))])
    with pytest.raises(InvalidSwapError):
        swap_partition(C, [Cluster((0, 1))], [Cluster((0, 1))])
    with pytest.raises(InvalidSwapError):
        swap_partition(C, C.clusters[:2], [Cluster((0, 2))], ms)
