import numpy as np
import pytest
from scipy.linalg import expm

from oracles import circulant_phase_oracle
from phasecluster.alignment import MatrixSet, ScalarPhaseOracle, align_feasibility
from phasecluster.cluster_exact import Partition, singleton_partition
from phasecluster.errors import DivergedError, MissingCertificateError
from phasecluster.linalg_phase import essential_phase, left_null_vector
from phasecluster.netsim import (
    AgentNetwork,
    closed_loop_matrix,
    random_agent_matrices,
    random_strongly_connected_laplacian,
    rk4_propagator,
    run_instance,
    simulate_closed_loop,
    sync_error_series,
    synthesize_controllers,
)
from phasecluster.simgraph import Cluster, SimilarityGraph


def consensus_network(L, M=None, K=None):
    n = L.shape[0]
    M = [np.eye(2)] * n if M is None else M
    K = np.eye(2) if K is None else K
    return AgentNetwork(tuple(M), L, (0,) * n, (K,))


# -- topology --------------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_random_laplacian_is_strongly_connected(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    L = random_strongly_connected_laplacian(n, 0.3, rng)
    assert np.allclose(L.sum(axis=1), 0, atol=1e-12)
    off = L - np.diag(np.diag(L))
    assert np.all(off <= 0)
    ev = np.linalg.eigvals(L)
    assert np.sum(np.abs(ev) < 1e-9) == 1
    assert np.all(left_null_vector(L) > 0)
    assert 0 <= essential_phase(L) < np.pi / 2


def test_two_node_laplacian_shape():
    L = random_strongly_connected_laplacian(2, 0.5, np.random.default_rng(0))
    assert L[0, 1] < 0 and L[1, 0] < 0
    assert L[0, 0] == -L[0, 1] and L[1, 1] == -L[1, 0]


def test_unit_ring_essential_phase():
    L = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]])
    assert abs(essential_phase(L) - circulant_phase_oracle(L)) < 1e-6


def test_laplacian_argument_checks():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        random_strongly_connected_laplacian(1, 0.5, rng)
    with pytest.raises(ValueError):
        random_strongly_connected_laplacian(4, 0.0, rng)


def test_random_agent_matrices_are_square_and_finite():
    ms = random_agent_matrices(6, np.random.default_rng(1))
    assert isinstance(ms, MatrixSet) and len(ms) == 6 and ms.shape == (2, 2)


# -- controllers -----------------------------------------------------------

def test_singletons_get_verified_controllers():
    ms = random_agent_matrices(4, np.random.default_rng(2))
    clusters = tuple(Cluster((i,), align_feasibility(ms.subset([i]), 0.0)) for i in range(4))
    part = Partition(clusters, 0.0, "Singletons")
    ks = synthesize_controllers(part, ms)
    assert len(ks) == 4
    for i, K in enumerate(ks):
        # one nonsingular member: K is a scaled inverse, so M K is a positive multiple of I
        MK = ms[i] @ K
        assert np.allclose(MK, MK[0, 0].real * np.eye(2), atol=1e-8) and MK[0, 0].real > 0


def test_missing_certificate_raises():
    ms = MatrixSet([[[1.0]], [[1.0]]])
    part = singleton_partition(SimilarityGraph(np.zeros((2, 2)), 0.1))
    with pytest.raises(MissingCertificateError):
        synthesize_controllers(part, ms)


def test_stale_certificate_raises():
    ms = MatrixSet([[[np.exp(0.5j)]]])
    cert = ScalarPhaseOracle(MatrixSet([[[1.0]]])).feasible((0,), 0.1)
    part = Partition((Cluster((0,), cert),), 0.1, "BnR")
    with pytest.raises(MissingCertificateError):
        synthesize_controllers(part, ms)


# -- simulation ------------------------------------------------------------

def test_network_validation():
    L = np.array([[1.0, -1.0], [-1.0, 1.0]])
    with pytest.raises(ValueError):
        AgentNetwork((np.eye(2),) * 2, np.array([[1.0, 0.0], [0.0, 1.0]]), (0, 0), (np.eye(2),))
    with pytest.raises(ValueError):
        AgentNetwork((np.eye(2),) * 2, L, (0, 1), (np.eye(2),))
    with pytest.raises(ValueError):
        AgentNetwork((np.eye(2),) * 2, -L, (0, 0), (np.eye(2),))


def test_single_agent_is_constant():
    net = consensus_network(np.zeros((1, 1)))
    trace = simulate_closed_loop(net, [1.0, 2.0], 0.01, 1.0)
    assert np.allclose(trace.states, trace.states[0])
    assert np.all(trace.sync_error == 0)


def test_identical_initial_outputs_stay_synchronized():
    L = np.array([[1.0, -1.0], [-1.0, 1.0]])
    trace = simulate_closed_loop(consensus_network(L), [1.0, 2.0, 1.0, 2.0], 0.01, 2.0)
    assert np.all(sync_error_series(trace) < 1e-12)


def test_symmetric_consensus_reaches_average():
    L = np.array([[1.0, -1.0], [-1.0, 1.0]])
    x0 = np.array([1.0, 0.0, -1.0, 4.0])
    trace = simulate_closed_loop(consensus_network(L), x0, 1e-3, 10.0, record_every=100)
    avg = x0.reshape(2, 2).mean(axis=0)
    assert np.allclose(trace.states[-1], avg, atol=1e-6)
    e = trace.sync_error
    assert e[-1] <= 1e-3 * e[0]
    assert np.all(np.diff(e) <= 1e-12)


def test_directed_consensus_reaches_left_vector_average():
    rng = np.random.default_rng(5)
    L = random_strongly_connected_laplacian(5, 0.3, rng)
    x0 = rng.normal(size=(5, 2))
    trace = simulate_closed_loop(consensus_network(L), x0, 1e-3, 40.0, record_every=1000)
    v = left_null_vector(L)
    assert np.allclose(trace.states[-1], v @ x0, atol=1e-6)


def test_rk4_propagator_order():
    # halving dt shrinks the final error by about 2^4 against the exact exponential
    rng = np.random.default_rng(6)
    L = random_strongly_connected_laplacian(4, 0.4, rng)
    A = closed_loop_matrix(consensus_network(L))
    y0 = rng.normal(size=8).astype(complex)
    T = 2.0
    exact = expm(A * T) @ y0
    errors = []
    for dt in (0.1, 0.05):
        Phi = rk4_propagator(A, dt)
        y = y0.copy()
        for _ in range(int(round(T / dt))):
            y = Phi @ y
        errors.append(np.linalg.norm(y - exact))
    assert 12 <= errors[0] / errors[1] <= 20


def test_divergence_is_detected():
    L = np.array([[1.0, -1.0], [-1.0, 1.0]])
    net = consensus_network(L, K=-np.eye(2))
    with pytest.raises(DivergedError):
        simulate_closed_loop(net, [1.0, 0.0, 0.0, 1.0], 0.01, 100.0)


def test_simulation_argument_checks():
    net = consensus_network(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    with pytest.raises(ValueError):
        simulate_closed_loop(net, [1.0, 2.0], 0.01, 1.0)
    with pytest.raises(ValueError):
        simulate_closed_loop(net, [0.0] * 4, 0.0, 1.0)


def test_recording_subsamples_and_keeps_the_end():
    net = consensus_network(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    trace = simulate_closed_loop(net, [1.0, 0.0, 0.0, 1.0], 0.01, 1.05, record_every=10)
    assert trace.times[0] == 0 and trace.times[-1] == pytest.approx(1.05)
    assert np.all(np.diff(trace.times) > 0)


# -- pipeline --------------------------------------------------------------

def test_pipeline_small_instance():
    res = run_instance(6, 3, record_every=1000)
    assert res.alpha == pytest.approx(0.95 * res.phi_ess)
    assert len(res.partition) < 6
    assert len(res.network.controllers) == len(res.partition)
    assert res.residual_ratio <= 1e-3
    again = run_instance(6, 3, record_every=1000)
    assert again.partition.member_lists() == res.partition.member_lists()
    assert np.array_equal(again.trace.states, res.trace.states)


def test_pipeline_with_exact_clustering():
    res = run_instance(5, 1, method="bnr", simulate=False)
    assert res.trace is None and res.partition.source == "BnR"
    with pytest.raises(ValueError):
        run_instance(5, 1, method="magic")
