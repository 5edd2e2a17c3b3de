"""Networked integrator agents: topology generation, controller synthesis, simulation.

Agent ``i`` is the integrator ``M_i / s`` driven through the static
controller ``K`` of its cluster.  Stacking outputs ``y`` (two per agent)
the closed loop reads::

    dy/dt = -B (L kron I_2) y,      B = blockdiag(M_i K_{c(i)})
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .alignment import FeasibilityOracle, MatrixSet, certify
from .cluster_anneal import AnnealConfig, ConvergenceLog, hbnb_min_clustering
from .cluster_exact import Partition, bnr_min_clustering, check_partition
from .errors import DivergedError, MissingCertificateError
from .linalg_phase import as_cmatrix, essential_phase
from .simgraph import build_similarity_graph

__all__ = [
    "DIVERGENCE_LIMIT",
    "AgentNetwork",
    "SimTrace",
    "PipelineResult",
    "random_strongly_connected_laplacian",
    "random_agent_matrices",
    "synthesize_controllers",
    "closed_loop_matrix",
    "rk4_propagator",
    "simulate_closed_loop",
    "sync_error_series",
    "run_instance",
]

DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class AgentNetwork:
    M: tuple[np.ndarray, ...]
    L: np.ndarray
    assignment: tuple[int, ...]
    controllers: tuple[np.ndarray, ...]

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        n = len(self.M)
        if L.shape != (n, n):
            raise ValueError(f"Laplacian must be {n}x{n}")
        if n and np.abs(L.sum(axis=1)).max() > 1e-10:
            raise ValueError("Laplacian rows must sum to zero")
        if np.any(L - np.diag(np.diag(L)) > 0):
            raise ValueError("off-diagonal Laplacian entries must be nonpositive")
        if len(self.assignment) != n:
            raise ValueError("every agent needs a cluster assignment")
        if any(not 0 <= c < len(self.controllers) for c in self.assignment):
            raise ValueError("assignment refers to a missing controller")
        object.__setattr__(self, "L", L)

    @property
    def n(self) -> int:
        return len(self.M)


@dataclass(frozen=True)
class SimTrace:
    times: np.ndarray  # (T,)
    states: np.ndarray  # (T, n, 2) complex outputs
    sync_error: np.ndarray  # (T,)


def random_strongly_connected_laplacian(n: int, density: float, rng: np.random.Generator
                                        ) -> np.ndarray:
    """Directed ring plus random extra edges, weights uniform in (0, 1]."""
    if n < 2:
        raise ValueError("need at least two nodes")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    W = np.zeros((n, n))
    idx = np.arange(n)
    W[idx, (idx + 1) % n] = 1.0 - rng.random(n)
    extra = (rng.random((n, n)) < density) & (W == 0)
    np.fill_diagonal(extra, False)
    W[extra] = 1.0 - rng.random(int(extra.sum()))
    return np.diag(W.sum(axis=1)) - W


def random_agent_matrices(n: int, rng: np.random.Generator, *, band: float = 0.6,
                          spread: float = 0.3) -> MatrixSet:
    """Random complex 2x2 gains ``s e^{i psi} (I + spread G)`` with ``psi`` uniform in ``[-band, band]``."""
    out = []
    for _ in range(n):
        G = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / math.sqrt(2)
        psi = rng.uniform(-band, band)
        out.append(rng.uniform(0.5, 2.0) * np.exp(1j * psi) * (np.eye(2) + spread * G))
    return MatrixSet(out)


def synthesize_controllers(partition: Partition, matrices: MatrixSet) -> list[np.ndarray]:
    """One static controller ``K`` per cluster, taken from its re-verified certificate."""
    controllers = []
    for c in partition.clusters:
        if c.certificate is None:
            raise MissingCertificateError(f"cluster {c.members} has no certificate")
        if certify(matrices.subset(c.members), partition.alpha, c.certificate.K) is None:
            raise MissingCertificateError(f"certificate of cluster {c.members} does not verify")
        controllers.append(np.array(c.certificate.K))
    return controllers


def closed_loop_matrix(net: AgentNetwork) -> np.ndarray:
    n = net.n
    B = np.zeros((2 * n, 2 * n), dtype=complex)
    for i, (M, c) in enumerate(zip(net.M, net.assignment)):
        B[2 * i:2 * i + 2, 2 * i:2 * i + 2] = as_cmatrix(M) @ net.controllers[c]
    return -B @ np.kron(net.L, np.eye(2))


def rk4_propagator(A: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step for ``dy/dt = A y`` written as a matrix."""
    hA = dt * A
    I = np.eye(A.shape[0], dtype=A.dtype)
    return I + hA @ (I + hA / 2 @ (I + hA / 3 @ (I + hA / 4)))


def _max_pairwise(Y: np.ndarray) -> np.ndarray:
    """Max over agent pairs of ``||y_i - y_j||``; ``Y`` has shape (T, n, 2)."""
    out = np.zeros(Y.shape[0])
    for i in range(Y.shape[1] - 1):
        d = np.sqrt((np.abs(Y[:, i + 1:, :] - Y[:, i:i + 1, :]) ** 2).sum(axis=-1))
        out = np.maximum(out, d.max(axis=1))
    return out


def simulate_closed_loop(net: AgentNetwork, x0, dt: float = 1e-3, horizon: float = 50.0,
                         *, record_every: int = 1) -> SimTrace:
    """Fixed-step RK4 integration of the closed loop.

    Raises
    ------
    DivergedError
        Some output magnitude exceeded ``1e12``.
    """
    if dt <= 0 or horizon < dt:
        raise ValueError("need dt > 0 and horizon >= dt")
    y = np.asarray(x0, dtype=complex).reshape(-1)
    if y.size != 2 * net.n:
        raise ValueError(f"x0 must have {2 * net.n} entries")
    steps = int(round(horizon / dt))
    Phi = rk4_propagator(closed_loop_matrix(net), dt)
    keep = list(range(0, steps + 1, record_every))
    if keep[-1] != steps:
        keep.append(steps)
    states = np.empty((len(keep), net.n, 2), dtype=complex)
    slot = 0
    for k in range(steps + 1):
        if k == keep[slot]:
            states[slot] = y.reshape(net.n, 2)
            slot += 1
        if k == steps:
            break
        y = Phi @ y
        if k % 1000 == 0 and not np.all(np.abs(y) < DIVERGENCE_LIMIT):
            raise DivergedError(f"outputs exceeded {DIVERGENCE_LIMIT:g} at t={(k + 1) * dt:g}s")
    if not np.all(np.abs(states) < DIVERGENCE_LIMIT):
        raise DivergedError(f"outputs exceeded {DIVERGENCE_LIMIT:g}")
    times = np.asarray(keep, dtype=float) * dt
    return SimTrace(times, states, _max_pairwise(states))


def sync_error_series(trace: SimTrace) -> np.ndarray:
    return _max_pairwise(trace.states)


@dataclass
class PipelineResult:
    matrices: MatrixSet
    L: np.ndarray
    phi_ess: float
    alpha: float
    partition: Partition
    network: AgentNetwork
    trace: SimTrace | None
    log: ConvergenceLog | None
    seed: int
    timings: dict = field(default_factory=dict)

    @property
    def residual_ratio(self) -> float:
        e = self.trace.sync_error
        return float(e[-1] / e[0]) if e[0] > 0 else 0.0


def run_instance(n_agents: int, seed: int, *, margin: float = 0.95, density: float = 0.3,
                 method: str = "hbnb", config: AnnealConfig | None = None,
                 dt: float = 1e-3, horizon: float = 50.0, simulate: bool = True,
                 record_every: int = 1, jobs: int = 1) -> PipelineResult:
    """Generate agents and topology, cluster at ``margin * phi_ess``, synthesize, simulate."""
    if not 0 < margin <= 1:
        raise ValueError("margin must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    timings = {}
    t0 = time.perf_counter()
    L = random_strongly_connected_laplacian(n_agents, density, rng)
    M = random_agent_matrices(n_agents, rng)
    x0 = rng.normal(size=(n_agents, 2))
    phi = essential_phase(L)
    alpha = margin * phi
    oracle = FeasibilityOracle(M)
    G = build_similarity_graph(M, alpha, oracle, jobs=jobs)
    timings["graph"] = time.perf_counter() - t0
    log = None
    if method == "hbnb":
        cfg = config if config is not None else AnnealConfig(T0=50.0, seed=seed)
        partition, log = hbnb_min_clustering(G, oracle, cfg)
    elif method == "bnr":
        partition = bnr_min_clustering(G, oracle)
    else:
        raise ValueError(f"unknown clustering method {method!r}")
    problems = check_partition(partition, n_agents, M)
    if problems:
        raise MissingCertificateError("; ".join(problems))
    timings["cluster"] = time.perf_counter() - t0 - timings["graph"]
    controllers = synthesize_controllers(partition, M)
    assignment = partition.assignment()
    net = AgentNetwork(tuple(M), L, tuple(assignment[i] for i in range(n_agents)),
                       tuple(controllers))
    trace = simulate_closed_loop(net, x0, dt, horizon, record_every=record_every) if simulate else None
    timings["total"] = time.perf_counter() - t0
    return PipelineResult(M, L, phi, alpha, partition, net, trace, log, seed, timings)
