"""Phase-alignment clustering of complex agent matrices."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .alignment import (
    AlignmentCertificate,
    DiversityResult,
    FeasibilityOracle,
    MatrixSet,
    ScalarPhaseOracle,
    align_feasibility,
    certify,
    diversity,
    verify_certificate,
)
from .cluster_anneal import AnnealConfig, ConvergenceLog, hbnb_min_clustering, multistart_hbnb
from .cluster_exact import (
    Partition,
    bnr_min_clustering,
    brute_force_min_partition,
    check_partition,
    swap_partition,
)
from .errors import (
    BudgetExceeded,
    DimensionMismatchError,
    DivergedError,
    ParseError,
    PhaseClusterError,
    SolverFailure,
)
from .linalg_phase import (
    PhaseSpectrum,
    SectorClass,
    classify,
    essential_phase,
    numerical_range_boundary,
    phases,
    sectorial_factorization,
)
from .netsim import AgentNetwork, run_instance, simulate_closed_loop, synthesize_controllers
from .simgraph import Cluster, SimilarityGraph, build_similarity_graph

__all__ = [name for name in dir() if not name.startswith("_")
           and name not in ("version", "PackageNotFoundError")]
