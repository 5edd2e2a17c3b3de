"""Command-line front end: phases -> graph -> cluster -> synthesize -> simulate.

Exit codes: 0 success, 1 unreadable input, 2 solver breakdown, 3 node budget
exceeded, 4 simulation diverged, 5 any other library error, 64 bad usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, fileio
from .alignment import FeasibilityOracle, diversity
from .cluster_anneal import AnnealConfig, hbnb_min_clustering, multistart_hbnb
from .cluster_exact import bnr_min_clustering, brute_force_min_partition, check_partition
from .errors import (
    BudgetExceeded,
    DimensionMismatchError,
    DivergedError,
    NotPhaseDefinedError,
    ParseError,
    PhaseClusterError,
    SolverFailure,
)
from .linalg_phase import classify, numerical_range_boundary, phases
from .netsim import run_instance, simulate_closed_loop, synthesize_controllers
from .simgraph import build_similarity_graph

EXIT_PARSE, EXIT_SOLVER, EXIT_BUDGET, EXIT_DIVERGED, EXIT_OTHER, EXIT_USAGE = 1, 2, 3, 4, 5, 64
OUT_DIR_ENV = "PHASECLUSTER_OUT_DIR"


class _Parser(argparse.ArgumentParser):
    # argparse's own code 2 would collide with the solver-failure code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _graph(args, mset, oracle):
    if args.graph:
        G = fileio.read_similarity_csv(args.graph, args.alpha)
        if G.n != len(mset):
            raise DimensionMismatchError(f"graph has {G.n} vertices but the set has {len(mset)}")
        return G
    return build_similarity_graph(mset, args.alpha, oracle, jobs=args.jobs)


def _anneal_config(args) -> AnnealConfig:
    flags = {"T0": args.T0, "beta": args.beta, "gamma": args.gamma, "e": args.e,
             "seed": args.seed, "node_budget": args.node_budget}
    if args.config:
        try:
            return AnnealConfig.from_file(args.config, **flags)
        except ValueError as exc:
            raise ParseError(f"{args.config}: {exc}") from exc
    return AnnealConfig(**{k: v for k, v in flags.items() if v is not None})


def cmd_phases(args) -> str:
    mset = fileio.read_matrix_set(args.matrices)
    out = _out_dir(args)
    rows = []
    counts: dict[str, int] = {}
    for i, A in enumerate(mset):
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatchError("phases need square matrices")
        cls = classify(A)
        counts[cls.value] = counts.get(cls.value, 0) + 1
        try:
            spec = phases(A)
            rows.append((i, cls.value, spec.center, spec.rank, spec.phases))
        except NotPhaseDefinedError:
            rows.append((i, cls.value, None, "", ()))
        if args.boundary:
            fileio.write_points_csv(out / f"boundary_{i}.csv",
                                    numerical_range_boundary(A, args.boundary))
    fileio.write_phases_csv(out / "phases.csv", rows)
    return f"{len(mset)} matrices: " + ", ".join(f"{v} {k}" for k, v in sorted(counts.items()))


def cmd_divergence(args) -> str:
    mset = fileio.read_matrix_set(args.matrices)
    members = list(range(len(mset))) if args.members is None else args.members
    res = diversity(mset.subset(members))
    fileio.write_diversity(_out_dir(args) / "diversity.json", members, res, seed=args.seed)
    return f"diversity of {len(members)} matrices: {res.value:.6f} rad"


def cmd_graph(args) -> str:
    mset = fileio.read_matrix_set(args.matrices)
    G = build_similarity_graph(mset, args.alpha, jobs=args.jobs)
    fileio.write_similarity_csv(_out_dir(args) / "similarity.csv", G)
    edges = int(G.adjacency.sum()) // 2
    return f"similarity graph: {G.n} vertices, {edges} alignable pairs at alpha={args.alpha:g}"


def cmd_cluster_exact(args) -> str:
    mset = fileio.read_matrix_set(args.matrices)
    oracle = FeasibilityOracle(mset)
    if args.brute_force:
        part = brute_force_min_partition(oracle, args.alpha)
    else:
        G = _graph(args, mset, oracle)
        part = bnr_min_clustering(G, oracle, node_budget=args.node_budget or 10**7)
    fileio.write_partition(_out_dir(args) / "partition.json", part, seed=args.seed)
    return f"{part.source}: {len(part)} clusters at alpha={args.alpha:g}"


def cmd_cluster_hbnb(args) -> str:
    mset = fileio.read_matrix_set(args.matrices)
    oracle = FeasibilityOracle(mset)
    G = _graph(args, mset, oracle)
    cfg = _anneal_config(args)
    if args.starts > 1:
        part, log = multistart_hbnb(G, oracle, cfg, args.starts, jobs=args.jobs)
    else:
        part, log = hbnb_min_clustering(G, oracle, cfg)
    out = _out_dir(args)
    seed = part.stats.get("seed", cfg.seed)
    fileio.write_partition(out / "partition.json", part, seed=seed)
    fileio.write_convergence_csv(out / "convergence.csv", log, alpha=args.alpha, seed=seed)
    return f"HBnB: {len(part)} clusters at alpha={args.alpha:g} (seed {seed})"


def cmd_synth(args) -> str:
    mset = fileio.read_matrix_set(args.matrices)
    part = fileio.read_partition(args.partition, mset)
    problems = check_partition(part, len(mset), mset)
    if problems:
        raise ParseError(f"{args.partition}: " + "; ".join(problems))
    ks = synthesize_controllers(part, mset)
    fileio.write_controllers(_out_dir(args) / "controllers.json", part, ks, seed=args.seed)
    return f"{len(ks)} controllers for {len(mset)} agents"


def cmd_simulate(args) -> str:
    net, meta = fileio.read_network(args.network)
    seed = args.seed if args.seed is not None else 0
    x0 = np.random.default_rng(seed).normal(size=(net.n, 2))
    trace = simulate_closed_loop(net, x0, args.dt, args.horizon, record_every=args.record_every)
    fileio.write_trace_csv(_out_dir(args) / "trace.csv", trace, alpha=meta.get("alpha"), seed=seed)
    e = trace.sync_error
    ratio = e[-1] / e[0] if e[0] > 0 else 0.0
    return f"simulated {net.n} agents for {args.horizon:g}s: sync residual ratio {ratio:.3e}"


def cmd_pipeline(args) -> str:
    seed = args.seed if args.seed is not None else 0
    cfg = _anneal_config(args)
    res = run_instance(args.agents, seed, margin=args.margin, density=args.density,
                       method=args.method, config=cfg, dt=args.dt, horizon=args.horizon,
                       record_every=args.record_every, jobs=args.jobs)
    out = _out_dir(args)
    fileio.write_matrix_set(out / "agents.mset", res.matrices, alpha=res.alpha, seed=seed)
    fileio.write_partition(out / "partition.json", res.partition, seed=seed)
    fileio.write_controllers(out / "controllers.json", res.partition,
                             res.network.controllers, seed=seed)
    fileio.write_network(out / "network.json", res.network, alpha=res.alpha,
                         phi_ess=res.phi_ess, seed=seed)
    if res.log is not None:
        fileio.write_convergence_csv(out / "convergence.csv", res.log, alpha=res.alpha, seed=seed)
    fileio.write_trace_csv(out / "trace.csv", res.trace, alpha=res.alpha, seed=seed)
    return (f"{len(res.partition)} clusters for {args.agents} agents, phi_ess={res.phi_ess:.4f}, "
            f"alpha={res.alpha:.4f}, sync residual ratio {res.residual_ratio:.3e}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker threads for pair queries and multi-start")
    common.add_argument("--seed", type=int)

    anneal = argparse.ArgumentParser(add_help=False)
    anneal.add_argument("--T0", type=float)
    anneal.add_argument("--beta", type=float)
    anneal.add_argument("--gamma", type=float)
    anneal.add_argument("--e", type=float)
    anneal.add_argument("--node-budget", type=int)
    anneal.add_argument("--config", help="key=value file with annealing settings")

    alpha = argparse.ArgumentParser(add_help=False)
    alpha.add_argument("matrices", help="matrix-set file")
    alpha.add_argument("--alpha", type=float, required=True, help="phase budget in radians")
    alpha.add_argument("--graph", help="reuse a similarity CSV instead of rebuilding it")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--dt", type=float, default=1e-3)
    sim.add_argument("--horizon", type=float, default=50.0)
    sim.add_argument("--record-every", type=int, default=10,
                     help="keep every n-th step in the trace")

    p = _Parser(prog="phasecluster", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("phases", parents=[common], help="classify and compute phases")
    s.add_argument("matrices")
    s.add_argument("--boundary", type=int, default=0,
                   help="also write this many numerical-range boundary points per matrix")
    s.set_defaults(func=cmd_phases)

    s = sub.add_parser("divergence", parents=[common], help="diversity of a matrix set")
    s.add_argument("matrices")
    s.add_argument("--members", type=lambda v: [int(x) for x in v.split(",")],
                   help="comma-separated subset of indices")
    s.set_defaults(func=cmd_divergence)

    s = sub.add_parser("graph", parents=[common], help="pairwise similarity graph")
    s.add_argument("matrices")
    s.add_argument("--alpha", type=float, required=True)
    s.set_defaults(func=cmd_graph)

    s = sub.add_parser("cluster-exact", parents=[common, alpha], help="exact minimum clustering")
    s.add_argument("--node-budget", type=int)
    s.add_argument("--brute-force", action="store_true", help="exhaustive search (k <= 12)")
    s.set_defaults(func=cmd_cluster_exact)

    s = sub.add_parser("cluster-hbnb", parents=[common, alpha, anneal],
                       help="annealed branch-and-bound clustering")
    s.add_argument("--starts", type=int, default=1, help="independent seeds, best kept")
    s.set_defaults(func=cmd_cluster_hbnb)

    s = sub.add_parser("synth", parents=[common], help="controllers from a partition")
    s.add_argument("matrices")
    s.add_argument("partition")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("simulate", parents=[common, sim], help="simulate a network file")
    s.add_argument("network")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("pipeline", parents=[common, anneal, sim],
                       help="random instance, clustering, synthesis and simulation")
    s.add_argument("--agents", type=int, default=10)
    s.add_argument("--margin", type=float, default=0.95, help="alpha = margin * phi_ess")
    s.add_argument("--density", type=float, default=0.3, help="extra-edge probability")
    s.add_argument("--method", choices=("hbnb", "bnr"), default="hbnb")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        summary = args.func(args)
    except (ParseError, DimensionMismatchError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except DivergedError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (PhaseClusterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    print(f"{summary} [{time.perf_counter() - start:.2f}s]")
    return 0


if __name__ == "__main__":
    sys.exit(main())
