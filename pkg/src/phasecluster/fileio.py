"""Reading and writing the on-disk formats.

Structured data (matrix sets, partitions, controllers, network instances)
is JSON; logs, traces and matrices of reals are CSV.  Every file written
here carries a prologue with the tool version, alpha and seed: a
``"header"`` object in JSON, ``#`` comment lines in CSV.  Readers ignore
the prologue, so hand-written inputs may omit it.  Complex matrices are
stored as ``{"re": [[...]], "im": [[...]]}`` with ``im`` optional.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .alignment import AlignmentCertificate, MatrixSet, certify
from .cluster_anneal import ConvergenceLog
from .cluster_exact import SOURCES, Partition
from .errors import DimensionMismatchError, ParseError
from .netsim import AgentNetwork, SimTrace
from .simgraph import Cluster, SimilarityGraph

__all__ = [
    "header",
    "read_matrix_set",
    "write_matrix_set",
    "read_partition",
    "write_partition",
    "write_controllers",
    "write_diversity",
    "read_controllers",
    "write_network",
    "read_network",
    "read_similarity_csv",
    "write_similarity_csv",
    "write_convergence_csv",
    "write_trace_csv",
    "write_points_csv",
    "write_phases_csv",
]


def header(alpha: float | None = None, seed: int | None = None, **extra) -> dict:
    h = {"tool": "phasecluster", "version": __version__, "alpha": alpha, "seed": seed}
    h.update(extra)
    return h


def _prologue(h: dict) -> str:
    parts = [f"{h['tool']} {h['version']}", f"alpha={h['alpha']!r}", f"seed={h['seed']!r}"]
    parts += [f"{k}={v!r}" for k, v in h.items() if k not in ("tool", "version", "alpha", "seed")]
    return "# " + " ".join(parts) + "\n"


def _dump(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def _load(path) -> dict:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: top level must be an object")
    return obj


def _cmatrix_to_json(A) -> dict:
    A = np.asarray(A, dtype=complex)
    return {"re": A.real.tolist(), "im": A.imag.tolist()}


def _cmatrix_from_json(obj, where: str) -> np.ndarray:
    if not isinstance(obj, dict) or "re" not in obj:
        raise ParseError(f"{where}: expected an object with 're' (and optionally 'im')")
    parts = []
    for key in ("re", "im"):
        if key not in obj:
            continue
        rows = obj[key]
        if (not isinstance(rows, list) or not rows
                or not all(isinstance(r, list) for r in rows)):
            raise ParseError(f"{where}.{key}: expected a nonempty list of rows")
        width = len(rows[0])
        for i, row in enumerate(rows):
            if len(row) != width:
                raise ParseError(f"{where}.{key}[{i}]: ragged row, expected {width} entries")
            for j, x in enumerate(row):
                if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                    raise ParseError(f"{where}.{key}[{i}][{j}]: expected a finite number, got {x!r}")
        parts.append(np.array(rows, dtype=float))
    re = parts[0]
    im = parts[1] if len(parts) > 1 else np.zeros_like(re)
    if im.shape != re.shape:
        raise ParseError(f"{where}: 're' is {re.shape} but 'im' is {im.shape}")
    return re + 1j * im


def _check_format(obj: dict, expected: str, path) -> None:
    fmt = obj.get("format", expected)
    if fmt != expected:
        raise ParseError(f"{path}: expected format {expected!r}, found {fmt!r}")


# -- matrix sets -----------------------------------------------------------

def read_matrix_set(path) -> MatrixSet:
    """Parse a matrix-set file, keeping file order.

    Raises
    ------
    ParseError
        Malformed JSON or entries; the message names the line or field.
    DimensionMismatchError
        Matrices of different shapes, or shapes disagreeing with ``m``/``n``.
    """
    obj = _load(path)
    _check_format(obj, "matrix-set", path)
    items = obj.get("matrices")
    if not isinstance(items, list) or not items:
        raise ParseError(f"{path}: 'matrices' must be a nonempty list")
    mats = [_cmatrix_from_json(item, f"{path}: matrices[{i}]") for i, item in enumerate(items)]
    shapes = {A.shape for A in mats}
    if len(shapes) > 1:
        raise DimensionMismatchError(f"{path}: matrices have different shapes {sorted(shapes)}")
    m, n = mats[0].shape
    if obj.get("m", m) != m or obj.get("n", n) != n:
        raise DimensionMismatchError(f"{path}: declared {obj.get('m')}x{obj.get('n')}, found {m}x{n}")
    if obj.get("k", len(mats)) != len(mats):
        raise ParseError(f"{path}: declared k={obj['k']} but found {len(mats)} matrices")
    return MatrixSet(mats)


def write_matrix_set(path, matrices, *, alpha=None, seed=None) -> None:
    mset = matrices if isinstance(matrices, MatrixSet) else MatrixSet(matrices)
    m, n = mset.shape
    _dump({"format": "matrix-set", "header": header(alpha, seed), "k": len(mset), "m": m,
           "n": n, "matrices": [_cmatrix_to_json(A) for A in mset]}, path)


# -- partitions and controllers -------------------------------------------

def write_partition(path, partition: Partition, *, seed=None) -> None:
    clusters = [{"members": list(c.members),
                 "K": None if c.certificate is None else _cmatrix_to_json(c.certificate.K)}
                for c in partition.clusters]
    _dump({"format": "partition", "header": header(partition.alpha, seed),
           "alpha": partition.alpha, "source": partition.source, "count": len(partition),
           "clusters": clusters, "stats": partition.stats}, path)


def read_partition(path, matrices: MatrixSet | None = None) -> Partition:
    """Parse a partition file; with ``matrices`` every stored ``K`` is re-verified."""
    obj = _load(path)
    _check_format(obj, "partition", path)
    try:
        alpha = float(obj["alpha"])
        source = obj.get("source", "BnR")
        raw = obj["clusters"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: missing or invalid field {exc}") from exc
    if source not in SOURCES:
        raise ParseError(f"{path}: unknown source {source!r}")
    clusters = []
    for i, item in enumerate(raw):
        where = f"{path}: clusters[{i}]"
        members = item.get("members") if isinstance(item, dict) else None
        if not isinstance(members, list) or not all(isinstance(v, int) for v in members):
            raise ParseError(f"{where}.members: expected a list of integers")
        cert = None
        if item.get("K") is not None:
            K = _cmatrix_from_json(item["K"], f"{where}.K")
            if matrices is not None:
                cert = certify(matrices.subset(members), alpha, K)
                if cert is None:
                    raise ParseError(f"{where}.K: does not certify the cluster at alpha={alpha}")
            else:
                cert = AlignmentCertificate(K, alpha)
        try:
            clusters.append(Cluster(tuple(members), cert))
        except ValueError as exc:
            raise ParseError(f"{where}.members: {exc}") from exc
    return Partition(tuple(clusters), alpha, source, dict(obj.get("stats", {})))


def write_controllers(path, partition: Partition, controllers, *, seed=None) -> None:
    _dump({"format": "controllers", "header": header(partition.alpha, seed),
           "alpha": partition.alpha,
           "clusters": [list(c.members) for c in partition.clusters],
           "controllers": [_cmatrix_to_json(K) for K in controllers]}, path)


def read_controllers(path) -> tuple[list[list[int]], list[np.ndarray]]:
    obj = _load(path)
    _check_format(obj, "controllers", path)
    clusters = obj.get("clusters")
    ks = obj.get("controllers")
    if not isinstance(clusters, list) or not isinstance(ks, list) or len(clusters) != len(ks):
        raise ParseError(f"{path}: 'clusters' and 'controllers' must be lists of equal length")
    return clusters, [_cmatrix_from_json(K, f"{path}: controllers[{i}]") for i, K in enumerate(ks)]


def write_diversity(path, members, result, *, seed=None) -> None:
    """Diversity value plus the certificate found at the top of the final bracket."""
    cert = result.certificate_at
    _dump({"format": "diversity", "header": header(None if cert is None else cert.alpha, seed),
           "members": list(members), "diversity": result.value,
           "K": None if cert is None else _cmatrix_to_json(cert.K)}, path)


# -- network instances -----------------------------------------------------

def write_network(path, net: AgentNetwork, *, alpha=None, phi_ess=None, seed=None) -> None:
    _dump({"format": "network", "header": header(alpha, seed), "alpha": alpha,
           "phi_ess": phi_ess, "M": [_cmatrix_to_json(M) for M in net.M],
           "L": net.L.tolist(), "assignment": list(net.assignment),
           "controllers": [_cmatrix_to_json(K) for K in net.controllers]}, path)


def read_network(path) -> tuple[AgentNetwork, dict]:
    """Parse a network instance; returns the network and its metadata (alpha, phi_ess, header)."""
    obj = _load(path)
    _check_format(obj, "network", path)
    try:
        M = [_cmatrix_from_json(x, f"{path}: M[{i}]") for i, x in enumerate(obj["M"])]
        L = np.array(obj["L"], dtype=float)
        ks = [_cmatrix_from_json(x, f"{path}: controllers[{i}]")
              for i, x in enumerate(obj["controllers"])]
        net = AgentNetwork(tuple(M), L, tuple(int(c) for c in obj["assignment"]), tuple(ks))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: missing or invalid field {exc}") from exc
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    meta = {k: obj.get(k) for k in ("alpha", "phi_ess", "header")}
    return net, meta


# -- CSV -------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path, h: dict, columns: list[str] | None, rows) -> None:
    buf = io.StringIO()
    buf.write(_prologue(h))
    w = csv.writer(buf, lineterminator="\n")
    if columns:
        w.writerow(columns)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue())


def write_similarity_csv(path, G: SimilarityGraph, *, seed=None) -> None:
    """``n`` lines of ``n`` comma-separated weights after the prologue."""
    _write_csv(path, header(G.alpha, seed), None,
               ([_fmt(x) for x in row] for row in G.weights))


def read_similarity_csv(path, alpha: float | None = None) -> SimilarityGraph:
    """Parse a similarity matrix; alpha comes from the argument or the prologue."""
    rows = []
    found_alpha = None
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("alpha="):
                    try:
                        found_alpha = float(tok[6:])
                    except ValueError:
                        pass
            continue
        if not line.strip():
            continue
        try:
            rows.append([float(x) for x in line.split(",")])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(f"{path}:{lineno}: expected {len(rows[0])} values")
    alpha = alpha if alpha is not None else found_alpha
    if alpha is None:
        raise ParseError(f"{path}: alpha not given and not found in the prologue")
    if len(rows) != (len(rows[0]) if rows else 0):
        raise ParseError(f"{path}: similarity matrix must be square")
    try:
        return SimilarityGraph(np.array(rows), alpha)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_convergence_csv(path, log: ConvergenceLog, *, alpha=None, seed=None) -> None:
    _write_csv(path, header(alpha, seed), ["iteration", "best_count", "T", "t", "event"],
               ([r.iteration, r.best_count, _fmt(r.T), _fmt(r.t), r.event] for r in log.records))


def write_trace_csv(path, trace: SimTrace, *, alpha=None, seed=None, every: int = 1) -> None:
    """Time, then each output split into real and imaginary columns, agent-major, then sync_error."""
    n = trace.states.shape[1]
    cols = ["time"]
    for i in range(n):
        for j in (1, 2):
            cols += [f"y{i}_{j}_re", f"y{i}_{j}_im"]
    cols.append("sync_error")

    def rows():
        for k in range(0, len(trace.times), every):
            y = trace.states[k].reshape(-1)
            vals = np.empty(2 * y.size)
            vals[0::2], vals[1::2] = y.real, y.imag
            yield [_fmt(trace.times[k]), *map(_fmt, vals), _fmt(trace.sync_error[k])]

    _write_csv(path, header(alpha, seed), cols, rows())


def write_points_csv(path, points, *, alpha=None, seed=None) -> None:
    """Complex points as ``re,im`` lines (numerical range boundaries)."""
    _write_csv(path, header(alpha, seed), ["re", "im"],
               ([_fmt(z.real), _fmt(z.imag)] for z in np.asarray(points, dtype=complex)))


def write_phases_csv(path, rows, *, alpha=None, seed=None) -> None:
    """``rows``: (index, class, center, rank, phases) tuples; one line per phase."""
    out = []
    for idx, cls, center, rank, ph in rows:
        if not ph:
            out.append([idx, cls, "" if center is None else _fmt(center), rank, "", ""])
        for j, p in enumerate(ph):
            out.append([idx, cls, _fmt(center), rank, j, _fmt(p)])
    _write_csv(path, header(alpha, seed), ["matrix", "class", "center", "rank", "j", "phase"], out)
