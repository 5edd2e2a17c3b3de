"""Simultaneous alpha-alignment of matrix sets.

A set ``{A_i}`` (all ``m x n``, ``m <= n``) is alpha-alignable when one
``n x m`` matrix ``K`` puts every phase of ``A_i K`` inside ``[-alpha, alpha]``
while keeping ``rank(A_i K) = rank(A_i)``.

Feasibility is posed as a small semidefinite program over the real and
imaginary parts of ``K``.  With ``P_i`` the projector onto ``range(A_i)``
and ``U_i`` an orthonormal basis of that range, the constraints are::

    Re(U_i^H A_i K U_i) >= I                       (normalization)
    tan(alpha) Re(...) -+ Im(...) >= 0             (sector of half-angle alpha)
    U_i^H A_i K (I - P_i) = 0                      (only when A_i is rank deficient)

where ``Re``/``Im`` are the Hermitian and skew-Hermitian/i parts.  The
sector conditions are homogeneous in ``K``, so fixing the scale with the
normalization loses no feasible set and rules out ``K = 0``.  Each complex
PSD constraint is embedded as the real block ``[[Re M, -Im M], [Im M, Re M]]``
and solved with Clarabel.  The solver's ``K`` is never trusted: every
certificate is re-checked through :func:`verify_certificate`.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import clarabel
import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError, NotPhaseDefinedError, SolverFailure
from .linalg_phase import PhaseSpectrum, numerical_rank, phases

__all__ = [
    "EPS_PHASE",
    "TOL_DIV",
    "MatrixSet",
    "AlignmentCertificate",
    "DiversityResult",
    "align_feasibility",
    "verify_certificate",
    "certify",
    "diversity",
    "FeasibilityOracle",
    "ScalarPhaseOracle",
]

EPS_PHASE = 1e-6
TOL_DIV = 1e-3
HALF_PI = math.pi / 2

_SQRT2 = math.sqrt(2.0)


class MatrixSet(Sequence):
    """Ordered, immutable collection of equally sized complex matrices."""

    def __init__(self, matrices):
        mats = [np.asarray(M, dtype=complex) for M in matrices]
        if len({M.shape for M in mats}) > 1:
            raise DimensionMismatchError("all matrices must share one shape")
        arr = np.array(mats, dtype=complex)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, 0, 0)
        if arr.ndim != 3:
            raise DimensionMismatchError("all matrices must share one shape")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        arr.setflags(write=False)
        self._arr = arr

    @property
    def shape(self) -> tuple[int, int]:
        return self._arr.shape[1:]

    @property
    def array(self) -> np.ndarray:
        return self._arr

    def __len__(self) -> int:
        return self._arr.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return MatrixSet(self._arr[i])
        return self._arr[i]

    def subset(self, indices: Iterable[int]) -> "MatrixSet":
        return MatrixSet(self._arr[list(indices)])

    def __repr__(self) -> str:
        k, (m, n) = len(self), self.shape if len(self) else (0, 0)
        return f"MatrixSet(k={k}, shape={m}x{n})"


def _as_set(matrices) -> MatrixSet:
    return matrices if isinstance(matrices, MatrixSet) else MatrixSet(matrices)


@dataclass(frozen=True, eq=False)
class AlignmentCertificate:
    K: np.ndarray
    alpha: float
    ranks_preserved: bool = True
    products: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @cached_property
    def achieved_phases(self) -> tuple[PhaseSpectrum, ...]:
        """Phase spectra of every product ``A_i K`` (computed on first use)."""
        return tuple(phases(AK) for AK in self.products)

    @property
    def achieved_halfwidth(self) -> float:
        """Largest ``|phase|`` over all products; the cert is valid for any alpha above it."""
        vals = [abs(p) for spec in self.achieved_phases for p in spec.phases]
        return max(vals, default=0.0)


@dataclass(frozen=True)
class DiversityResult:
    value: float
    certificate_at: AlignmentCertificate | None = None


def _inside_sector(AK: np.ndarray, alpha: float) -> bool:
    """Sufficient test: the numerical range of a nonsingular ``AK`` lies in the sector.

    Phases never leave the angular span of the numerical range, so passing
    this test settles the phase check without the center-angle search.
    """
    half = alpha + EPS_PHASE
    if half >= HALF_PI:
        return False
    H = (AK + AK.conj().T) / 2
    S = (AK - AK.conj().T) / 2j
    scale = np.linalg.norm(AK, 2)
    if np.linalg.eigvalsh(H)[0] <= 1e-9 * scale:
        return False
    t = math.tan(half)
    return (np.linalg.eigvalsh(t * H - S)[0] >= -1e-12 * scale
            and np.linalg.eigvalsh(t * H + S)[0] >= -1e-12 * scale)


def certify(matrices, alpha: float, K) -> AlignmentCertificate | None:
    """Build a certificate for ``K`` at ``alpha`` or return ``None`` if it fails."""
    mset = _as_set(matrices)
    K = np.asarray(K, dtype=complex)
    m, n = mset.shape
    if K.shape != (n, m):
        return None
    products = []
    for A in mset:
        AK = A @ K
        rank = numerical_rank(AK)
        if rank != numerical_rank(A):
            return None
        products.append(AK)
        if rank == m and _inside_sector(AK, alpha):
            continue
        try:
            spec = phases(AK)
        except NotPhaseDefinedError:
            return None
        if spec.phases and (spec.max_phase > alpha + EPS_PHASE
                            or spec.min_phase < -alpha - EPS_PHASE):
            return None
    return AlignmentCertificate(K, float(alpha), True, tuple(products))


def verify_certificate(matrices, alpha: float, K) -> bool:
    return certify(matrices, alpha, K) is not None


# -- SDP construction ------------------------------------------------------

def _svec_index(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    rows, cols = np.triu_indices(d)
    # Clarabel stacks the upper triangle column by column
    order = np.lexsort((rows, cols))
    rows, cols = rows[order], cols[order]
    scale = np.where(rows == cols, 1.0, _SQRT2)
    return rows, cols, scale


def _embed(M: np.ndarray) -> np.ndarray:
    """Real symmetric embedding of a (batch of) Hermitian matrices."""
    re, im = M.real, M.imag
    top = np.concatenate([re, -im], axis=-1)
    bot = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def _svec(M: np.ndarray, idx) -> np.ndarray:
    rows, cols, scale = idx
    return M[..., rows, cols] * scale


@dataclass
class _Block:
    """Linear map ``K -> U^H A K U`` split into Hermitian / skew parts per real variable."""

    H: np.ndarray  # (nvar, r, r)
    S: np.ndarray
    eq: np.ndarray | None  # (nvar, neq) real rows of the off-range equality


def _member_block(A: np.ndarray) -> _Block:
    m, n = A.shape
    r = numerical_rank(A)
    U, _, _ = np.linalg.svd(A)
    Ur, Uperp = U[:, :r], U[:, r:]
    B = Ur.conj().T @ A  # r x n
    # K = Kr + i Ki with entry (p, q); d(U^H A K U)/dK[p,q] = outer(B[:, p], U[q, :])
    base = np.einsum("ip,qj->pqij", B, Ur).reshape(n * m, r, r)
    maps = np.concatenate([base, 1j * base])
    Hm = (maps + np.conj(np.swapaxes(maps, -1, -2))) / 2
    Sm = (maps - np.conj(np.swapaxes(maps, -1, -2))) / 2j
    eq = None
    if Uperp.shape[1]:
        off = np.einsum("ip,qj->pqij", B, Uperp).reshape(n * m, r, m - r)
        off = np.concatenate([off, 1j * off]).reshape(2 * n * m, -1)
        eq = np.concatenate([off.real, off.imag], axis=1)
    return _Block(Hm, Sm, eq)


_CLARABEL_FEASIBLE = {"Solved", "AlmostSolved"}
# weight of the ||K||^2 term keeping the margin problem bounded
_REG = 1e-6


def _solve_sdp(mset: MatrixSet, alpha: float, blocks: Sequence[_Block], tol: float = 1e-9
               ) -> tuple[np.ndarray, float, str]:
    """Solve the margin problem; returns ``(K, margin, status)``.

    The sector LMIs are relaxed to ``tan(alpha) Re -+ Im + s I >= 0`` and
    ``s >= 0`` is minimized, plus a small multiple of ``||K||^2`` which picks
    a well-scaled ``K``.  The relaxed problem is always feasible, so no
    infeasibility certificate is needed: ``s = 0`` means the LMIs hold.
    """
    m, n = mset.shape
    nvar = 2 * n * m
    t = math.tan(alpha)
    a_rows, b_rows, cones = [], [], []
    eq = [blk.eq.T for blk in blocks if blk.eq is not None]
    if eq:
        Aeq = np.concatenate(eq, axis=0)
        a_rows.append(np.hstack([Aeq, np.zeros((Aeq.shape[0], 1))]))
        b_rows.append(np.zeros(Aeq.shape[0]))
        cones.append(clarabel.ZeroConeT(Aeq.shape[0]))
    lower = np.zeros((1, nvar + 1))
    lower[0, -1] = -1.0
    a_rows.append(lower)
    b_rows.append(np.zeros(1))
    cones.append(clarabel.NonnegativeConeT(1))
    for blk in blocks:
        r = blk.H.shape[-1]
        idx = _svec_index(2 * r)
        eye = _svec(_embed(np.eye(r, dtype=complex)), idx)
        sv_h = _svec(_embed(blk.H), idx).T  # (svec, nvar)
        sv_s = _svec(_embed(blk.S), idx).T
        a_rows.append(np.hstack([-sv_h, np.zeros((sv_h.shape[0], 1))]))
        b_rows.append(-eye)
        cones.append(clarabel.PSDTriangleConeT(2 * r))
        for sign in (1.0, -1.0):
            a_rows.append(np.hstack([-(t * sv_h + sign * sv_s), -eye[:, None]]))
            b_rows.append(np.zeros(sv_h.shape[0]))
            cones.append(clarabel.PSDTriangleConeT(2 * r))
    A = sp.csc_matrix(np.concatenate(a_rows, axis=0))
    b = np.concatenate(b_rows)
    P = sp.diags(np.r_[np.full(nvar, _REG), 0.0], format="csc")
    q = np.zeros(nvar + 1)
    q[-1] = 1.0
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_feas = tol
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.max_iter = 200
    sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    status = str(sol.status)
    x = np.asarray(sol.x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise SolverFailure(f"conic solver returned non-finite iterate (status {status})")
    X = x[:-1].reshape(2, n, m)
    return X[0] + 1j * X[1], float(x[-1]), status


def _check_alpha(alpha: float) -> None:
    if not 0 <= alpha < HALF_PI:
        raise ValueError(f"alpha must lie in [0, pi/2), got {alpha}")


def _check_dims(mset: MatrixSet) -> None:
    if len(mset) == 0:
        raise DimensionMismatchError("empty matrix set")
    m, n = mset.shape
    if m > n:
        raise DimensionMismatchError(f"members must be m x n with m <= n, got {m}x{n}")


def align_feasibility(matrices, alpha: float, *, shortcut: bool = True
                      ) -> AlignmentCertificate | None:
    """Find a verified ``K`` aligning every member within ``[-alpha, alpha]``.

    Returns ``None`` when the set is not alpha-alignable.  A single matrix is
    handled by its pseudoinverse unless ``shortcut`` is false.

    Raises
    ------
    DimensionMismatchError
        Empty set or ``m > n``.
    SolverFailure
        The conic backend broke down without producing a certifiable ``K``.
    """
    mset = _as_set(matrices)
    _check_dims(mset)
    _check_alpha(alpha)
    if shortcut and len(mset) == 1:
        cert = certify(mset, alpha, np.linalg.pinv(mset[0]))
        if cert is not None:
            return cert
    blocks = [_member_block(A) for A in mset]
    K, margin, status = _solve_sdp(mset, alpha, blocks)
    if status not in _CLARABEL_FEASIBLE:
        K, margin, status = _solve_sdp(mset, alpha, blocks, tol=1e-7)
    cert = certify(mset, alpha, K)
    if cert is None and status not in _CLARABEL_FEASIBLE and margin <= 1e-6:
        # breakdown without a usable iterate and no evidence of infeasibility
        raise SolverFailure(f"conic solver stopped with status {status}")
    return cert


def _bisect(feasible, top_cert: AlignmentCertificate, tol: float) -> DiversityResult:
    hi_cert = top_cert
    hi = min(top_cert.alpha, top_cert.achieved_halfwidth)
    lo = 0.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        try:
            cert = feasible(mid)
        except SolverFailure:
            cert = None  # undecided probes only move the lower end
        if cert is None:
            lo = mid
        else:
            hi_cert = cert
            hi = min(mid, cert.achieved_halfwidth)
    return DiversityResult(float(hi), hi_cert)


def diversity(matrices, *, tol: float = TOL_DIV, shortcut: bool = True) -> DiversityResult:
    """Smallest alignable alpha, bracketed by bisection to width ``tol``.

    Returns ``pi/2`` when the set is not alignable even at ``pi/2 - tol``.
    """
    mset = _as_set(matrices)
    top = align_feasibility(mset, HALF_PI - tol, shortcut=shortcut)
    if top is None:
        return DiversityResult(HALF_PI, None)
    return _bisect(lambda a: align_feasibility(mset, a, shortcut=shortcut), top, tol)


@dataclass
class _Entry:
    cert: AlignmentCertificate | None = None
    infeasible_at: float = -1.0
    div: DiversityResult | None = None


@dataclass
class OracleStats:
    calls: int = 0
    solves: int = 0
    cache_hits: int = 0


class FeasibilityOracle:
    """Cached alignability queries over index subsets of one matrix set.

    Cache answers use exact monotonicity only: a certificate found at some
    alpha is reused (after re-verification) for any larger alpha, an
    infeasible answer rules out every smaller alpha, and both propagate
    across subsets and supersets by downward closedness.  Safe for
    concurrent use.
    """

    def __init__(self, matrices, *, tol_div: float = TOL_DIV):
        self.matrices = _as_set(matrices)
        _check_dims(self.matrices)
        self.tol_div = tol_div
        self.stats = OracleStats()
        self._entries: dict[tuple[int, ...], _Entry] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.matrices)

    def _key(self, members: Iterable[int]) -> tuple[int, ...]:
        key = tuple(sorted(set(int(i) for i in members)))
        if not key:
            raise ValueError("empty member set")
        return key

    def _entry(self, key) -> _Entry:
        with self._lock:
            return self._entries.setdefault(key, _Entry())

    def _lookup(self, key, alpha) -> tuple[bool, AlignmentCertificate | None]:
        skey = set(key)
        with self._lock:
            items = list(self._entries.items())
        for other, entry in items:
            if entry.infeasible_at >= alpha and skey.issuperset(other):
                return True, None
        for other, entry in items:
            c = entry.cert
            if c is not None and c.alpha <= alpha and skey.issubset(other):
                cert = certify(self.matrices.subset(key), alpha, c.K)
                if cert is not None:
                    return True, cert
        return False, None

    def _solve(self, key: tuple[int, ...], alpha: float) -> AlignmentCertificate | None:
        return align_feasibility(self.matrices.subset(key), alpha)

    def feasible(self, members: Iterable[int], alpha: float) -> AlignmentCertificate | None:
        key = self._key(members)
        self.stats.calls += 1
        hit, cert = self._lookup(key, alpha)
        if hit:
            self.stats.cache_hits += 1
            if cert is not None:
                self._record(key, alpha, cert)
            return cert
        self.stats.solves += 1
        cert = self._solve(key, alpha)
        self._record(key, alpha, cert)
        return cert

    __call__ = feasible

    def _record(self, key, alpha, cert) -> None:
        entry = self._entry(key)
        with self._lock:
            if cert is None:
                entry.infeasible_at = max(entry.infeasible_at, alpha)
            elif entry.cert is None or cert.alpha < entry.cert.alpha:
                entry.cert = cert

    def diversity(self, members: Iterable[int], *, upper: float | None = None) -> DiversityResult:
        """Diversity of a member subset, cached per subset.

        ``upper``: an alpha already known to be feasible, used to skip the
        top-of-range probe.
        """
        key = self._key(members)
        entry = self._entry(key)
        if entry.div is not None:
            return entry.div
        result = self._diversity(key, upper)
        with self._lock:
            entry.div = result
        return result

    def _diversity(self, key, upper) -> DiversityResult:
        top = self.feasible(key, upper if upper is not None else HALF_PI - self.tol_div)
        if top is None:
            if upper is not None:
                top = self.feasible(key, HALF_PI - self.tol_div)
            if top is None:
                return DiversityResult(HALF_PI, None)
        return _bisect(lambda a: self.feasible(key, a), top, self.tol_div)

    def verified(self, members: Iterable[int], alpha: float) -> AlignmentCertificate | None:
        """Uncached solve, for final certificates that must not depend on cache state."""
        key = self._key(members)
        cert = self.feasible(key, alpha)
        if cert is not None and verify_certificate(self.matrices.subset(key), alpha, cert.K):
            return cert
        return self._solve(key, alpha)


def _min_arc(angles: np.ndarray) -> tuple[float, float]:
    """Length and midpoint of the shortest circular arc containing all angles."""
    a = np.sort(np.mod(angles, 2 * math.pi))
    if a.size == 1:
        return 0.0, float(a[0])
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * math.pi]]))
    j = int(np.argmax(gaps))
    start = a[(j + 1) % a.size]
    length = 2 * math.pi - gaps[j]
    return float(length), float(start + length / 2)


class ScalarPhaseOracle(FeasibilityOracle):
    """Closed-form oracle for nonzero ``1 x 1`` matrices.

    A scalar ``k`` rotates every member by the same angle, so a subset is
    alpha-alignable iff the shortest arc holding its arguments has half-length
    at most alpha.
    """

    def __init__(self, matrices, **kw):
        super().__init__(matrices, **kw)
        if self.matrices.shape != (1, 1):
            raise DimensionMismatchError("ScalarPhaseOracle needs 1x1 matrices")
        vals = self.matrices.array[:, 0, 0]
        if np.any(vals == 0):
            raise ValueError("scalar members must be nonzero")
        self._angles = np.angle(vals)

    def _solve(self, key, alpha):
        length, mid = _min_arc(self._angles[list(key)])
        if length / 2 > alpha + 1e-12:
            return None
        return certify(self.matrices.subset(key), alpha, np.array([[np.exp(-1j * mid)]]))

    def _diversity(self, key, upper):
        length, mid = _min_arc(self._angles[list(key)])
        if length / 2 >= HALF_PI:
            return DiversityResult(HALF_PI, None)
        value = length / 2
        cert = certify(self.matrices.subset(key), value, np.array([[np.exp(-1j * mid)]]))
        return DiversityResult(value, cert)
