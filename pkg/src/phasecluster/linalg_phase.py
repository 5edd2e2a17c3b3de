"""Numerical ranges, matrix phases and sectorial decompositions.

All routines take dense complex ``numpy`` arrays and are pure functions.
A square matrix ``A`` is split as ``A = H + iS`` with ``H = (A + A^H)/2``
and ``S = (A - A^H)/(2i)``, both Hermitian.  Rotating ``A`` by ``e^{-i g}``
turns its Hermitian part into ``cos(g) H + sin(g) S``; ``A`` is sectorial
exactly when some rotation makes that part positive definite.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .errors import (
    NonSquareError,
    NotLaplacianError,
    NotPhaseDefinedError,
    NotSectorialError,
    NotStronglyConnectedError,
)

__all__ = [
    "SectorClass",
    "PhaseSpectrum",
    "SectorialFactorization",
    "RANK_RTOL",
    "TOL_REC",
    "as_cmatrix",
    "hermitian_parts",
    "numerical_rank",
    "numerical_range_boundary",
    "center_angle",
    "classify",
    "phases",
    "sectorial_factorization",
    "left_null_vector",
    "essential_phase",
]

RANK_RTOL = 1e-9
TOL_REC = 1e-8
PD_RTOL = 1e-10
SEMI_RTOL = 1e-8
# relative Frobenius residual allowed when splitting off a common null space
STRUCT_RTOL = 1e-6
GRID_POINTS = 720


class SectorClass(str, enum.Enum):
    SECTORIAL = "Sectorial"
    QUASI_SECTORIAL = "QuasiSectorial"
    SEMI_SECTORIAL = "SemiSectorial"
    NON_SECTORIAL = "NonSectorial"


@dataclass(frozen=True)
class PhaseSpectrum:
    """Phases of a phase-defined matrix, sorted in descending order.

    ``center`` is the rotation angle used to compute them; every phase lies
    in ``[center - pi/2, center + pi/2]``.
    """

    phases: tuple[float, ...]
    sector: SectorClass
    center: float
    rank: int

    @property
    def max_phase(self) -> float:
        return self.phases[0] if self.phases else 0.0

    @property
    def min_phase(self) -> float:
        return self.phases[-1] if self.phases else 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray(self.phases, dtype=float)


@dataclass(frozen=True)
class SectorialFactorization:
    """``A = T^H D T`` with ``T`` nonsingular and ``D`` unimodular diagonal."""

    T: np.ndarray
    D: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.T.conj().T @ self.D @ self.T


def as_cmatrix(A, *, square: bool = False) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    if square and A.shape[0] != A.shape[1]:
        raise NonSquareError(f"matrix must be square, got {A.shape[0]}x{A.shape[1]}")
    return A


def hermitian_parts(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Ah = A.conj().T
    return (A + Ah) / 2, (A - Ah) / 2j


def numerical_rank(A, rtol: float = RANK_RTOL) -> int:
    A = np.asarray(A, dtype=complex)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def numerical_range_boundary(A, k: int) -> np.ndarray:
    """Sample ``k`` boundary points of the numerical range of ``A``.

    For each direction ``theta_j = 2 pi j / k`` the support point is
    ``x^H A x`` with ``x`` the top eigenvector of the Hermitian part of
    ``e^{-i theta_j} A``.  Points come out in counter-clockwise order.
    """
    A = as_cmatrix(A, square=True)
    if k < 3:
        raise ValueError("k must be at least 3")
    H, S = hermitian_parts(A)
    theta = 2 * np.pi * np.arange(k) / k
    rotated = np.cos(theta)[:, None, None] * H + np.sin(theta)[:, None, None] * S
    _, vecs = np.linalg.eigh(rotated)
    x = vecs[:, :, -1]
    return np.einsum("ki,ij,kj->k", x.conj(), A, x)


def _min_eig_curve(H: np.ndarray, S: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    rotated = np.cos(gammas)[:, None, None] * H + np.sin(gammas)[:, None, None] * S
    return np.linalg.eigvalsh(rotated)[:, 0]


def center_angle(A) -> tuple[float, float]:
    """Rotation ``g`` in ``[-pi, pi)`` maximizing ``lambda_min`` of the rotated Hermitian part.

    Returns ``(g, lambda_min_at_g)``.  Coarse grid first, then a bounded
    scalar refinement around the best grid point.
    """
    A = as_cmatrix(A, square=True)
    H, S = hermitian_parts(A)
    grid = -np.pi + 2 * np.pi * np.arange(GRID_POINTS) / GRID_POINTS
    values = _min_eig_curve(H, S, grid)
    scale = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    # ties broken toward the smallest |g| so that e.g. diag(i, -i) centers at 0
    near = np.flatnonzero(values >= values.max() - 1e-12 * scale)
    g0 = grid[near[np.argmin(np.abs(grid[near]))]]
    step = 2 * np.pi / GRID_POINTS

    def neg(g):
        return -_min_eig_curve(H, S, np.array([g]))[0]

    res = minimize_scalar(neg, bounds=(g0 - step, g0 + step), method="bounded",
                          options={"xatol": 1e-13})
    g, f = (res.x, -res.fun) if -res.fun >= values.max() else (g0, values.max())
    g = (g + np.pi) % (2 * np.pi) - np.pi
    return float(g), float(f)


def _rotated_parts(A: np.ndarray, g: float) -> tuple[np.ndarray, np.ndarray]:
    H, S = hermitian_parts(A)
    c, s = np.cos(g), np.sin(g)
    return c * H + s * S, c * S - s * H


@dataclass(frozen=True)
class _PhaseData:
    sector: SectorClass
    center: float
    phases: tuple[float, ...]
    rank: int


def _floats(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


def _sectorial_phases(A: np.ndarray, g: float) -> np.ndarray:
    Hg, Sg = _rotated_parts(A, g)
    lam = scipy.linalg.eigh(Sg, Hg, eigvals_only=True)
    return np.sort(g + np.arctan(lam))[::-1]


def _semi_phases(A: np.ndarray, g: float) -> np.ndarray | None:
    """Phases of a nonsingular matrix whose rotated Hermitian part is singular PSD.

    Directions in the kernel of the Hermitian part carry phases ``g +- pi/2``
    with signs given by the inertia of the compressed skew part; the rest come
    from the Schur-complement pencil.  Returns ``None`` when the pencil is
    degenerate (no phases exist).
    """
    Hg, Sg = _rotated_parts(A, g)
    h, Q = np.linalg.eigh(Hg)
    scale = max(np.linalg.norm(A, 2), np.finfo(float).tiny)
    kernel = h <= SEMI_RTOL * scale
    Q1, Q2 = Q[:, ~kernel], Q[:, kernel]
    S22 = Q2.conj().T @ Sg @ Q2
    s22 = np.linalg.eigvalsh(S22)
    if np.any(np.abs(s22) <= SEMI_RTOL * scale):
        return None
    out = [g + np.pi / 2 * np.sign(s22)]
    if Q1.shape[1]:
        S11 = Q1.conj().T @ Sg @ Q1
        S12 = Q1.conj().T @ Sg @ Q2
        Sc = S11 - S12 @ np.linalg.solve(S22, S12.conj().T)
        Sc = (Sc + Sc.conj().T) / 2
        lam = scipy.linalg.eigh(Sc, np.diag(h[~kernel]), eigvals_only=True)
        out.append(g + np.arctan(lam))
    return np.sort(np.concatenate(out))[::-1]


def _nonsingular_data(A: np.ndarray) -> _PhaseData:
    n = A.shape[0]
    scale = np.linalg.norm(A, 2)
    g, f = center_angle(A)
    if f > PD_RTOL * scale:
        return _PhaseData(SectorClass.SECTORIAL, g, _floats(_sectorial_phases(A, g)), n)
    if f >= -SEMI_RTOL * scale:
        ph = _semi_phases(A, g)
        if ph is not None:
            return _PhaseData(SectorClass.SEMI_SECTORIAL, g, _floats(ph), n)
    return _PhaseData(SectorClass.NON_SECTORIAL, g, (), n)


def _compress_to_range(A: np.ndarray, r: int) -> np.ndarray | None:
    """Compression ``U_r^H A U_r`` if range and co-range of ``A`` coincide."""
    U, _, _ = np.linalg.svd(A)
    Ur = U[:, :r]
    C = Ur.conj().T @ A @ Ur
    resid = np.linalg.norm(A - Ur @ C @ Ur.conj().T)
    if resid > STRUCT_RTOL * np.linalg.norm(A):
        return None
    return C


def _phase_data(A: np.ndarray) -> _PhaseData:
    n = A.shape[0]
    r = numerical_rank(A)
    if r == n:
        return _nonsingular_data(A)
    if r == 0:
        # W(0) = {0}; the origin is trivially a sharp point and no phases exist
        return _PhaseData(SectorClass.QUASI_SECTORIAL, 0.0, (), 0)
    C = _compress_to_range(A, r)
    if C is None:
        return _PhaseData(SectorClass.NON_SECTORIAL, 0.0, (), r)
    inner = _nonsingular_data(C)
    sector = {
        SectorClass.SECTORIAL: SectorClass.QUASI_SECTORIAL,
        SectorClass.SEMI_SECTORIAL: SectorClass.SEMI_SECTORIAL,
    }.get(inner.sector, SectorClass.NON_SECTORIAL)
    return _PhaseData(sector, inner.center, inner.phases, r)


def classify(A) -> SectorClass:
    """Sectoriality class of a square matrix."""
    return _phase_data(as_cmatrix(A, square=True)).sector


def phases(A) -> PhaseSpectrum:
    """Descending phases of a phase-defined square matrix.

    Quasi- and semi-sectorial matrices yield ``rank(A)`` phases computed on
    the compression of ``A`` to its range.

    Raises
    ------
    NotPhaseDefinedError
        If ``A`` is non-sectorial.
    """
    data = _phase_data(as_cmatrix(A, square=True))
    if data.sector is SectorClass.NON_SECTORIAL:
        raise NotPhaseDefinedError("matrix is non-sectorial; phases are undefined")
    return PhaseSpectrum(data.phases, data.sector, data.center, data.rank)


def sectorial_factorization(A) -> SectorialFactorization:
    A = as_cmatrix(A, square=True)
    g, f = center_angle(A)
    if not f > PD_RTOL * np.linalg.norm(A, 2):
        raise NotSectorialError("matrix is not sectorial")
    Hg, Sg = _rotated_parts(A, g)
    h, Q = np.linalg.eigh(Hg)
    h_half = Q @ np.diag(np.sqrt(h)) @ Q.conj().T
    h_mhalf = Q @ np.diag(1 / np.sqrt(h)) @ Q.conj().T
    G = h_mhalf @ Sg @ h_mhalf
    lam, U = np.linalg.eigh((G + G.conj().T) / 2)
    order = np.argsort(lam)[::-1]
    lam, U = lam[order], U[:, order]
    mod = np.sqrt(1 + lam**2)
    T = np.diag(np.sqrt(mod)) @ U.conj().T @ h_half
    D = np.diag(np.exp(1j * (g + np.arctan(lam))))
    return SectorialFactorization(T, D)


def _check_laplacian(L: np.ndarray) -> None:
    scale = max(1.0, np.abs(L).max())
    if np.abs(L.sum(axis=1)).max() > 1e-10 * scale:
        raise NotLaplacianError("row sums of a Laplacian must vanish")
    off = L - np.diag(np.diag(L))
    if np.abs(off.imag).max() > 1e-12 * scale or off.real.max() > 1e-12 * scale:
        raise NotLaplacianError("off-diagonal Laplacian entries must be real and nonpositive")


def left_null_vector(L) -> np.ndarray:
    """Entrywise positive left null vector of a strongly connected Laplacian, summing to 1."""
    L = as_cmatrix(L, square=True)
    _check_laplacian(L)
    ns = scipy.linalg.null_space(L.T.real, rcond=RANK_RTOL)
    if ns.shape[1] != 1:
        raise NotStronglyConnectedError(
            f"zero eigenvalue has multiplicity {ns.shape[1]}, expected 1")
    v = ns[:, 0] / ns[:, 0].sum()
    if np.any(v <= 1e-12):
        raise NotStronglyConnectedError("left null vector is not strictly positive")
    return v


def essential_phase(L) -> float:
    """Largest phase of ``V^{1/2} L V^{-1/2}`` with ``v`` the positive left null vector."""
    L = as_cmatrix(L, square=True)
    n = L.shape[0]
    v = left_null_vector(L)
    if n == 1:
        return 0.0
    s = np.sqrt(v)
    scaled = (s[:, None] * L.real) / s[None, :]
    # s is a common left/right null vector of the scaled matrix
    Q = scipy.linalg.null_space((s / np.linalg.norm(s))[None, :])
    C = Q.T @ scaled @ Q
    data = _nonsingular_data(C.astype(complex))
    if data.sector is SectorClass.NON_SECTORIAL:
        raise NotPhaseDefinedError("scaled Laplacian is not semi-sectorial")
    return float(max(data.phases))
