from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.linalg

from ._kernels import pair_matrix
from .coupling import Coupling
from .dynamics import cluster_blocks, gradient_residual, is_fixed_point
from .equilibrium import GameConfig, tilde_E
from .exceptions import (
    NonConvergenceError,
    NotAFixedPointError,
    NotSymmetricError,
    SingularMatrixError,
)

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-10
JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SIZE = 64
VERDICT_MARGIN = 1e-9

EigenMethod = Literal["auto", "jacobi", "lapack"]


class Verdict(str, enum.Enum):
    ASYMPTOTICALLY_STABLE = "AsymptoticallyStable"
    MARGINAL = "Marginal"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class StabilityReport:
    """Linearization of the equilibrium map at a fixed point.

    Parameters
    ----------
    B :class:`np.ndarray`:
        The interaction matrix, A = I + (t/n) B

    A :class:`np.ndarray`:
        The matrix with A D = I, D the derivative of the equilibrium map

    dE_eigenvalues :class:`np.ndarray`:
        All eigenvalues of D, descending

    restricted_eigenvalues :class:`np.ndarray`:
        Eigenvalues of D on the complement of the per-cluster translations

    restricted_spectral_radius :class:`float`:
        Largest modulus among `restricted_eigenvalues`, 1.0 when there is none

    spread_out :class:`bool`:
        Whether every gap between clusters exceeds r

    cluster_sizes :class:`list[int]`:
        Number of agents in each coincident group, left to right

    verdict :class:`Verdict`:
        The stability classification
    """

    B: np.ndarray
    A: np.ndarray
    dE_eigenvalues: np.ndarray
    restricted_eigenvalues: np.ndarray
    restricted_spectral_radius: float
    spread_out: bool
    cluster_sizes: list[int]
    verdict: Verdict

    def __str__(self) -> str:
        return (
            f"{self.verdict.value}: restricted spectral radius {self.restricted_spectral_radius:.12g}"
            f" over {len(self.cluster_sizes)} clusters"
        )


def _weights_or_uniform(n: int, weights: Optional[Sequence[float]]) -> np.ndarray:
    if weights is None:
        return np.full(n, 1.0 / n)
    return np.asarray(weights, dtype=np.float64)


def assemble_B(
    y: Sequence[float], weights: Optional[Sequence[float]], c: Coupling
) -> np.ndarray:
    """B[j, j] = sum_{k != j} n w_k phi''(y_j - y_k), B[j, k] = -n w_k phi''(y_j - y_k).

    With uniform weights (or `weights=None`) this is the symmetric matrix of
    pairwise second derivatives; otherwise column k is scaled by n w_k.
    """
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    scale = n * _weights_or_uniform(n, weights)
    off = pair_matrix(c.phi_second, y) * scale[None, :]
    np.fill_diagonal(off, 0.0)
    return np.diag(off.sum(axis=1)) - off


def assemble_A(
    y: Sequence[float], weights: Optional[Sequence[float]], cfg: GameConfig, c: Coupling
) -> np.ndarray:
    n = len(y)
    return np.eye(n) + (cfg.t / n) * assemble_B(y, weights, c)


def assemble_dE(
    y: Sequence[float], weights: Optional[Sequence[float]], cfg: GameConfig, c: Coupling
) -> np.ndarray:
    """The derivative of the equilibrium map, A^{-1}, by a dense solve.

    Raises
    ------
    `SingularMatrixError`
        When A is singular to working precision
    """
    A = assemble_A(y, weights, cfg, c)
    if np.linalg.cond(A) > 1.0 / np.finfo(float).eps:
        raise SingularMatrixError(cfg.t)
    try:
        return np.linalg.solve(A, np.eye(len(A)))
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(cfg.t) from e


def c_matrix(n: int) -> np.ndarray:
    """n - 1 on the diagonal, -1 elsewhere; spectrum {0, n (n - 1 times)}."""
    if n < 1:
        raise ValueError(f"c_matrix needs n >= 1, got {n}")
    return n * np.eye(n) - np.ones((n, n))


def _rotate(A: np.ndarray, V: np.ndarray, p: int, q: int) -> None:
    theta = 0.5 * math.atan2(2.0 * A[p, q], A[q, q] - A[p, p])
    cos, sin = math.cos(theta), math.sin(theta)

    col_p, col_q = A[:, p].copy(), A[:, q].copy()
    A[:, p] = cos * col_p - sin * col_q
    A[:, q] = sin * col_p + cos * col_q
    row_p, row_q = A[p, :].copy(), A[q, :].copy()
    A[p, :] = cos * row_p - sin * row_q
    A[q, :] = sin * row_p + cos * row_q
    A[p, q] = A[q, p] = 0.0

    vec_p, vec_q = V[:, p].copy(), V[:, q].copy()
    V[:, p] = cos * vec_p - sin * vec_q
    V[:, q] = sin * vec_p + cos * vec_q


def jacobi_eigen(
    M: np.ndarray, tol: float = JACOBI_TOLERANCE, max_sweeps: int = 100
) -> tuple[np.ndarray, np.ndarray, int]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    M :class:`np.ndarray`:
        A symmetric matrix, left untouched

    tol :class:`float`:
        Target Frobenius norm of the off-diagonal part, relative to max(1, |M|)

    max_sweeps :class:`int`:
        Upper bound on the number of cyclic sweeps

    Returns
    -------
    `tuple[np.ndarray, np.ndarray, int]`:
        The eigenvalues (unsorted), the eigenvectors as columns and the
        number of sweeps used

    Raises
    ------
    `NonConvergenceError`
        When `max_sweeps` sweeps do not reach `tol`
    """
    A = np.array(M, dtype=np.float64)
    n = len(A)
    V = np.eye(n)
    target = tol * max(1.0, float(np.linalg.norm(A)))

    for sweep in range(max_sweeps + 1):
        off = math.sqrt(2.0) * float(np.linalg.norm(np.triu(A, 1)))
        if off <= target:
            return np.diag(A).copy(), V, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] != 0.0:
                    _rotate(A, V, p, q)

    raise NonConvergenceError("jacobi", max_sweeps)


def spectrum(M: np.ndarray, method: EigenMethod = "auto") -> np.ndarray:
    """All eigenvalues of a symmetric matrix, descending.

    `auto` uses cyclic Jacobi up to `JACOBI_MAX_SIZE` rows and LAPACK above.

    Raises
    ------
    `NotSymmetricError`
        When M differs from its transpose by more than 1e-10
    """
    M = np.asarray(M, dtype=np.float64)
    if M.size == 0:
        return np.zeros(0)
    asymmetry = float(np.max(np.abs(M - M.T)))
    if asymmetry > SYMMETRY_TOLERANCE:
        raise NotSymmetricError(asymmetry)

    if method == "jacobi" or (method == "auto" and len(M) <= JACOBI_MAX_SIZE):
        values, _, sweeps = jacobi_eigen(M)
        logger.debug("Jacobi converged in %d sweeps for n=%d", sweeps, len(M))
    else:
        values = scipy.linalg.eigvalsh(0.5 * (M + M.T))
    return np.sort(values)[::-1]


def _symmetrized(y: np.ndarray, w: np.ndarray, c: Coupling) -> np.ndarray:
    # W^{1/2} (B / n) W^{-1/2}
    n = len(y)
    root = np.sqrt(w)
    S = assemble_B(y, w, c) / n * (root[:, None] / root[None, :])
    return 0.5 * (S + S.T)


def classify(
    x: Sequence[float],
    weights: Optional[Sequence[float]],
    cfg: GameConfig,
    c: Coupling,
    tol: float = 1e-9,
    method: EigenMethod = "auto",
) -> StabilityReport:
    """Stability of a fixed point of the iterated game.

    The derivative D of the equilibrium map shares its eigenvectors with B,
    so D is analysed through the symmetrized B: every eigenvalue mu of
    W^{1/2} (B/n) W^{-1/2} gives 1 / (1 + t mu). The translations of each
    cluster are neutral directions with eigenvalue 1 and are projected out
    before the restricted spectral radius is taken.

    Parameters
    ----------
    x :class:`Sequence[float]`:
        The candidate fixed point, sorted

    tol :class:`float`:
        Distance below which positions count as coincident

    Raises
    ------
    `NotAFixedPointError`
        When two positions are neither coincident nor at least r apart
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    w = _weights_or_uniform(n, weights)
    if not is_fixed_point(x, c, tol, w):
        raise NotAFixedPointError(gradient_residual(x, w, c), tol)

    B = assemble_B(x, w, c)
    A = np.eye(n) + (cfg.t / n) * B
    S = _symmetrized(x, w, c)
    dE = np.sort(1.0 / (1.0 + cfg.t * spectrum(S, method)))[::-1]

    blocks = cluster_blocks(x, tol)
    translations = np.zeros((n, len(blocks)))
    for i, members in enumerate(blocks):
        translations[members, i] = np.sqrt(w[members])
    complement = scipy.linalg.null_space(translations.T)

    if complement.shape[1] == 0:
        restricted = np.zeros(0)
        radius = 1.0
    else:
        restricted = 1.0 / (1.0 + cfg.t * spectrum(complement.T @ S @ complement, method))
        restricted = np.sort(restricted)[::-1]
        radius = float(np.max(np.abs(restricted)))

    gaps = np.array([x[b[0]] - x[a[-1]] for a, b in zip(blocks[:-1], blocks[1:])])
    spread_out = bool(np.all(gaps > c.support_radius + VERDICT_MARGIN))

    if radius > 1.0 + VERDICT_MARGIN:
        verdict = Verdict.UNSTABLE
    elif spread_out and radius < 1.0 - VERDICT_MARGIN:
        verdict = Verdict.ASYMPTOTICALLY_STABLE
    else:
        verdict = Verdict.MARGINAL

    logger.info(
        "Classified %d agents in %d clusters: %s (radius %.12g)",
        n, len(blocks), verdict.value, radius,
    )
    return StabilityReport(
        B, A, dE, restricted, radius, spread_out, [len(b) for b in blocks], verdict
    )


def taylor_residual(
    x_star: Sequence[float],
    delta: Sequence[float],
    weights: Optional[Sequence[float]],
    cfg: GameConfig,
    c: Coupling,
) -> float:
    """max_j |tilde_E(x* + delta) - x* - D delta|, which is O(|delta|^2)
    when D is the derivative at the fixed point x*."""
    x_star = np.asarray(x_star, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    w = _weights_or_uniform(len(x_star), weights)
    D = assemble_dE(x_star, w, cfg, c)
    moved = tilde_E(x_star + delta, w, cfg, c).positions
    return float(np.max(np.abs(moved - x_star - D @ delta)))
