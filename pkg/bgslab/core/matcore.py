"""
Dense kernels the algorithms are built from.

Everything operates on float64 numpy arrays. Kernels never modify their inputs.
"""

import logging
from typing import Literal

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from bgslab.config import settings
from bgslab.core.errors import (
    ContractViolationError,
    ConvergenceError,
    NonFiniteError,
    NotPositiveDefiniteError,
    SingularSolveError,
)

logger = logging.getLogger(__name__)

Mat = NDArray[np.float64]

EPS = float(np.finfo(np.float64).eps)


def as_mat(X) -> Mat:
    """Fresh column-major float64 copy of X, always two-dimensional."""
    A = np.array(X, dtype=np.float64, order="F", copy=True)
    if A.ndim == 1:
        A = A.reshape(-1, 1, order="F")
    if A.ndim != 2:
        raise ContractViolationError(f"expected a matrix, got {A.ndim} dimensions")
    return A


def gemm(
    A: Mat,
    B: Mat,
    *,
    trans_a: bool = False,
    trans_b: bool = False,
    alpha: float = 1.0,
    beta: float = 0.0,
    C: Mat | None = None,
) -> Mat:
    """alpha * op(A) @ op(B) + beta * C."""
    opA = A.T if trans_a else A
    opB = B.T if trans_b else B
    if opA.ndim != 2 or opB.ndim != 2:
        raise ContractViolationError("gemm operands must be matrices")
    if opA.shape[1] != opB.shape[0]:
        raise ContractViolationError(
            f"gemm inner dimensions differ: {opA.shape} x {opB.shape}"
        )
    product = opA @ opB
    if alpha != 1.0:
        product = alpha * product
    if C is None:
        return product
    if C.shape != product.shape:
        raise ContractViolationError(f"gemm C has shape {C.shape}, expected {product.shape}")
    if beta == 0.0:
        return product
    return product + C if beta == 1.0 else product + beta * C


def cholesky(A: Mat) -> Mat:
    """Upper Cholesky factor of the symmetrized A; raises NotPositiveDefiniteError on a pivot <= 0."""
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolationError(f"cholesky needs a square matrix, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteError("cholesky input has non-finite entries")
    sym = 0.5 * (A + A.T)
    try:
        R = scipy.linalg.cholesky(sym, lower=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return np.asfortranarray(R)


def tri_solve(
    R: Mat,
    B: Mat,
    *,
    side: Literal["left", "right"] = "left",
    transpose: bool = False,
    lower: bool = False,
) -> Mat:
    """
    Solve with a triangular R.

    left:  op(R) @ Y = B      right: Y @ op(R) = B
    with op(R) = R^T when transpose is set.
    """
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ContractViolationError(f"tri_solve needs a square factor, got {R.shape}")
    k = R.shape[0]
    if np.any(np.diag(R) == 0.0):
        raise SingularSolveError("triangular factor has a zero diagonal entry")
    vector = B.ndim == 1
    rhs = B.reshape(-1, 1) if vector else B
    if side == "left":
        if rhs.shape[0] != k:
            raise ContractViolationError(f"left solve with {R.shape} against {B.shape}")
        Y = scipy.linalg.solve_triangular(
            R, rhs, trans="T" if transpose else "N", lower=lower, check_finite=False
        )
    elif side == "right":
        if rhs.shape[1] != k:
            raise ContractViolationError(f"right solve with {R.shape} against {B.shape}")
        # Y op(R) = B  <=>  op(R)^T Y^T = B^T
        Y = scipy.linalg.solve_triangular(
            R, rhs.T, trans="N" if transpose else "T", lower=lower, check_finite=False
        ).T
    else:
        raise ContractViolationError(f"unknown side {side!r}")
    Y = np.asfortranarray(Y)
    return Y.ravel() if vector else Y


def house_qr(X: Mat, *, economic: bool = True) -> tuple[Mat, Mat]:
    """Householder QR with R's diagonal made nonnegative."""
    if X.ndim != 2:
        raise ContractViolationError("house_qr needs a matrix")
    rows, cols = X.shape
    if rows < cols:
        raise ContractViolationError(f"house_qr needs rows >= cols, got {X.shape}")
    Q, R = np.linalg.qr(X, mode="reduced" if economic else "complete")
    k = min(rows, cols)
    signs = np.sign(np.diag(R[:k, :k]))
    signs[signs == 0.0] = 1.0
    Q = Q.copy()
    R = R.copy()
    Q[:, :k] *= signs
    R[:k, :] *= signs[:, None]
    return np.asfortranarray(Q), np.asfortranarray(R)


def _round_robin_pairs(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint column pairs covering every (i, j) once per sweep."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        left, right = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a >= 0 and b >= 0:
                left.append(min(a, b))
                right.append(max(a, b))
        rounds.append((np.array(left, dtype=np.intp), np.array(right, dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_svd_values(X: Mat, *, max_sweeps: int | None = None) -> NDArray[np.float64]:
    """
    Singular values of X in descending order by one-sided Jacobi.

    Tall input is first reduced to its triangular factor, which leaves the
    singular values unchanged and keeps the sweeps on an n x n matrix.
    """
    if X.ndim != 2:
        raise ContractViolationError("jacobi_svd_values needs a matrix")
    rows, cols = X.shape
    if rows < cols:
        raise ContractViolationError(f"jacobi_svd_values needs rows >= cols, got {X.shape}")
    if cols == 0:
        return np.zeros(0)
    if not np.all(np.isfinite(X)):
        raise NonFiniteError("singular values of a non-finite matrix")
    sweeps = max_sweeps if max_sweeps is not None else settings.JACOBI_MAX_SWEEPS

    A = np.array(X, dtype=np.float64, order="F")
    if rows > cols:
        A = np.asfortranarray(np.linalg.qr(A, mode="r"))
    if cols == 1:
        return np.array([np.linalg.norm(A[:, 0])])

    tol = np.sqrt(A.shape[0]) * EPS
    rounds = _round_robin_pairs(cols)
    for sweep in range(sweeps):
        rotated = False
        for i, j in rounds:
            Ai, Aj = A[:, i], A[:, j]
            alpha = np.einsum("ij,ij->j", Ai, Ai)
            beta = np.einsum("ij,ij->j", Aj, Aj)
            gamma = np.einsum("ij,ij->j", Ai, Aj)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not np.any(active):
                continue
            rotated = True
            i, j = i[active], j[active]
            Ai, Aj = A[:, i], A[:, j]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0.0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            A[:, i] = c * Ai - s * Aj
            A[:, j] = s * Ai + c * Aj
        if not rotated:
            logger.debug("jacobi converged after %s sweeps on %sx%s", sweep, rows, cols)
            break
    else:
        raise ConvergenceError(f"one-sided Jacobi did not converge in {sweeps} sweeps")

    values = np.linalg.norm(A, axis=0)
    return np.sort(values)[::-1]


def two_norm(A: Mat) -> float:
    """Spectral norm, the largest singular value."""
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.size == 0:
        return 0.0
    if A.shape[0] < A.shape[1]:
        A = A.T
    return float(jacobi_svd_values(A)[0])
