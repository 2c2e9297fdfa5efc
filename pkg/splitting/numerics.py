"""
Dense linear-algebra substrate shared by every module.

Matrices are 2-D float arrays. A block vector in H^p with H = R^d is stored as
a (p, d) array, so that applying W (x) Id to it is an ordinary matrix product.
"""

from typing import Optional, Tuple

import numpy as np

from .errors import ContractError, ShapeError

DenseMatrix = np.ndarray
BlockVector = np.ndarray

DEFAULT_RANK_TOL = 1e-10
SYMMETRY_TOL = 1e-12


def as_matrix(W, name: str = "matrix") -> DenseMatrix:
    """
    Coerce to a finite 2-D float array.

    Args:
        W: Nested sequence or array
        name: Used in error messages

    Returns:
        Float array of shape (rows, cols)
    """
    arr = np.array(W, dtype=float)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeError(f"{name} has non-finite entries")
    return arr


def as_blocks(u, blocks: Optional[int] = None, dim: Optional[int] = None,
              name: str = "block vector") -> BlockVector:
    """
    Coerce to a (blocks, dim) float array.

    A 1-D input is read as `blocks` scalar blocks when `blocks` is given and
    dim is 1 or unknown, otherwise as a flat array of length blocks*dim.
    """
    arr = np.array(u, dtype=float)
    if arr.ndim == 1:
        if blocks is None:
            raise ShapeError(f"{name}: cannot infer block layout from a flat array")
        if dim is None:
            if arr.size % blocks:
                raise ShapeError(f"{name}: length {arr.size} not divisible into {blocks} blocks")
            dim = arr.size // blocks
        if arr.size != blocks * dim:
            raise ShapeError(f"{name}: length {arr.size} != {blocks} x {dim}")
        arr = arr.reshape(blocks, dim)
    elif arr.ndim != 2:
        raise ShapeError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if blocks is not None and arr.shape[0] != blocks:
        raise ShapeError(f"{name} has {arr.shape[0]} blocks, expected {blocks}")
    if dim is not None and arr.shape[1] != dim:
        raise ShapeError(f"{name} has block dimension {arr.shape[1]}, expected {dim}")
    return arr


def kron_apply(W: DenseMatrix, u: BlockVector) -> BlockVector:
    """
    Apply W (x) Id to a block vector: output block i is sum_j W[i, j] u[j].

    Args:
        W: (p, l) coefficient matrix
        u: (l, d) block vector

    Returns:
        (p, d) block vector
    """
    W = np.asarray(W, dtype=float)
    u = np.asarray(u, dtype=float)
    if W.ndim != 2 or u.ndim != 2:
        raise ShapeError(f"kron_apply expects 2-D inputs, got {W.shape} and {u.shape}")
    if W.shape[1] != u.shape[0]:
        raise ShapeError(f"cannot apply {W.shape[0]}x{W.shape[1]} matrix to {u.shape[0]} blocks")
    return W @ u


def check_symmetric(Q: DenseMatrix, tol: float = SYMMETRY_TOL) -> DenseMatrix:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {Q.shape}")
    scale = max(1.0, float(np.max(np.abs(Q)))) if Q.size else 1.0
    if Q.size and np.max(np.abs(Q - Q.T)) > tol * scale:
        raise ContractError("matrix is not symmetric within tolerance")
    return Q


def max_eigenvalue_symmetric(Q: DenseMatrix) -> float:
    """Largest eigenvalue of a symmetric matrix (0 for the empty matrix)"""
    Q = check_symmetric(Q)
    if Q.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(Q)[-1])


def min_eigenvalue_symmetric(Q: DenseMatrix) -> float:
    Q = check_symmetric(Q)
    if Q.size == 0:
        return 0.0
    return float(np.linalg.eigvalsh(Q)[0])


def numerical_rank(W: DenseMatrix, tol: float = DEFAULT_RANK_TOL) -> int:
    """
    Number of singular values above tol times the largest one.

    Args:
        W: Any 2-D matrix
        tol: Relative threshold, must be positive

    Returns:
        Rank, with rank of the zero (or empty) matrix equal to 0
    """
    if tol <= 0:
        raise ContractError("rank tolerance must be positive")
    W = as_matrix(W, "W")
    if W.size == 0:
        return 0
    sv = np.linalg.svd(W, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


def least_squares(W: DenseMatrix, rhs: BlockVector) -> Tuple[BlockVector, float]:
    """
    Minimal-norm least-squares solution of (W (x) Id) u = rhs.

    Returns:
        (u, residual norm)
    """
    W = np.asarray(W, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if W.shape[0] != rhs.shape[0]:
        raise ShapeError(f"cannot solve {W.shape[0]}x{W.shape[1]} system with {rhs.shape[0]} blocks")
    u, *_ = np.linalg.lstsq(W, rhs, rcond=None)
    return u, float(np.linalg.norm(W @ u - rhs))


def consensus_residual(x: BlockVector) -> float:
    """max_i ||x_i - mean(x)||"""
    if x.shape[0] == 0:
        return 0.0
    center = x.mean(axis=0)
    return float(np.max(np.linalg.norm(x - center, axis=1)))
