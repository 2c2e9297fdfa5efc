"""
Splitting scheme data model and validation.

A scheme is the pair of coefficient matrices (M, N) together with the
relaxation parameter gamma. S is never stored: it is always derived as -M^T,
so the coupling condition S^T = -M cannot fail.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .config import DEFAULT_GAMMA
from .documents import SchemeDocument, dump_document, parse_document
from .errors import ContractError, ShapeError
from .numerics import (DEFAULT_RANK_TOL, DenseMatrix, as_matrix, least_squares,
                       max_eigenvalue_symmetric, numerical_rank)

logger = logging.getLogger(__name__)

KERNEL_TOL = 1e-10
ROW_SUM_TOL = 1e-10
DEFECT_TOL = 1e-9
GRAM_TOL = 1e-10
GAMMA_UPPER_LIMIT = 2.0


@dataclass(frozen=True, eq=False)
class SplittingScheme:
    """
    Coefficient matrices of a frugal resolvent splitting.

    Attributes:
        M: (m, n) matrix; T(z) = z + gamma * M x
        N: (n, n) matrix coupling the resolvent arguments
        gamma: relaxation parameter, conforming when in (0, 1)
        name: identifier used in reports and traces
        allow_gamma: permits iterating with gamma in [1, 2)
        gram: exact M^T M when known in closed form
        warnings: notes attached at construction (e.g. defaulted gamma)
    """
    M: DenseMatrix
    N: DenseMatrix
    gamma: float = DEFAULT_GAMMA
    name: str = "custom"
    allow_gamma: bool = False
    gram: Optional[DenseMatrix] = None
    warnings: Tuple[str, ...] = ()

    def __post_init__(self):
        M = as_matrix(self.M, "M")
        N = as_matrix(self.N, "N")
        if N.shape[0] != N.shape[1]:
            raise ShapeError(f"N must be square, got {N.shape}")
        if M.shape[1] != N.shape[0]:
            raise ShapeError(f"M has {M.shape[1]} columns but N is {N.shape[0]}x{N.shape[0]}")
        gamma = float(self.gamma)
        if not np.isfinite(gamma) or not 0.0 < gamma < GAMMA_UPPER_LIMIT:
            raise ContractError(f"gamma must lie in (0, {GAMMA_UPPER_LIMIT}), got {gamma}")
        M.setflags(write=False)
        N.setflags(write=False)
        object.__setattr__(self, 'M', M)
        object.__setattr__(self, 'N', N)
        object.__setattr__(self, 'gamma', gamma)
        object.__setattr__(self, 'warnings', tuple(self.warnings))
        if self.gram is not None:
            G = as_matrix(self.gram, "gram")
            if G.shape != N.shape:
                raise ShapeError(f"gram must be {N.shape}, got {G.shape}")
            G.setflags(write=False)
            object.__setattr__(self, 'gram', G)

    @property
    def n(self) -> int:
        """Number of operators"""
        return self.N.shape[0]

    @property
    def m(self) -> int:
        """Lifting dimension"""
        return self.M.shape[0]

    @property
    def S(self) -> DenseMatrix:
        return derive_S(self)

    @property
    def gamma_conforming(self) -> bool:
        return 0.0 < self.gamma < 1.0

    def gram_matrix(self) -> DenseMatrix:
        """M^T M, exact when the builder supplied it"""
        if self.gram is not None:
            return self.gram
        return self.M.T @ self.M

    def with_gamma(self, gamma: float, allow_gamma: Optional[bool] = None) -> 'SplittingScheme':
        return SplittingScheme(self.M, self.N, gamma, self.name,
                               self.allow_gamma if allow_gamma is None else allow_gamma,
                               self.gram, self.warnings)

    def same_matrices(self, other: 'SplittingScheme', tol: float = 0.0) -> bool:
        if self.M.shape != other.M.shape or self.N.shape != other.N.shape:
            return False
        return (np.max(np.abs(self.M - other.M), initial=0.0) <= tol
                and np.max(np.abs(self.N - other.N), initial=0.0) <= tol)

    def __repr__(self) -> str:
        return f"SplittingScheme(name={self.name!r}, n={self.n}, m={self.m}, gamma={self.gamma})"


@dataclass
class ValidationReport:
    """Outcome of checking a scheme against conditions (a)-(d)"""
    kernel_ok: bool
    kernel_residual: float
    rank: int
    triangular_ok: bool
    row_sum_total: float
    row_sum_ok: bool
    coupling_ok: bool
    defect: DenseMatrix
    defect_max_eigenvalue: float
    defect_ok: bool
    gram_ok: bool = True
    gamma: float = DEFAULT_GAMMA
    gamma_conforming: bool = True
    warnings: List[str] = field(default_factory=list)

    @property
    def condition_a(self) -> bool:
        return self.kernel_ok

    @property
    def condition_b(self) -> bool:
        return self.triangular_ok and self.row_sum_ok

    @property
    def condition_c(self) -> bool:
        return self.coupling_ok

    @property
    def condition_d(self) -> bool:
        return self.defect_ok and self.gram_ok

    @property
    def valid(self) -> bool:
        return self.condition_a and self.condition_b and self.condition_c and self.condition_d

    def failures(self) -> List[str]:
        """Human-readable reason for every failed condition"""
        reasons = []
        n = self.defect.shape[0]
        if not self.kernel_ok:
            reasons.append(f"(a) ker M != span{{e}}: |Me| = {self.kernel_residual:.3e}, "
                           f"rank {self.rank} (expected {n - 1})")
        if not self.triangular_ok:
            reasons.append("(b) N is not strictly lower triangular")
        if not self.row_sum_ok:
            reasons.append(f"(b) sum of N entries is {self.row_sum_total:g}, expected {n}")
        if not self.coupling_ok:
            reasons.append("(c) S^T != -M")
        if not self.defect_ok:
            reasons.append(f"(d) M^T M + N + N^T - 2I has eigenvalue {self.defect_max_eigenvalue:.3e} > 0")
        if not self.gram_ok:
            reasons.append("(d) supplied Gram matrix disagrees with M^T M")
        return reasons

    def to_dict(self) -> Dict[str, Any]:
        return {
            'valid': self.valid,
            'conditions': {'a': self.condition_a, 'b': self.condition_b,
                           'c': self.condition_c, 'd': self.condition_d},
            'kernel_residual': self.kernel_residual,
            'rank': self.rank,
            'row_sum_total': self.row_sum_total,
            'defect_max_eigenvalue': self.defect_max_eigenvalue,
            'defect': self.defect.tolist(),
            'gamma': self.gamma,
            'gamma_conforming': self.gamma_conforming,
            'failures': self.failures(),
            'warnings': list(self.warnings),
        }


def derive_S(scheme: SplittingScheme) -> DenseMatrix:
    """S = -M^T"""
    return -scheme.M.T


def defect(scheme: SplittingScheme) -> DenseMatrix:
    """
    M^T M + N + N^T - 2I, symmetrized so it is bit-exactly symmetric.
    """
    n = scheme.n
    Q = scheme.gram_matrix() + scheme.N + scheme.N.T - 2.0 * np.eye(n)
    return 0.5 * (Q + Q.T)


def validate(scheme: SplittingScheme, rank_tol: float = DEFAULT_RANK_TOL) -> ValidationReport:
    """
    Check the scheme against conditions (a)-(d).

    (a) M e = 0 and rank M = n - 1, (b) N strictly lower triangular with entries
    summing to n, (c) holds by construction, (d) defect negative semidefinite.
    Failures are report entries, never exceptions.
    """
    n = scheme.n
    M, N = scheme.M, scheme.N

    ones = np.ones(n)
    kernel_residual = float(np.max(np.abs(M @ ones), initial=0.0))
    rank = numerical_rank(M, rank_tol) if M.size else 0
    kernel_ok = kernel_residual <= KERNEL_TOL and rank == n - 1

    triangular_ok = bool(np.all(np.triu(N) == 0.0))
    row_sum_total = float(N.sum())
    row_sum_ok = abs(row_sum_total - n) <= ROW_SUM_TOL

    gram_ok = True
    if scheme.gram is not None:
        direct = M.T @ M
        gram_ok = float(np.max(np.abs(direct - scheme.gram), initial=0.0)) <= GRAM_TOL * (1.0 + float(np.max(np.abs(direct), initial=0.0)))

    Q = defect(scheme)
    lam = max_eigenvalue_symmetric(Q)

    warnings = list(scheme.warnings)
    if not scheme.gamma_conforming:
        warnings.append(f"gamma={scheme.gamma} outside (0, 1): non-conforming")

    report = ValidationReport(
        kernel_ok=kernel_ok, kernel_residual=kernel_residual, rank=rank,
        triangular_ok=triangular_ok, row_sum_total=row_sum_total, row_sum_ok=row_sum_ok,
        coupling_ok=True, defect=Q, defect_max_eigenvalue=lam, defect_ok=lam <= DEFECT_TOL,
        gram_ok=gram_ok, gamma=scheme.gamma, gamma_conforming=scheme.gamma_conforming,
        warnings=warnings,
    )
    if not report.valid:
        logger.warning("scheme %s failed validation: %s", scheme.name, "; ".join(report.failures()))
    return report


def in_range_of_S(scheme: SplittingScheme, v: np.ndarray, tol: float = 1e-9) -> bool:
    """Whether the block vector v lies in the range of S (x) Id"""
    _, residual = least_squares(derive_S(scheme), v)
    return residual <= tol * (1.0 + float(np.linalg.norm(v)))


def load_scheme(document: Union[str, bytes, Dict[str, Any]]) -> SplittingScheme:
    """
    Build a scheme from its JSON document.

    A missing "gamma" defaults to 0.5 and records a warning on the scheme,
    which validate() carries into its report.
    """
    doc = parse_document(document, SchemeDocument)
    for label, rows, n_rows, n_cols in (('M', doc.M, doc.m, doc.n), ('N', doc.N, doc.n, doc.n)):
        if len(rows) != n_rows or any(len(row) != n_cols for row in rows):
            raise ShapeError(f"{label} must be {n_rows}x{n_cols} as declared by n={doc.n}, m={doc.m}")
    warnings: Tuple[str, ...] = ()
    gamma = doc.gamma
    if gamma is None:
        gamma = DEFAULT_GAMMA
        warnings = (f"gamma missing from document; defaulted to {DEFAULT_GAMMA}",)
        logger.warning(warnings[0])
    M = np.array(doc.M, dtype=float).reshape(doc.m, doc.n)
    N = np.array(doc.N, dtype=float).reshape(doc.n, doc.n)
    return SplittingScheme(M, N, gamma, name=doc.name or "file", warnings=warnings)


def save_scheme(scheme: SplittingScheme) -> str:
    """Serialize to the JSON scheme document"""
    doc = SchemeDocument(n=scheme.n, m=scheme.m, gamma=scheme.gamma,
                         M=scheme.M.tolist(), N=scheme.N.tolist(), name=scheme.name)
    return dump_document(doc)
