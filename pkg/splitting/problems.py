"""
Test problems with reference solutions computed without the splitting engine:
affine consensus (closed form), interval feasibility (intersection midpoint),
lasso (coordinate descent certified by subgradient optimality, grid check in
d <= 2) and quadratic saddle games (dense aggregate solve).
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve

from .documents import OperatorDocument, ProblemDocument, ReferenceDocument, dump_document, parse_document
from .errors import ConstructionError, ContractError, ConvexityError, ShapeError, UnsupportedOperatorError
from .numerics import as_matrix, min_eigenvalue_symmetric, numerical_rank
from .operators import (OperatorTuple, ProxKind, ProxOperator, affine_op, operator_from_descriptor,
                        prox_op, saddle_op)

logger = logging.getLogger(__name__)

REFERENCE_TOL = 1e-9
LASSO_GAP_TOL = 1e-10
LASSO_MAX_SWEEPS = 100_000
GRID_POINTS = 11
GRID_LEVELS = 80


class Provenance(Enum):
    ANALYTIC = "analytic"
    ORACLE = "oracle"


@dataclass(frozen=True)
class Reference:
    solution: np.ndarray
    provenance: Provenance


@dataclass
class Problem:
    """Find x with 0 in F_1(x) + ... + F_n(x)"""
    operators: OperatorTuple
    reference: Optional[Reference] = None
    description: str = ""

    def __post_init__(self):
        if not isinstance(self.operators, OperatorTuple):
            self.operators = OperatorTuple(self.operators)
        ref = self.reference
        if ref is None:
            return
        if ref.solution.shape != (self.dim,):
            raise ShapeError(f"reference has shape {ref.solution.shape}, expected ({self.dim},)")
        if ref.provenance is Provenance.ANALYTIC and self.operators.evaluable:
            scale = 1.0 + len(self.operators) * float(np.max(np.abs(ref.solution), initial=0.0))
            if self.residual(ref.solution) > REFERENCE_TOL * scale:
                raise ConstructionError("analytic reference is not a zero of the operator sum")

    @property
    def dim(self) -> int:
        return self.operators.dim

    @property
    def n(self) -> int:
        return len(self.operators)

    def residual(self, point) -> float:
        """||sum_i F_i(point)|| for single-valued operators"""
        if not self.operators.evaluable:
            raise UnsupportedOperatorError("residual needs single-valued operators")
        return float(np.linalg.norm(self.operators.evaluate_sum(point)))

    def contains(self, point, tol: float = 1e-6) -> bool:
        """Membership in every constraint set, for feasibility problems"""
        point = np.asarray(point, dtype=float)
        for op in self.operators:
            if not (isinstance(op, ProxOperator) and op.prox_kind in (ProxKind.BOX, ProxKind.AFFINE_SET)):
                raise ContractError("contains() applies to problems made of set indicators")
            if np.linalg.norm(point - op.resolvent(point)) > tol:
                return False
        return True

    def to_document(self) -> ProblemDocument:
        reference = None
        if self.reference is not None:
            reference = ReferenceDocument(solution=self.reference.solution.tolist(),
                                          provenance=self.reference.provenance.value)
        operators = [OperatorDocument.model_validate(d) for d in self.operators.descriptors()]
        return ProblemDocument(dim=self.dim, operators=operators, reference=reference,
                               description=self.description)

    @classmethod
    def from_document(cls, document: ProblemDocument) -> 'Problem':
        operators = OperatorTuple(operator_from_descriptor(d, document.dim) for d in document.operators)
        if operators.dim != document.dim:
            raise ShapeError(f"operators act on R^{operators.dim} but the document declares dim {document.dim}")
        reference = None
        if isinstance(document.reference, ReferenceDocument):
            reference = Reference(np.array(document.reference.solution, dtype=float),
                                  Provenance(document.reference.provenance))
        elif document.reference is not None:
            reference = Reference(np.array(document.reference, dtype=float), Provenance.ORACLE)
        return cls(operators, reference, document.description)


def affine_consensus(points: Sequence) -> Problem:
    """F_i(x) = x - a_i; the unique zero is mean(a_i)"""
    a = np.array(points, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 2:
        raise ContractError("affine consensus needs at least two points of common dimension")
    identity = np.eye(a.shape[1])
    operators = OperatorTuple(affine_op(identity, -a_i) for a_i in a)
    return Problem(operators, Reference(a.mean(axis=0), Provenance.ANALYTIC),
                   f"affine consensus of {a.shape[0]} points in R^{a.shape[1]}")


def interval_feasibility(intervals: Sequence[Tuple]) -> Problem:
    """
    Normal cones of boxes [l_i, u_i]; zeros of the sum are the intersection.
    The reference is the midpoint of the intersection.

    Raises:
        ConstructionError: the intersection is empty
    """
    if len(intervals) < 2:
        raise ContractError("feasibility needs at least two sets")
    lowers = [np.atleast_1d(np.asarray(lo, dtype=float)) for lo, _ in intervals]
    uppers = [np.atleast_1d(np.asarray(hi, dtype=float)) for _, hi in intervals]
    dim = lowers[0].shape[0]
    operators = OperatorTuple(prox_op('box', dim, lower=lo, upper=hi) for lo, hi in zip(lowers, uppers))
    lower, upper = intersection_bounds(intervals)
    if np.any(lower > upper):
        raise ConstructionError(f"intervals have empty intersection [{lower.tolist()}, {upper.tolist()}]")
    return Problem(operators, Reference(0.5 * (lower + upper), Provenance.ORACLE),
                   f"feasibility of {len(intervals)} boxes; intersection [{lower.tolist()}, {upper.tolist()}]")


def intersection_bounds(intervals: Sequence[Tuple]) -> Tuple[np.ndarray, np.ndarray]:
    """Componentwise max of lower and min of upper bounds"""
    lower = np.max([np.atleast_1d(np.asarray(lo, dtype=float)) for lo, _ in intervals], axis=0)
    upper = np.min([np.atleast_1d(np.asarray(hi, dtype=float)) for _, hi in intervals], axis=0)
    return lower, upper


def _soft_threshold(value: float, lam: float) -> float:
    return float(np.sign(value) * max(abs(value) - lam, 0.0))


def lasso_objective(Q, b, lam: float, x) -> float:
    x = np.asarray(x, dtype=float)
    return 0.5 * float(x @ Q @ x) - float(b @ x) + lam * float(np.sum(np.abs(x)))


def lasso_optimality_gap(Q, b, lam: float, x) -> float:
    """
    Distance of 0 from Qx - b + lam * subdifferential(||x||_1), coordinatewise max.
    Zero exactly at the minimizers.
    """
    Q, b, x = as_matrix(Q, "Q"), np.asarray(b, dtype=float), np.asarray(x, dtype=float)
    g = Q @ x - b
    gaps = np.where(x != 0.0, np.abs(g + lam * np.sign(x)), np.maximum(np.abs(g) - lam, 0.0))
    return float(np.max(gaps, initial=0.0))


def _coordinate_descent(Q: np.ndarray, b: np.ndarray, lam: float) -> np.ndarray:
    x = np.zeros(b.shape[0])
    for sweep in range(LASSO_MAX_SWEEPS):
        largest_step = 0.0
        for j in range(x.shape[0]):
            if Q[j, j] == 0.0:
                # PSD forces the whole row to vanish; f is linear in x_j
                if abs(b[j]) > lam:
                    raise ConstructionError(f"lasso objective is unbounded below along coordinate {j}")
                new = 0.0
            else:
                r = b[j] - Q[j] @ x + Q[j, j] * x[j]
                new = _soft_threshold(r, lam) / Q[j, j]
            largest_step = max(largest_step, abs(new - x[j]))
            x[j] = new
        if largest_step == 0.0 or lasso_optimality_gap(Q, b, lam, x) <= LASSO_GAP_TOL:
            logger.debug("coordinate descent settled after %d sweeps", sweep + 1)
            return x
    logger.warning("coordinate descent stopped at the sweep limit with gap %.3e",
                   lasso_optimality_gap(Q, b, lam, x))
    return x


def _grid_refine(Q: np.ndarray, b: np.ndarray, lam: float, center: np.ndarray) -> np.ndarray:
    """Shrinking-grid search of the lasso objective around center (d <= 2)"""
    radius = max(1.0, float(np.max(np.abs(center))))
    offsets = np.linspace(-1.0, 1.0, GRID_POINTS)
    best = center.copy()
    for _ in range(GRID_LEVELS):
        candidates = [best + radius * np.array(step) for step in itertools.product(offsets, repeat=best.shape[0])]
        best = min(candidates, key=lambda x: lasso_objective(Q, b, lam, x))
        radius *= 0.5
    return best


def lasso_reference(Q, b, lam: float) -> np.ndarray:
    """Minimizer of 1/2 x'Qx - b'x + lam ||x||_1"""
    Q, b = as_matrix(Q, "Q"), np.asarray(b, dtype=float)
    x = _coordinate_descent(Q, b, lam)
    if x.shape[0] <= 2:
        grid = _grid_refine(Q, b, lam, x)
        if lasso_objective(Q, b, lam, grid) < lasso_objective(Q, b, lam, x) - 1e-12:
            logger.warning("grid check improved on coordinate descent; using the grid point")
            x = grid
    return x


def lasso_split(Q, b, lam: float) -> Problem:
    """F_1(x) = Qx - b and F_2 = subdifferential of lam ||x||_1"""
    Q = as_matrix(Q, "Q")
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if Q.shape != (b.shape[0], b.shape[0]):
        raise ShapeError(f"Q must be {b.shape[0]}x{b.shape[0]}, got {Q.shape}")
    if min_eigenvalue_symmetric(0.5 * (Q + Q.T)) < -1e-10:
        raise ConvexityError("Q is not positive semidefinite")
    if not lam > 0:
        raise ContractError("lasso weight must be positive")
    operators = OperatorTuple([affine_op(Q, -b), prox_op('l1', b.shape[0], lam=lam)])
    return Problem(operators, Reference(lasso_reference(Q, b, lam), Provenance.ORACLE),
                   f"lasso in R^{b.shape[0]} with lam={lam}")


def _solve_aggregate(K: np.ndarray, rhs: np.ndarray, label: str) -> np.ndarray:
    """Dense solve of K x = rhs; singular K raises instead of returning NaN"""
    if numerical_rank(K) < K.shape[0]:
        raise ConstructionError(f"{label} is singular")
    solution = solve(K, rhs)
    if not np.all(np.isfinite(solution)):
        raise ConstructionError(f"{label} is too ill-conditioned to solve")
    return solution


def quadratic_game(P: Sequence, C: Sequence, Q: Sequence, b: Optional[Sequence] = None) -> Problem:
    """
    Sum of quadratic convex-concave saddle terms. The reference solves
    [[sum P, sum C], [-sum C^T, sum Q]] x = -sum b densely; an all-zero
    game has every point as a solution and reference 0.
    """
    if not (len(P) == len(C) == len(Q)) or len(P) < 1:
        raise ContractError("need matching P, C, Q blocks for every player term")
    b = [None] * len(P) if b is None else list(b)
    operators = OperatorTuple(saddle_op(P_i, C_i, Q_i, b_i) for P_i, C_i, Q_i, b_i in zip(P, C, Q, b))
    K = sum(op.A for op in operators)
    rhs = -sum(op.b for op in operators)
    if not np.any(K) and not np.any(rhs):
        reference = np.zeros(operators.dim)
    else:
        reference = _solve_aggregate(K, rhs, "aggregate saddle system")
    return Problem(operators, Reference(reference, Provenance.ORACLE),
                   f"quadratic game with {len(operators)} terms in R^{operators.dim}")


def _random_psd(dim: int, rng: np.random.Generator, shift: float = 0.1) -> np.ndarray:
    G = rng.standard_normal((dim, dim))
    return G @ G.T / dim + shift * np.eye(dim)


def random_affine_tuple(n: int, dim: int, rng: np.random.Generator) -> Problem:
    """n strongly monotone affine maps (PSD + skew + shift); reference by dense solve"""
    operators = []
    for _ in range(n):
        H = rng.standard_normal((dim, dim))
        operators.append(affine_op(_random_psd(dim, rng) + 0.5 * (H - H.T), rng.standard_normal(dim)))
    F = OperatorTuple(operators)
    reference = _solve_aggregate(sum(op.A for op in F), -sum(op.b for op in F), "aggregate affine system")
    return Problem(F, Reference(reference, Provenance.ORACLE), f"random affine tuple n={n} dim={dim}")


def random_quadratic_game(n: int, du: int, dv: int, rng: np.random.Generator) -> Problem:
    P = [_random_psd(du, rng) for _ in range(n)]
    Q = [_random_psd(dv, rng) for _ in range(n)]
    C = [rng.standard_normal((du, dv)) for _ in range(n)]
    b = [rng.standard_normal(du + dv) for _ in range(n)]
    return quadratic_game(P, C, Q, b)


def _numbers(text: str, spec: str):
    try:
        return [float(token) for token in text.split(',') if token.strip()]
    except ValueError as exc:
        raise ContractError(f"problem {spec!r}: {exc}") from exc


def _counts(text: str, expected: int, spec: str):
    parts = text.split(',')
    if len(parts) != expected or not all(p.strip().isascii() and p.strip().isdigit() for p in parts):
        raise ContractError(f"problem {spec!r} needs {expected} comma-separated counts")
    return [int(p) for p in parts]


def parse_problem_spec(spec: str, seed: int = 0) -> Problem:
    """
    Build a problem from its CLI form:
    consensus:a1,a2,... | intervals:l1:u1,l2:u2,... | lasso:q,b,lam |
    game:<n>,<du>,<dv> | random:<n>,<dim> | path to a problem JSON file
    """
    kind, _, arg = spec.partition(':')
    kind = kind.strip().lower()
    if kind == 'consensus' and arg:
        return affine_consensus(_numbers(arg, spec))
    if kind == 'intervals' and arg:
        intervals = []
        for item in arg.split(','):
            bounds = _numbers(item.replace(':', ','), spec)
            if len(bounds) != 2:
                raise ContractError(f"interval {item!r} must read lower:upper")
            intervals.append((bounds[0], bounds[1]))
        return interval_feasibility(intervals)
    if kind == 'lasso' and arg:
        values = _numbers(arg, spec)
        if len(values) != 3:
            raise ContractError("lasso shorthand reads lasso:q,b,lam")
        return lasso_split([[values[0]]], [values[1]], values[2])
    if kind == 'game' and arg:
        n, du, dv = _counts(arg, 3, spec)
        return random_quadratic_game(n, du, dv, np.random.default_rng(seed))
    if kind == 'random' and arg:
        n, dim = _counts(arg, 2, spec)
        return random_affine_tuple(n, dim, np.random.default_rng(seed))
    path = Path(spec)
    if path.exists():
        return load_problem(path)
    raise ContractError(f"unknown problem {spec!r}; use consensus:, intervals:, lasso:, game:, random: or a JSON file")


def load_problem(source: Union[str, Path]) -> Problem:
    """Read a problem document from a path (or JSON text)"""
    path = Path(source) if not str(source).lstrip().startswith('{') else None
    text = path.read_text(encoding='utf-8') if path is not None else str(source)
    return Problem.from_document(parse_document(text, ProblemDocument))


def save_problem(problem: Problem, path: Optional[Union[str, Path]] = None) -> str:
    text = dump_document(problem.to_document())
    if path is not None:
        Path(path).write_text(text, encoding='utf-8')
    return text
