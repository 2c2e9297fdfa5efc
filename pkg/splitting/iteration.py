"""
Fixed-point engine for T(z) = z + gamma * M x, where x = J_F(S z + N x).

The x-pass is a forward substitution in index order: strict lower
triangularity of N means x_i only needs x_1..x_{i-1}. `iterate` runs the
z-form, `iterate_reduced` the v-form with v = S z.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import DEFAULT_MAX_ITERS, DEFAULT_TOL_CONSENSUS, DEFAULT_TOL_FP
from .errors import ContractError, EmbeddingError, ShapeError
from .numerics import BlockVector, as_blocks, consensus_residual, kron_apply, least_squares
from .operators import OperatorTuple, as_operator_tuple
from .scheme_core import SplittingScheme, defect, derive_S, in_range_of_S

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 1000
EMBED_TOL = 1e-9
CERTIFICATE_TOL = 1e-10

TRACE_COLUMNS = ["k", "fp_residual", "consensus_residual", "ref_error"]


class TraceStatus(Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max-iters"
    DIVERGED = "diverged"


@dataclass(frozen=True)
class StopRule:
    """Stop when both residuals are below tolerance, or after max_iters iterations"""
    tol_fp: float = DEFAULT_TOL_FP
    tol_consensus: float = DEFAULT_TOL_CONSENSUS
    max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self):
        if not (self.tol_fp > 0 and self.tol_consensus > 0):
            raise ContractError("stopping tolerances must be positive")
        if self.max_iters < 1:
            raise ContractError("max_iters must be at least 1")

    @classmethod
    def fixed(cls, rounds: int) -> 'StopRule':
        """Run `rounds` iterations unless the residuals vanish exactly"""
        tiny = float(np.finfo(float).tiny)
        return cls(tiny, tiny, rounds)

    def satisfied(self, fp_residual: float, consensus: float) -> bool:
        return fp_residual <= self.tol_fp and consensus <= self.tol_consensus


@dataclass
class IterationState:
    """Variables after the x-pass of iteration k"""
    k: int
    x: BlockVector
    fp_residual: float
    consensus_residual: float
    z: Optional[BlockVector] = None
    v: Optional[BlockVector] = None


@dataclass(frozen=True)
class TraceRecord:
    k: int
    fp_residual: float
    consensus_residual: float
    ref_error: Optional[float] = None


@dataclass
class Trace:
    """Per-iteration residual history and terminal status of a run"""
    records: List[TraceRecord] = field(default_factory=list)
    status: Optional[TraceStatus] = None
    final: Optional[IterationState] = None
    notes: List[str] = field(default_factory=list)
    x_history: List[BlockVector] = field(default_factory=list)
    z_history: List[BlockVector] = field(default_factory=list)
    v_history: List[BlockVector] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        if self.records and record.k <= self.records[-1].k:
            raise ContractError(f"trace records must increase in k ({record.k} after {self.records[-1].k})")
        self.records.append(record)

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.status is TraceStatus.CONVERGED

    def solution(self) -> Tuple[np.ndarray, float]:
        """Consensus point and residual of the final x"""
        if self.final is None:
            raise ContractError("trace has no final state")
        return recover_solution(self.final.x)

    def to_frame(self) -> pd.DataFrame:
        rows = [[r.k, r.fp_residual, r.consensus_residual,
                 np.nan if r.ref_error is None else r.ref_error] for r in self.records]
        frame = pd.DataFrame(rows, columns=TRACE_COLUMNS)
        frame['k'] = frame['k'].astype(int)
        return frame

    def comment_lines(self) -> List[str]:
        lines = [f"# {note}" for note in self.notes]
        status = self.status.value if self.status else "unknown"
        lines.append(f"# status={status}")
        return lines

    def to_csv(self, path: Optional[Union[str, Path]] = None) -> str:
        """
        Export as CSV with a trailing "# status=..." comment line.

        Args:
            path: Optional file to write

        Returns:
            The CSV text
        """
        return write_trace_csv(self.to_frame(), self.comment_lines(), path)


def write_trace_csv(frame: pd.DataFrame, comments: Sequence[str],
                    path: Optional[Union[str, Path]] = None) -> str:
    body = frame.to_csv(index=False, na_rep="", lineterminator="\n")
    text = body + "".join(line + "\n" for line in comments)
    if path is not None:
        Path(path).write_text(text, encoding='utf-8', newline="\n")
    return text


def _check_operands(scheme: SplittingScheme, F) -> OperatorTuple:
    F = as_operator_tuple(F)
    if len(F) != scheme.n:
        raise ShapeError(f"scheme has {scheme.n} operators but {len(F)} were given")
    return F


def forward_pass(N: np.ndarray, F: OperatorTuple, base: BlockVector) -> BlockVector:
    """
    x_i = J_{F_i}(base_i + sum_{j<i} N_ij x_j) for i = 1..n in order.
    """
    n = N.shape[0]
    x = np.empty_like(base)
    for i in range(n):
        argument = base[i] + N[i, :i] @ x[:i] if i else base[i].copy()
        x[i] = F[i].resolvent(argument)
    return x


def solve_x(scheme: SplittingScheme, F, z) -> BlockVector:
    """
    Resolve x = J_F(S z + N x) by forward substitution.

    Args:
        scheme: Coefficient matrices
        F: n operators of common dimension d
        z: (m, d) block vector

    Returns:
        (n, d) block vector x
    """
    F = _check_operands(scheme, F)
    z = as_blocks(z, scheme.m, F.dim, "z")
    return forward_pass(scheme.N, F, kron_apply(derive_S(scheme), z))


def apply_T(scheme: SplittingScheme, F, z) -> Tuple[BlockVector, BlockVector]:
    """T(z) = z + gamma M x; returns (T(z), x)"""
    x = solve_x(scheme, F, z)
    z = as_blocks(z, scheme.m, x.shape[1], "z")
    return z + scheme.gamma * kron_apply(scheme.M, x), x


def fp_residual(scheme: SplittingScheme, x: BlockVector) -> float:
    """||M x||, equal to ||T(z) - z|| / gamma"""
    return float(np.linalg.norm(kron_apply(scheme.M, x)))


def recover_solution(x: BlockVector) -> Tuple[np.ndarray, float]:
    """Blockwise mean of x and the max deviation of any block from it"""
    x = np.asarray(x, dtype=float)
    return x.mean(axis=0), consensus_residual(x)


def weighted_sum_residual(x: BlockVector, s: Sequence[float]) -> float:
    """||sum_i s_i x_i|| for weights summing to zero"""
    s = np.asarray(s, dtype=float)
    if s.shape != (x.shape[0],):
        raise ShapeError(f"need {x.shape[0]} weights, got {s.shape}")
    if abs(s.sum()) > 1e-12 * (1.0 + np.abs(s).sum()):
        raise ContractError("weights must sum to zero")
    return float(np.linalg.norm(s @ x))


def _require_gamma(scheme: SplittingScheme, notes: List[str]) -> None:
    notes.append(f"scheme={scheme.name}")
    if not scheme.gamma_conforming:
        if not scheme.allow_gamma:
            raise ContractError(f"gamma={scheme.gamma} outside (0, 1); pass allow_gamma to override")
        notes.append(f"gamma={scheme.gamma} non-conforming")
        logger.warning("iterating %s with non-conforming gamma=%s", scheme.name, scheme.gamma)


def _run(scheme: SplittingScheme, F: OperatorTuple, state0: BlockVector, form: str,
         stop: StopRule, reference: Optional[np.ndarray], keep_history: bool,
         callback: Optional[Callable[[IterationState], None]]) -> Trace:
    trace = Trace()
    _require_gamma(scheme, trace.notes)
    trace.notes.append(f"form={form}")
    gamma, M, N = scheme.gamma, scheme.M, scheme.N
    S = derive_S(scheme)
    step_matrix = gamma * scheme.gram_matrix() if form == 'v' else None
    ref = None if reference is None else np.asarray(reference, dtype=float)
    state = state0.copy()

    logger.info("iterating %s (%s-form): n=%d m=%d gamma=%g tol=(%g, %g) max_iters=%d",
                scheme.name, form, scheme.n, scheme.m, gamma, stop.tol_fp, stop.tol_consensus, stop.max_iters)
    status = TraceStatus.MAX_ITERS
    current: Optional[IterationState] = None
    for k in range(stop.max_iters):
        base = kron_apply(S, state) if form == 'z' else state
        with np.errstate(all='ignore'):
            x = forward_pass(N, F, base)
            Mx = kron_apply(M, x)
        fp = float(np.linalg.norm(Mx))
        cons = consensus_residual(x)
        ref_error = None
        if ref is not None:
            ref_error = float(np.linalg.norm(x.mean(axis=0) - ref))
        current = IterationState(k, x, fp, cons,
                                 z=state if form == 'z' else None,
                                 v=state if form == 'v' else None)
        trace.append(TraceRecord(k, fp, cons, ref_error))
        if keep_history:
            trace.x_history.append(x)
            (trace.z_history if form == 'z' else trace.v_history).append(state)
        if callback is not None:
            callback(current)

        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(state)) and np.isfinite(fp)):
            status = TraceStatus.DIVERGED
            logger.warning("%s diverged at iteration %d", scheme.name, k)
            break
        if stop.satisfied(fp, cons):
            status = TraceStatus.CONVERGED
            break
        if k and k % PROGRESS_EVERY == 0:
            logger.debug("k=%d fp_residual=%.3e consensus_residual=%.3e", k, fp, cons)

        if form == 'z':
            state = state + gamma * Mx
        else:
            state = state - kron_apply(step_matrix, x)

    trace.status = status
    trace.final = current
    logger.info("%s terminated: %s after %d iterations (fp=%.3e, consensus=%.3e)",
                scheme.name, status.value, trace.iterations, current.fp_residual, current.consensus_residual)
    return trace


def iterate(scheme: SplittingScheme, F, z0=None, stop: Optional[StopRule] = None,
            reference=None, keep_history: bool = False,
            callback: Optional[Callable[[IterationState], None]] = None) -> Trace:
    """
    Run z^{k+1} = T(z^k) from z0 (default 0).

    Args:
        scheme: Validated scheme; gamma must be in (0, 1) unless allow_gamma
        F: n operators
        z0: (m, d) starting point
        stop: Stopping rule
        reference: Known solution, recorded as ref_error per iteration
        keep_history: Store x and z of every iteration
        callback: Called with each IterationState

    Returns:
        Trace; divergence is a status, not an exception
    """
    F = _check_operands(scheme, F)
    z0 = np.zeros((scheme.m, F.dim)) if z0 is None else as_blocks(z0, scheme.m, F.dim, "z0")
    return _run(scheme, F, z0, 'z', stop or StopRule(), reference, keep_history, callback)


def iterate_reduced(scheme: SplittingScheme, F, v0=None, stop: Optional[StopRule] = None,
                    reference=None, keep_history: bool = False,
                    callback: Optional[Callable[[IterationState], None]] = None) -> Trace:
    """
    Run the v-form x^k = J_F(v^k + N x^k), v^{k+1} = v^k - gamma M^T M x^k.

    v0 must lie in the range of S; the default v0 = 0 always does.
    """
    F = _check_operands(scheme, F)
    if v0 is None:
        v0 = np.zeros((scheme.n, F.dim))
    else:
        v0 = as_blocks(v0, scheme.n, F.dim, "v0")
        if not in_range_of_S(scheme, v0):
            raise ContractError("v0 is not in the range of S")
    return _run(scheme, F, v0, 'v', stop or StopRule(), reference, keep_history, callback)


def embed_solution(scheme: SplittingScheme, F, x_star, v_star) -> BlockVector:
    """
    Lift a zero x* of sum F_i, with certificates v_i in F_i(x*) summing to 0,
    to a fixed point z of T (minimal-norm least squares of S z = y - N x).

    Raises:
        ContractError: certificates do not sum to zero
        EmbeddingError: certificates are inconsistent or z is not fixed
    """
    F = _check_operands(scheme, F)
    x_star = np.asarray(x_star, dtype=float).reshape(F.dim)
    v_star = as_blocks(v_star, scheme.n, F.dim, "v_star")
    if np.linalg.norm(v_star.sum(axis=0)) > CERTIFICATE_TOL * (1.0 + np.abs(v_star).sum()):
        raise ContractError("certificates v_i must sum to zero")
    for i, op in enumerate(F):
        if op.evaluable and np.linalg.norm(op.evaluate(x_star) - v_star[i]) > EMBED_TOL * (1.0 + np.linalg.norm(v_star[i])):
            raise EmbeddingError(f"v_{i + 1} is not F_{i + 1}(x*)")

    x = np.tile(x_star, (scheme.n, 1))
    y = v_star + x
    rhs = y - kron_apply(scheme.N, x)
    z, residual = least_squares(derive_S(scheme), rhs)
    if residual > EMBED_TOL * (1.0 + np.linalg.norm(rhs)):
        raise EmbeddingError(f"S z = y - N x has residual {residual:.3e}; x* is not a zero or certificates are wrong")
    z_next, _ = apply_T(scheme, F, z)
    if np.linalg.norm(z_next - z) > EMBED_TOL * (1.0 + np.linalg.norm(z)):
        raise EmbeddingError("embedded point is not fixed by T")
    return z


@dataclass(frozen=True)
class AveragedCheck:
    """Terms of the averagedness inequality lhs <= rhs"""
    lhs: float
    rhs: float
    defect_term: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def holds(self, tol: float = 1e-9) -> bool:
        return self.lhs <= self.rhs + tol


def check_averaged_inequality(scheme: SplittingScheme, F, z, z_bar) -> AveragedCheck:
    """
    ||Tz - Tz'||^2 + (1-g)/g ||(z - Tz) - (z' - Tz')||^2
        + g <x - x', (2I - M^T M - N - N^T)(x - x')>  <=  ||z - z'||^2
    """
    gamma = scheme.gamma
    Tz, x = apply_T(scheme, F, z)
    Tzb, xb = apply_T(scheme, F, z_bar)
    z = np.asarray(z, dtype=float).reshape(Tz.shape)
    z_bar = np.asarray(z_bar, dtype=float).reshape(Tz.shape)
    dx = x - xb
    defect_term = gamma * float(np.sum(dx * kron_apply(-defect(scheme), dx)))
    lhs = (float(np.sum((Tz - Tzb) ** 2))
           + (1.0 - gamma) / gamma * float(np.sum(((z - Tz) - (z_bar - Tzb)) ** 2))
           + defect_term)
    rhs = float(np.sum((z - z_bar) ** 2))
    return AveragedCheck(lhs, rhs, defect_term)


def distance_trace(trace: Trace, z_star: BlockVector) -> np.ndarray:
    """||z^k - z*|| along a run recorded with keep_history"""
    if not trace.z_history:
        raise ContractError("trace was recorded without z history")
    return np.array([np.linalg.norm(z - z_star) for z in trace.z_history])
