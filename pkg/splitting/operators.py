"""
Maximal monotone operators exposed through exact resolvents J_F = (Id + F)^{-1}.

Affine and saddle operators solve (I + A) x = y - b with a cached LU
factorization; proximal operators use closed forms (soft threshold, weighted
average, clamp, projection).
"""

import logging
from enum import Enum
from typing import Any, Callable, Dict, Iterable, Iterator, List

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import (ConstructionError, ConvexityError, MonotonicityError, ShapeError,
                     UnsupportedOperatorError)
from .numerics import as_matrix, min_eigenvalue_symmetric

logger = logging.getLogger(__name__)

MONOTONE_TOL = 1e-10
AFFINE_SET_TOL = 1e-10


class OperatorKind(Enum):
    """Descriptor tags"""
    AFFINE = "affine"
    PROX = "prox"
    SADDLE = "saddle"
    ZERO = "zero"
    CUSTOM = "custom"


class ProxKind(Enum):
    """Functions with closed-form proximity operators"""
    L1 = "l1"
    SQUARED_DISTANCE = "squared_distance"
    BOX = "box"
    AFFINE_SET = "affine_set"


def _vector(value, dim: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(dim, float(arr))
    if arr.shape != (dim,):
        raise ShapeError(f"{name} must have length {dim}, got shape {arr.shape}")
    return arr


class MonotoneOperator:
    """
    Base class: a set-valued maximal monotone operator on R^dim, known only
    through its single-valued resolvent.
    """
    kind: OperatorKind = OperatorKind.CUSTOM

    def __init__(self, dim: int):
        if dim < 1:
            raise ShapeError("operator dimension must be positive")
        self.dim = int(dim)

    def resolvent(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_point(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != (self.dim,):
            raise ShapeError(f"expected a point in R^{self.dim}, got shape {y.shape}")
        return y

    @property
    def evaluable(self) -> bool:
        """Whether F is single-valued with a closed-form evaluation"""
        return False

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        raise UnsupportedOperatorError(f"{self.kind.value} operator cannot be evaluated pointwise")

    def scaled(self, alpha: float) -> 'MonotoneOperator':
        raise UnsupportedOperatorError(f"no scaling rule for {self.kind.value} operator")

    def descriptor(self) -> Dict[str, Any]:
        raise UnsupportedOperatorError(f"{self.kind.value} operator is not serializable")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return self.resolvent(y)


class AffineOperator(MonotoneOperator):
    """F(x) = A x + b with A + A^T positive semidefinite"""
    kind = OperatorKind.AFFINE

    def __init__(self, A, b=None):
        A = as_matrix(A, "A")
        if A.shape[0] != A.shape[1]:
            raise ShapeError(f"A must be square, got {A.shape}")
        super().__init__(A.shape[0])
        self.A = A
        self.b = np.zeros(self.dim) if b is None else _vector(b, self.dim, "b")
        if min_eigenvalue_symmetric(A + A.T) < -MONOTONE_TOL:
            raise MonotonicityError("A + A^T is not positive semidefinite; x -> Ax + b is not monotone")
        # monotone A keeps I + A nonsingular
        self._lu = lu_factor(np.eye(self.dim) + A)

    def resolvent(self, y):
        y = self._check_point(y)
        return lu_solve(self._lu, y - self.b, check_finite=False)

    @property
    def evaluable(self) -> bool:
        return True

    def evaluate(self, x):
        x = self._check_point(x)
        return self.A @ x + self.b

    def scaled(self, alpha: float) -> 'AffineOperator':
        _check_scale(alpha)
        return AffineOperator(alpha * self.A, alpha * self.b)

    def descriptor(self) -> Dict[str, Any]:
        return {'affine': {'A': self.A.tolist(), 'b': self.b.tolist()}}


class ZeroOperator(AffineOperator):
    """F = 0; the resolvent is the identity"""
    kind = OperatorKind.ZERO

    def __init__(self, dim: int):
        super().__init__(np.zeros((dim, dim)))

    def resolvent(self, y):
        return self._check_point(y).copy()

    def scaled(self, alpha: float) -> 'ZeroOperator':
        _check_scale(alpha)
        return self


class SaddleOperator(AffineOperator):
    """
    Monotone operator of phi(u, v) = 1/2 u'Pu + u'Cv - 1/2 v'Qv (+ linear terms):
    (grad_u phi; -grad_v phi) = [[P, C], [-C^T, Q]] (u; v) + b.
    """
    kind = OperatorKind.SADDLE

    def __init__(self, P, C, Q, b=None):
        P, C, Q = as_matrix(P, "P"), as_matrix(C, "C"), as_matrix(Q, "Q")
        du, dv = P.shape[0], Q.shape[0]
        if P.shape != (du, du) or Q.shape != (dv, dv) or C.shape != (du, dv):
            raise ShapeError(f"saddle blocks do not conform: P {P.shape}, C {C.shape}, Q {Q.shape}")
        for label, block in (('P', P), ('Q', Q)):
            if min_eigenvalue_symmetric(0.5 * (block + block.T)) < -MONOTONE_TOL:
                raise ConvexityError(f"{label} is not positive semidefinite")
        self.P, self.C, self.Q = P, C, Q
        self.split = du
        K = np.block([[P, C], [-C.T, Q]])
        super().__init__(K, b)

    def scaled(self, alpha: float) -> 'SaddleOperator':
        _check_scale(alpha)
        return SaddleOperator(alpha * self.P, alpha * self.C, alpha * self.Q, alpha * self.b)

    def descriptor(self) -> Dict[str, Any]:
        return {'saddle': {'P': self.P.tolist(), 'C': self.C.tolist(), 'Q': self.Q.tolist(),
                           'b': self.b.tolist()}}


class ProxOperator(MonotoneOperator):
    """
    Subdifferential of a convex function with a closed-form prox.

    Params by kind:
        l1:               lam (weight of the l1 norm)
        squared_distance: point, weight (f = weight/2 ||x - point||^2)
        box:              lower, upper (indicator of the box)
        affine_set:       C, d (indicator of {x : Cx = d})
    """
    kind = OperatorKind.PROX

    def __init__(self, prox_kind, dim: int, **params):
        super().__init__(dim)
        self.prox_kind = ProxKind(prox_kind)
        self.params: Dict[str, Any] = {}
        if self.prox_kind is ProxKind.L1:
            lam = float(params.get('lam', 1.0))
            if not lam >= 0:
                raise ConstructionError("l1 weight must be nonnegative")
            self.params['lam'] = lam
        elif self.prox_kind is ProxKind.SQUARED_DISTANCE:
            weight = float(params.get('weight', 1.0))
            if not weight > 0:
                raise ConstructionError("squared distance weight must be positive")
            self.params['point'] = _vector(params.get('point', 0.0), dim, "point")
            self.params['weight'] = weight
        elif self.prox_kind is ProxKind.BOX:
            lower = _vector(params['lower'], dim, "lower") if 'lower' in params else np.full(dim, -np.inf)
            upper = _vector(params['upper'], dim, "upper") if 'upper' in params else np.full(dim, np.inf)
            if np.any(lower > upper):
                raise ConstructionError("box bounds must satisfy lower <= upper")
            self.params['lower'], self.params['upper'] = lower, upper
        else:
            C = as_matrix(params.get('C'), "C") if params.get('C') is not None else None
            if C is None or C.shape[1] != dim:
                raise ConstructionError(f"affine set needs a matrix C with {dim} columns")
            d = _vector(params.get('d', 0.0), C.shape[0], "d")
            pinv = np.linalg.pinv(C)
            if np.linalg.norm(C @ (pinv @ d) - d) > AFFINE_SET_TOL * (1.0 + np.linalg.norm(d)):
                raise ConstructionError("affine set {x : Cx = d} is empty")
            self.params['C'], self.params['d'] = C, d
            self._pinv = pinv

    def resolvent(self, y):
        y = self._check_point(y)
        kind, p = self.prox_kind, self.params
        if kind is ProxKind.L1:
            return np.sign(y) * np.maximum(np.abs(y) - p['lam'], 0.0)
        if kind is ProxKind.SQUARED_DISTANCE:
            w = p['weight']
            return (y + w * p['point']) / (1.0 + w)
        if kind is ProxKind.BOX:
            return np.clip(y, p['lower'], p['upper'])
        return y - self._pinv @ (p['C'] @ y - p['d'])

    @property
    def evaluable(self) -> bool:
        return self.prox_kind is ProxKind.SQUARED_DISTANCE

    def evaluate(self, x):
        if not self.evaluable:
            return super().evaluate(x)
        x = self._check_point(x)
        return self.params['weight'] * (x - self.params['point'])

    def function_value(self, x) -> float:
        """f(x), +inf outside the domain of an indicator"""
        x = self._check_point(x)
        kind, p = self.prox_kind, self.params
        if kind is ProxKind.L1:
            return p['lam'] * float(np.sum(np.abs(x)))
        if kind is ProxKind.SQUARED_DISTANCE:
            return 0.5 * p['weight'] * float(np.sum((x - p['point']) ** 2))
        if kind is ProxKind.BOX:
            inside = np.all(x >= p['lower']) and np.all(x <= p['upper'])
            return 0.0 if inside else np.inf
        return 0.0 if np.linalg.norm(p['C'] @ x - p['d']) <= AFFINE_SET_TOL else np.inf

    def scaled(self, alpha: float) -> 'ProxOperator':
        _check_scale(alpha)
        kind, p = self.prox_kind, self.params
        if kind is ProxKind.L1:
            return ProxOperator(kind, self.dim, lam=alpha * p['lam'])
        if kind is ProxKind.SQUARED_DISTANCE:
            return ProxOperator(kind, self.dim, point=p['point'], weight=alpha * p['weight'])
        # indicators are invariant under positive scaling
        return self

    def descriptor(self) -> Dict[str, Any]:
        params: Dict[str, Any] = {'dim': self.dim}
        for key, value in self.params.items():
            if isinstance(value, np.ndarray):
                # json has no infinity; unbounded box sides are omitted
                if key in ('lower', 'upper') and not np.all(np.isfinite(value)):
                    if np.all(np.isinf(value)):
                        continue
                    raise UnsupportedOperatorError("partially unbounded boxes are not serializable")
                params[key] = value.tolist()
            else:
                params[key] = value
        return {'prox': {'kind': self.prox_kind.value, 'params': params}}


class CustomOperator(MonotoneOperator):
    """Operator given by a user-supplied resolvent map"""
    kind = OperatorKind.CUSTOM

    def __init__(self, dim: int, resolvent: Callable[[np.ndarray], np.ndarray], name: str = "custom"):
        super().__init__(dim)
        self._resolvent = resolvent
        self.name = name

    def resolvent(self, y):
        y = self._check_point(y)
        return np.asarray(self._resolvent(y), dtype=float)


def _check_scale(alpha: float) -> None:
    if not np.isfinite(alpha) or alpha <= 0:
        raise ConstructionError(f"scale factor must be positive, got {alpha}")


def affine_op(A, b=None) -> AffineOperator:
    """F(x) = A x + b"""
    return AffineOperator(A, b)


def zero_op(dim: int) -> ZeroOperator:
    return ZeroOperator(dim)


def prox_op(kind, dim: int = 1, **params) -> ProxOperator:
    """Proximal resolvent of l1 / squared_distance / box / affine_set"""
    try:
        return ProxOperator(kind, dim, **params)
    except ValueError as exc:
        if isinstance(exc, (ConstructionError, ShapeError)):
            raise
        raise ConstructionError(str(exc)) from exc


def saddle_op(P, C, Q, b=None) -> SaddleOperator:
    return SaddleOperator(P, C, Q, b)


def scale_op(F: MonotoneOperator, alpha: float) -> MonotoneOperator:
    """Operator alpha*F (prox of alpha*f for proximal operators)"""
    return F.scaled(alpha)


def custom_op(dim: int, resolvent: Callable[[np.ndarray], np.ndarray], name: str = "custom") -> CustomOperator:
    return CustomOperator(dim, resolvent, name)


def operator_from_descriptor(descriptor, dim: int = 1) -> MonotoneOperator:
    """
    Rebuild an operator from a validated OperatorDocument. Prox descriptors
    without a "dim" param act on R^dim.
    """
    which = descriptor.which()
    logger.debug("rebuilding %s operator from its descriptor", which)
    if which == 'affine':
        return affine_op(descriptor.affine.A, descriptor.affine.b)
    if which == 'saddle':
        s = descriptor.saddle
        return saddle_op(s.P, s.C, s.Q, s.b)
    params = dict(descriptor.prox.params)
    dim = int(params.pop('dim', dim))
    return prox_op(descriptor.prox.kind, dim, **params)


class OperatorTuple:
    """Ordered operators F_1..F_n sharing one dimension"""

    def __init__(self, operators: Iterable[MonotoneOperator]):
        self.operators: List[MonotoneOperator] = list(operators)
        if not self.operators:
            raise ConstructionError("an operator tuple needs at least one operator")
        dims = {op.dim for op in self.operators}
        if len(dims) != 1:
            raise ShapeError(f"operators have differing dimensions {sorted(dims)}")
        self.dim = dims.pop()

    def __len__(self) -> int:
        return len(self.operators)

    def __iter__(self) -> Iterator[MonotoneOperator]:
        return iter(self.operators)

    def __getitem__(self, index: int) -> MonotoneOperator:
        return self.operators[index]

    @property
    def evaluable(self) -> bool:
        return all(op.evaluable for op in self.operators)

    def evaluate_sum(self, x) -> np.ndarray:
        """sum_i F_i(x) for single-valued operators"""
        x = np.asarray(x, dtype=float)
        return np.sum([op.evaluate(x) for op in self.operators], axis=0)

    def descriptors(self) -> List[Dict[str, Any]]:
        return [op.descriptor() for op in self.operators]


def as_operator_tuple(F) -> OperatorTuple:
    return F if isinstance(F, OperatorTuple) else OperatorTuple(F)


def firm_nonexpansiveness_gap(op: MonotoneOperator, rng: np.random.Generator,
                              samples: int = 100, scale: float = 3.0) -> float:
    """
    Smallest value of <J(y)-J(y'), y-y'> - ||J(y)-J(y')||^2 over random pairs.
    Nonnegative (up to rounding) for every resolvent of a monotone operator.
    """
    worst = np.inf
    for _ in range(samples):
        y = scale * rng.standard_normal(op.dim)
        y_bar = scale * rng.standard_normal(op.dim)
        d = op.resolvent(y) - op.resolvent(y_bar)
        worst = min(worst, float(d @ (y - y_bar) - d @ d))
    return worst
