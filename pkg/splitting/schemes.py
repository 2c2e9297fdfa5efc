"""
Builders for the known frugal resolvent splittings:
Douglas-Rachford, Ryu (n = 3), minimal lifting, extended Ryu (n >= 2) and the
d-regular network scheme. Every builder output passes validate().
"""

import logging
import math
from pathlib import Path
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .config import DEFAULT_GAMMA
from .errors import ConnectivityError, ContractError, GraphError, RegularityError
from .graph import Graph, adjacency, is_connected, laplacian, oriented_incidence, resolve_graph
from .scheme_core import SplittingScheme, load_scheme

logger = logging.getLogger(__name__)


def douglas_rachford(gamma: float = DEFAULT_GAMMA, allow_gamma: bool = False) -> SplittingScheme:
    """n = 2, m = 1: M = [-1 1], N = [[0 0], [2 0]]"""
    M = np.array([[-1.0, 1.0]])
    N = np.array([[0.0, 0.0], [2.0, 0.0]])
    return SplittingScheme(M, N, gamma, name="dr", allow_gamma=allow_gamma)


def ryu3(gamma: float = DEFAULT_GAMMA, allow_gamma: bool = False) -> SplittingScheme:
    """Ryu splitting for three operators (n = 3, m = 2)"""
    M = np.array([[-1.0, 0.0, 1.0],
                  [0.0, -1.0, 1.0]])
    N = np.array([[0.0, 0.0, 0.0],
                  [1.0, 0.0, 0.0],
                  [1.0, 1.0, 0.0]])
    return SplittingScheme(M, N, gamma, name="ryu3", allow_gamma=allow_gamma)


def _require_operators(n: int, least: int = 2) -> None:
    if n < least:
        raise ContractError(f"need at least {least} operators, got {n}")


def minimal_lifting(n: int, gamma: float = DEFAULT_GAMMA, allow_gamma: bool = False) -> SplittingScheme:
    """
    Minimal lifting (m = n - 1): M bidiagonal with rows (-1, 1); N has ones
    on the subdiagonal for rows 2..n-1 and ones at columns 1 and n-1 of row n.
    """
    _require_operators(n)
    M = np.zeros((n - 1, n))
    for i in range(n - 1):
        M[i, i], M[i, i + 1] = -1.0, 1.0
    N = np.zeros((n, n))
    for i in range(1, n - 1):
        N[i, i - 1] = 1.0
    N[n - 1, 0] += 1.0
    N[n - 1, n - 2] += 1.0
    return SplittingScheme(M, N, gamma, name=f"minimal:{n}", allow_gamma=allow_gamma)


def extended_ryu(n: int, gamma: float = DEFAULT_GAMMA, allow_gamma: bool = False) -> SplittingScheme:
    """
    Ryu splitting extended to n >= 2 operators: M = c [-I | 1] with
    c = sqrt(2/(n-1)) and N = 2/(n-1) times the strictly lower all-ones matrix.
    Coincides with ryu3 when n = 3.
    """
    _require_operators(n)
    c = math.sqrt(2.0 / (n - 1))
    M = np.zeros((n - 1, n))
    for i in range(n - 1):
        M[i, i], M[i, n - 1] = -c, c
    N = (2.0 / (n - 1)) * np.tril(np.ones((n, n)), k=-1)
    return SplittingScheme(M, N, gamma, name=f"ryu:{n}", allow_gamma=allow_gamma)


def regular_graph_scheme(graph: Graph, gamma: float = DEFAULT_GAMMA, allow_gamma: bool = False,
                         flips: Optional[Sequence[bool]] = None) -> SplittingScheme:
    """
    Scheme of a connected d-regular graph: M = sqrt(2/d) B^T (n = |V|, m = |E|)
    and N = (2/d) times the strict lower triangle of the adjacency matrix.

    The exact Gram matrix (2/d) L is attached so that the defect is exactly zero.

    Raises:
        ConnectivityError: graph is disconnected
        RegularityError: two vertices have different degrees
    """
    if graph.vertex_count < 2:
        raise GraphError("the network needs at least two vertices")
    degrees = graph.degrees()
    for v in range(1, graph.vertex_count):
        if degrees[v] != degrees[0]:
            raise RegularityError((0, v), (int(degrees[0]), int(degrees[v])))
    if not is_connected(graph):
        raise ConnectivityError("graph is not connected; ker M would exceed span{e}")
    d = int(degrees[0])
    M = math.sqrt(2.0 / d) * oriented_incidence(graph, flips).T
    N = (2.0 * np.tril(adjacency(graph), k=-1)) / d
    gram = (2.0 * laplacian(graph)) / d
    logger.debug("regular graph scheme: n=%d, m=%d, d=%d", graph.vertex_count, graph.edge_count, d)
    return SplittingScheme(M, N, gamma, name=f"graph:{d}-regular:{graph.vertex_count}",
                           allow_gamma=allow_gamma, gram=gram)


BUILTIN_SCHEMES: Dict[str, Callable[..., SplittingScheme]] = {
    'dr': douglas_rachford,
    'ryu3': ryu3,
    'minimal': minimal_lifting,
    'ryu': extended_ryu,
}


def resolve_scheme(spec: str, gamma: Optional[float] = None, allow_gamma: bool = False) -> SplittingScheme:
    """
    Build a scheme from its identifier:
    dr | ryu3 | minimal:<n> | ryu:<n> | graph:<name-or-path> | file:<path>

    A file scheme keeps its own gamma unless one is given.
    """
    if spec.strip().lower().startswith('file:'):
        scheme = load_scheme(Path(spec.strip()[5:]).read_text(encoding='utf-8'))
        return scheme.with_gamma(scheme.gamma if gamma is None else gamma, allow_gamma)
    gamma = DEFAULT_GAMMA if gamma is None else gamma
    kind, _, arg = spec.strip().partition(':')
    kind = kind.lower()
    if kind in ('dr', 'ryu3') and not arg:
        return BUILTIN_SCHEMES[kind](gamma, allow_gamma)
    if kind in ('minimal', 'ryu'):
        if not (arg.isascii() and arg.isdigit()):
            raise ContractError(f"scheme {spec!r} needs an operator count, e.g. {kind}:4")
        return BUILTIN_SCHEMES[kind](int(arg), gamma, allow_gamma)
    if kind == 'graph' and arg:
        return regular_graph_scheme(resolve_graph(arg), gamma, allow_gamma)
    raise ContractError(f"unknown scheme {spec!r}; use dr, ryu3, minimal:<n>, ryu:<n>, graph:<path>, file:<path>")
