"""
Undirected simple graphs with adjacency, degree, Laplacian and oriented
incidence views. Integer matrices are materialized as float arrays; every
identity between them holds exactly since entries are small integers.
"""

import itertools
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import EdgeListParseError, GraphError
from .numerics import DenseMatrix

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Graph:
    """
    Simple undirected graph on vertices 0..vertex_count-1.
    Edges are stored as (u, v) with u < v in lexicographic order.
    """
    vertex_count: int
    edges: Tuple[Edge, ...] = ()

    def __post_init__(self):
        if self.vertex_count < 0:
            raise GraphError("vertex count must be nonnegative")
        normalized = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise GraphError(f"edge ({u}, {v}) has an endpoint outside 0..{self.vertex_count - 1}")
            normalized.append((min(u, v), max(u, v)))
        ordered = tuple(sorted(normalized))
        for first, second in zip(ordered, ordered[1:]):
            if first == second:
                raise GraphError(f"duplicate edge {first}")
        object.__setattr__(self, 'edges', ordered)
        object.__setattr__(self, '_edge_set', frozenset(ordered))
        adjacent = [[] for _ in range(self.vertex_count)]
        for u, v in ordered:
            adjacent[u].append(v)
            adjacent[v].append(u)
        object.__setattr__(self, '_neighbors', tuple(tuple(sorted(nbrs)) for nbrs in adjacent))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.vertex_count, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self, i: int) -> Tuple[int, ...]:
        """Neighbours of i in ascending order"""
        return self._neighbors[i]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_set


def adjacency(g: Graph) -> DenseMatrix:
    A = np.zeros((g.vertex_count, g.vertex_count))
    for u, v in g.edges:
        A[u, v] = A[v, u] = 1.0
    return A


def degree_matrix(g: Graph) -> DenseMatrix:
    return np.diag(g.degrees().astype(float))


def laplacian(g: Graph) -> DenseMatrix:
    """L = D - A"""
    return degree_matrix(g) - adjacency(g)


def oriented_incidence(g: Graph, flips: Optional[Sequence[bool]] = None) -> DenseMatrix:
    """
    Vertex-by-edge incidence matrix: -1 where the edge leaves, +1 where it enters.

    Args:
        g: Graph
        flips: Optional per-edge mask reversing the canonical u -> v orientation

    Returns:
        (vertex_count, edge_count) matrix with columns in edge order
    """
    if flips is not None and len(flips) != g.edge_count:
        raise GraphError(f"need {g.edge_count} orientation flags, got {len(flips)}")
    B = np.zeros((g.vertex_count, g.edge_count))
    for j, (u, v) in enumerate(g.edges):
        tail, head = (v, u) if flips is not None and flips[j] else (u, v)
        B[tail, j] = -1.0
        B[head, j] = 1.0
    return B


def is_regular(g: Graph) -> Optional[int]:
    """Common degree d, or None when degrees differ"""
    deg = g.degrees()
    if deg.size == 0:
        return None
    return int(deg[0]) if np.all(deg == deg[0]) else None


def component_count(g: Graph) -> int:
    if g.vertex_count == 0:
        return 0
    rows = [u for u, _ in g.edges]
    cols = [v for _, v in g.edges]
    graph = csr_matrix((np.ones(g.edge_count), (rows, cols)), shape=(g.vertex_count, g.vertex_count))
    count, _ = connected_components(graph, directed=False)
    return int(count)


def is_connected(g: Graph) -> bool:
    return component_count(g) == 1


def consensus_step_size(g: Graph) -> Fraction:
    """tau = n / |E| (equal to 2/d on a d-regular graph)"""
    if g.edge_count == 0:
        raise GraphError("tau is undefined for a graph without edges")
    return Fraction(g.vertex_count, g.edge_count)


def relabel(g: Graph, permutation: Sequence[int]) -> Graph:
    """Graph with vertex i renamed permutation[i]"""
    if sorted(permutation) != list(range(g.vertex_count)):
        raise GraphError("relabelling must be a permutation of the vertices")
    return Graph(g.vertex_count, tuple((permutation[u], permutation[v]) for u, v in g.edges))


def _is_count(token: str) -> bool:
    return token.isascii() and token.isdigit()


def load_edge_list(text: str) -> Graph:
    """
    Parse "u v" lines; blank lines and "#" comments are ignored and an
    optional "n <count>" header fixes the vertex count.

    Raises:
        EdgeListParseError: malformed line, self-loop or duplicate edge
    """
    header: Optional[int] = None
    edges: List[Edge] = []
    seen = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if fields[0] == 'n':
            if len(fields) != 2 or not _is_count(fields[1]):
                raise EdgeListParseError("header must read 'n <count>'", line_number)
            if header is not None or edges:
                raise EdgeListParseError("the 'n' header must come first and only once", line_number)
            header = int(fields[1])
            continue
        if len(fields) != 2 or not all(_is_count(f) for f in fields):
            raise EdgeListParseError(f"expected two nonnegative integers, got {line!r}", line_number)
        u, v = int(fields[0]), int(fields[1])
        if u == v:
            raise EdgeListParseError(f"self-loop at vertex {u}", line_number)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise EdgeListParseError(f"duplicate edge {key} (first on line {seen[key]})", line_number)
        seen[key] = line_number
        if header is not None and max(key) >= header:
            raise EdgeListParseError(f"vertex {max(key)} exceeds declared count {header}", line_number)
        edges.append(key)
    count = header if header is not None else (1 + max(max(e) for e in edges) if edges else 0)
    return Graph(count, tuple(edges))


def read_edge_list(path: Union[str, Path]) -> Graph:
    return load_edge_list(Path(path).read_text(encoding='ascii'))


def to_edge_list(g: Graph) -> str:
    lines = [f"n {g.vertex_count}"] + [f"{u} {v}" for u, v in g.edges]
    return "\n".join(lines) + "\n"


# Named generators (all regular except the path)

def complete_graph(n: int) -> Graph:
    return Graph(n, tuple(itertools.combinations(range(n), 2)))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphError("a simple cycle needs at least 3 vertices")
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def petersen_graph() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph(10, tuple(outer + spokes + inner))


def hypercube_graph(k: int = 3) -> Graph:
    n = 1 << k
    return Graph(n, tuple((i, i ^ (1 << b)) for i in range(n) for b in range(k) if i < i ^ (1 << b)))


def named_graph(token: str) -> Optional[Graph]:
    """Resolve k<n>, c<n>, p<n>, q<k> or petersen; None if the token is not a name"""
    token = token.strip().lower()
    if token == 'petersen':
        return petersen_graph()
    builders = {'k': complete_graph, 'c': cycle_graph, 'p': path_graph, 'q': hypercube_graph}
    if len(token) > 1 and token[0] in builders and _is_count(token[1:]):
        return builders[token[0]](int(token[1:]))
    return None


def resolve_graph(token: Union[str, Path]) -> Graph:
    """A named graph, or an edge-list file"""
    graph = named_graph(str(token))
    if graph is not None:
        return graph
    path = Path(token)
    if not path.exists():
        raise GraphError(f"no graph named or stored at {token!r}")
    return read_edge_list(path)
