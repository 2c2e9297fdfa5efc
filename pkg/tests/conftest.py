import sys
from pathlib import Path

import numpy as np
import pytest

# Add repository root to path
sys.path.insert(0, str(Path(__file__).parent.parent.absolute()))

from splitting.graph import Graph, complete_graph, cycle_graph, hypercube_graph, path_graph, petersen_graph
from splitting.operators import affine_op


@pytest.fixture
def rng():
    return np.random.default_rng(20240117)


@pytest.fixture
def k3():
    return complete_graph(3)


@pytest.fixture
def c4():
    return cycle_graph(4)


@pytest.fixture
def petersen():
    return petersen_graph()


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def two_edges():
    return Graph(4, ((0, 1), (2, 3)))


REGULAR_GRAPHS = {
    'k3': lambda: complete_graph(3),
    'c4': lambda: cycle_graph(4),
    'c6': lambda: cycle_graph(6),
    'petersen': petersen_graph,
    'q3': lambda: hypercube_graph(3),
}


@pytest.fixture(params=sorted(REGULAR_GRAPHS))
def regular_graph(request):
    return REGULAR_GRAPHS[request.param]()


def random_monotone_affine(n, dim, rng):
    """n monotone (not necessarily strongly) affine operators"""
    ops = []
    for _ in range(n):
        G = rng.standard_normal((dim, dim))
        H = rng.standard_normal((dim, dim))
        ops.append(affine_op(G @ G.T / dim + (H - H.T), rng.standard_normal(dim)))
    return ops


def consensus_ops(points):
    a = np.array(points, dtype=float).reshape(len(points), -1)
    return [affine_op(np.eye(a.shape[1]), -a_i) for a_i in a]
