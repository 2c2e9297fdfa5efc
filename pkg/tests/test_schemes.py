import json

import numpy as np
import pytest

from splitting.errors import ConnectivityError, ContractError, RegularityError
from splitting.graph import (complete_graph, cycle_graph, hypercube_graph, laplacian, oriented_incidence,
                             path_graph, petersen_graph)
from splitting.scheme_core import defect, save_scheme, validate
from splitting.schemes import (douglas_rachford, extended_ryu, minimal_lifting, regular_graph_scheme,
                               resolve_scheme, ryu3)


def test_douglas_rachford_matrices():
    scheme = douglas_rachford()
    assert (scheme.n, scheme.m) == (2, 1)
    assert scheme.N.sum() == 2.0
    assert validate(scheme).valid


def test_ryu3_kernel():
    scheme = ryu3()
    assert np.array_equal(scheme.M @ np.ones(3), np.zeros(2))
    assert validate(scheme).rank == 2


@pytest.mark.parametrize("n", range(3, 9))
def test_minimal_lifting_defect_pattern(n):
    e = np.zeros(n)
    e[0], e[-1] = 1.0, -1.0
    assert np.array_equal(defect(minimal_lifting(n)), -np.outer(e, e))


def test_minimal_lifting_two_is_douglas_rachford():
    assert minimal_lifting(2).same_matrices(douglas_rachford())


@pytest.mark.parametrize("n", range(2, 11))
def test_minimal_lifting_row_sum(n):
    assert minimal_lifting(n).N.sum() == n


def test_extended_ryu_three_is_ryu3():
    assert extended_ryu(3).same_matrices(ryu3(), tol=1e-15)


def test_extended_ryu_two_has_zero_defect():
    np.testing.assert_allclose(defect(extended_ryu(2)), np.zeros((2, 2)), atol=1e-15)


@pytest.mark.parametrize("n", [4, 6, 9])
def test_extended_ryu_defect(n):
    scale = 2.0 / (n - 1)
    expected = scale * (np.ones((n, n)) + (1 - n) * np.eye(n))
    expected[-1, :] = 0.0
    expected[:, -1] = 0.0
    np.testing.assert_allclose(defect(extended_ryu(n)), expected, atol=1e-14)


def test_k3_scheme():
    scheme = regular_graph_scheme(complete_graph(3))
    assert np.array_equal(scheme.N, [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    assert not np.any(defect(scheme))


def test_c4_scheme():
    scheme = regular_graph_scheme(cycle_graph(4))
    assert scheme.m == 4
    assert scheme.N.sum() == 4.0


def test_path_is_not_regular():
    with pytest.raises(RegularityError) as excinfo:
        regular_graph_scheme(path_graph(3))
    assert excinfo.value.vertices == (0, 1)
    assert excinfo.value.degrees == (1, 2)


def test_disconnected_graph_rejected(two_edges):
    with pytest.raises(ConnectivityError):
        regular_graph_scheme(two_edges)


def test_regular_graph_defect_is_exactly_zero(regular_graph):
    scheme = regular_graph_scheme(regular_graph)
    assert not np.any(defect(scheme))
    assert validate(scheme).valid


def test_orientation_invariance(regular_graph):
    d = int(regular_graph.degrees()[0])
    target = (2.0 / d) * laplacian(regular_graph)
    flips = [j % 2 == 0 for j in range(regular_graph.edge_count)]
    for mask in (None, flips):
        scheme = regular_graph_scheme(regular_graph, flips=mask)
        np.testing.assert_allclose(scheme.M.T @ scheme.M, target, rtol=0, atol=1e-14)
    assert not np.array_equal(oriented_incidence(regular_graph), oriented_incidence(regular_graph, flips))


@pytest.mark.parametrize("build", [
    lambda n: douglas_rachford(),
    lambda n: ryu3(),
    minimal_lifting,
    extended_ryu,
    lambda n: regular_graph_scheme(cycle_graph(n)),
    lambda n: regular_graph_scheme(complete_graph(n)),
])
def test_builders_valid_up_to_fifty(build):
    for n in (3, 7, 20, 50):
        report = validate(build(n))
        assert report.valid, report.failures()
        assert report.defect_max_eigenvalue <= 1e-9


def test_hypercube_and_petersen_schemes():
    for graph in (hypercube_graph(3), petersen_graph()):
        assert validate(regular_graph_scheme(graph)).valid


def test_resolve_scheme_builtins():
    assert resolve_scheme("dr").name == "dr"
    assert resolve_scheme("ryu3").n == 3
    assert resolve_scheme("minimal:5").n == 5
    assert resolve_scheme("ryu:6", gamma=0.25).gamma == 0.25
    assert resolve_scheme("graph:petersen").m == 15
    with pytest.raises(ContractError):
        resolve_scheme("minimal")
    with pytest.raises(ContractError):
        resolve_scheme("banana")


def test_resolve_scheme_file_keeps_gamma(tmp_path):
    path = tmp_path / "dr.json"
    path.write_text(save_scheme(douglas_rachford(0.3)))
    assert resolve_scheme(f"file:{path}").gamma == 0.3
    assert resolve_scheme(f"file:{path}", gamma=0.7).gamma == 0.7
    assert json.loads(path.read_text())["n"] == 2
