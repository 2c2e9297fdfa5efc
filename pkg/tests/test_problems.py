import json

import numpy as np
import pytest

from splitting.errors import ConstructionError, ContractError, ConvexityError, UnsupportedOperatorError
from splitting.iteration import StopRule, embed_solution, apply_T, iterate
from splitting.problems import (Problem, Provenance, affine_consensus, interval_feasibility,
                                lasso_optimality_gap, lasso_reference, lasso_split, load_problem,
                                parse_problem_spec, quadratic_game, random_affine_tuple,
                                random_quadratic_game, save_problem)
from splitting.schemes import douglas_rachford, extended_ryu, minimal_lifting, regular_graph_scheme, ryu3
from splitting.graph import complete_graph


def test_affine_consensus_reference():
    assert affine_consensus([0.0, 2.0]).reference.solution[0] == 1.0
    problem = affine_consensus([1, 2, 3, 4, 5])
    assert problem.reference.solution[0] == 3.0
    assert problem.reference.provenance is Provenance.ANALYTIC
    assert problem.residual(problem.reference.solution) <= 1e-10


def test_affine_consensus_vectors(rng):
    a = rng.standard_normal((4, 3))
    problem = affine_consensus(a)
    assert problem.dim == 3
    np.testing.assert_allclose(problem.reference.solution, a.mean(axis=0))
    with pytest.raises(ContractError):
        affine_consensus([1.0])


def test_interval_feasibility():
    problem = interval_feasibility([(0.0, 2.0), (1.0, 3.0), (1.5, 2.5)])
    assert problem.reference.solution[0] == pytest.approx(1.75)
    assert problem.contains([1.5]) and problem.contains([2.0])
    assert not problem.contains([2.2])


def test_identical_intervals():
    problem = interval_feasibility([(1.0, 4.0), (1.0, 4.0)])
    assert problem.reference.solution[0] == 2.5
    assert problem.contains([1.0]) and problem.contains([4.0])


def test_empty_intersection():
    with pytest.raises(ConstructionError):
        interval_feasibility([(0.0, 1.0), (2.0, 3.0)])


def test_contains_needs_indicators():
    with pytest.raises(ContractError):
        affine_consensus([0.0, 1.0]).contains([0.5])


def test_residual_needs_single_valued_operators():
    with pytest.raises(UnsupportedOperatorError):
        interval_feasibility([(0.0, 1.0), (0.5, 2.0)]).residual([0.7])


def test_lasso_one_dimensional():
    problem = lasso_split([[1.0]], [3.0], 1.0)
    assert problem.reference.solution[0] == pytest.approx(2.0)
    assert problem.reference.provenance is Provenance.ORACLE


def test_lasso_large_weight_gives_zero():
    problem = lasso_split(np.eye(2), [0.5, -0.8], 1.0)
    np.testing.assert_array_equal(problem.reference.solution, [0.0, 0.0])


def test_lasso_small_weight_approaches_unregularized():
    x = lasso_reference([[2.0]], [4.0], 1e-9)
    assert x[0] == pytest.approx(2.0, abs=1e-8)


def test_lasso_certified_in_higher_dimension(rng):
    G = rng.standard_normal((5, 5))
    Q = G @ G.T + 0.5 * np.eye(5)
    b = rng.standard_normal(5)
    x = lasso_reference(Q, b, 0.3)
    assert lasso_optimality_gap(Q, b, 0.3, x) <= 1e-9


def test_lasso_grid_check_agrees_in_two_dimensions():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = np.array([1.0, -2.0])
    x = lasso_reference(Q, b, 0.4)
    assert lasso_optimality_gap(Q, b, 0.4, x) <= 1e-8


def test_lasso_preconditions():
    with pytest.raises(ConvexityError):
        lasso_split([[-1.0]], [1.0], 1.0)
    with pytest.raises(ContractError):
        lasso_split([[1.0]], [1.0], 0.0)


def test_lasso_converges_under_douglas_rachford():
    problem = lasso_split([[1.0]], [3.0], 1.0)
    trace = iterate(douglas_rachford(), problem.operators, stop=StopRule(1e-10, 1e-10))
    point, _ = trace.solution()
    assert point[0] == pytest.approx(2.0, abs=1e-6)


def test_quadratic_game_single_term():
    problem = quadratic_game([np.eye(1)], [np.zeros((1, 1))], [np.eye(1)], [np.array([-1.0, 0.0])])
    np.testing.assert_allclose(problem.reference.solution, [1.0, 0.0])


def test_quadratic_game_all_zero():
    zero = np.zeros((1, 1))
    problem = quadratic_game([zero] * 2, [zero] * 2, [zero] * 2)
    np.testing.assert_array_equal(problem.reference.solution, [0.0, 0.0])


def test_quadratic_game_singular():
    zero = np.zeros((1, 1))
    with pytest.raises(ConstructionError):
        quadratic_game([np.eye(1)], [zero], [zero])


def test_quadratic_game_singular_with_linear_terms():
    zero = np.zeros((1, 1))
    with pytest.raises(ConstructionError, match="singular"):
        quadratic_game([np.eye(1)], [zero], [zero], [np.array([1.0, 1.0])])


def test_random_game_reference_is_a_zero(rng):
    problem = random_quadratic_game(3, 2, 2, rng)
    assert problem.dim == 4
    assert problem.residual(problem.reference.solution) <= 1e-10


def test_random_affine_tuple_reference(rng):
    problem = random_affine_tuple(4, 3, rng)
    assert problem.residual(problem.reference.solution) <= 1e-9


@pytest.mark.parametrize("n", [2, 3, 5, 10])
def test_consensus_converges_under_every_scheme(n):
    a = [float(i * i) for i in range(n)]
    problem = affine_consensus(a)
    schemes = [minimal_lifting(n), extended_ryu(n)]
    if n == 2:
        schemes.append(douglas_rachford())
    if n == 3:
        schemes.append(ryu3())
    if n >= 3:
        schemes.append(regular_graph_scheme(complete_graph(n)))
    for scheme in schemes:
        trace = iterate(scheme, problem.operators, stop=StopRule(1e-10, 1e-10))
        assert trace.converged, scheme.name
        point, _ = trace.solution()
        assert point[0] == pytest.approx(np.mean(a), abs=1e-6), scheme.name


def test_converged_residual_bounded():
    tol = 1e-8
    problem = affine_consensus([1.0, 4.0, -2.0])
    trace = iterate(ryu3(), problem.operators, stop=StopRule(tol, tol))
    point, _ = trace.solution()
    assert problem.residual(point) <= 10 * tol


def test_interval_run_lands_in_intersection():
    problem = interval_feasibility([(0.0, 2.0), (1.0, 3.0), (1.5, 2.5)])
    trace = iterate(ryu3(), problem.operators, stop=StopRule(1e-10, 1e-10))
    point, _ = trace.solution()
    assert problem.contains(point, tol=1e-6)


def test_game_converges_to_oracle(rng):
    problem = random_quadratic_game(3, 2, 2, rng)
    trace = iterate(extended_ryu(3), problem.operators, stop=StopRule(1e-11, 1e-11))
    assert trace.converged
    point, _ = trace.solution()
    np.testing.assert_allclose(point, problem.reference.solution, atol=1e-5)


def test_embed_game_reference(rng):
    problem = random_quadratic_game(3, 2, 1, rng)
    scheme = ryu3()
    x_star = problem.reference.solution
    v_star = [op.evaluate(x_star) for op in problem.operators]
    z = embed_solution(scheme, problem.operators, x_star, v_star)
    z_next, _ = apply_T(scheme, problem.operators, z)
    assert np.linalg.norm(z_next - z) <= 1e-9


def test_problem_document_round_trip(tmp_path, rng):
    problem = random_quadratic_game(2, 1, 1, rng)
    path = tmp_path / "game.json"
    save_problem(problem, path)
    loaded = load_problem(path)
    assert loaded.n == 2
    np.testing.assert_allclose(loaded.reference.solution, problem.reference.solution)
    y = rng.standard_normal(2)
    np.testing.assert_allclose(loaded.operators[1].resolvent(y), problem.operators[1].resolvent(y))


def test_analytic_reference_is_checked():
    problem = affine_consensus([0.0, 2.0])
    document = problem.to_document()
    document.reference.solution = [5.0]
    with pytest.raises(ConstructionError):
        Problem.from_document(document)


def test_parse_problem_spec():
    assert parse_problem_spec("consensus:1,2,3").reference.solution[0] == 2.0
    assert parse_problem_spec("intervals:0:2,1:3").contains([1.5])
    assert parse_problem_spec("lasso:1,3,1").reference.solution[0] == pytest.approx(2.0)
    assert parse_problem_spec("game:3,2,2", seed=4).dim == 4
    assert parse_problem_spec("random:4,2", seed=4).n == 4
    a = parse_problem_spec("random:3,2", seed=7).reference.solution
    b = parse_problem_spec("random:3,2", seed=7).reference.solution
    assert np.array_equal(a, b)
    with pytest.raises(ContractError):
        parse_problem_spec("consensus:1,x")
    with pytest.raises(ContractError):
        parse_problem_spec("nonsense")


def test_load_box_problem_without_dim_in_params():
    text = json.dumps({
        "dim": 2,
        "operators": [
            {"prox": {"kind": "box", "params": {"lower": [0, 0], "upper": [1, 1]}}},
            {"prox": {"kind": "box", "params": {"lower": [0.5, -1], "upper": [2, 0.5]}}},
        ],
    })
    problem = load_problem(text)
    assert problem.dim == 2
    assert problem.contains(np.array([0.75, 0.25]))
    assert not problem.contains(np.array([0.25, 0.25]))
