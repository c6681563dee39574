import numpy as np
import pytest

from nmrassign.shortest_path import (
    InstanceTooLargeError,
    NoPathError,
    PathSolution,
    dp_shortest_path,
    exhaustive_constrained,
)

from oracles import (
    brute_constrained,
    brute_shortest,
    check_path,
    conflict_fixture,
    make_graph,
    random_instance,
)


def _abcd_fixture():
    """Two inner layers {A,B}/{C,D}; A=1, B=2 within their layers."""
    edges = [
        {(0, 0): 0.0, (0, 1): 0.0, (0, 2): 0.0},
        {
            # dummy routes are priced out so a regular path wins
            (0, 0): 100.0, (0, 1): 100.0, (0, 2): 100.0,
            (1, 0): 100.0, (2, 0): 100.0,
            (1, 1): 1.0, (1, 2): 5.0,  # A->C, A->D
            (2, 1): 4.0, (2, 2): 2.0,  # B->C, B->D
        },
        {(0, 0): 0.0, (1, 0): 0.0, (2, 0): 0.0},
    ]
    return make_graph([3, 3], edges)


def test_dp_abcd_fixture():
    sol = dp_shortest_path(_abcd_fixture())
    assert sol.nodes == (0, 1, 1, 0)  # Start, A, C, End
    assert sol.total_cost == pytest.approx(1.0)
    assert sol.edge_costs == (0.0, 1.0, 0.0)


def test_dp_dummies_only():
    thresholds = [0.0, 3.0, 4.0, 5.0]
    edges = [{(0, 0): 0.0}, {(0, 0): 3.0}, {(0, 0): 4.0}, {(0, 0): 5.0}]
    g = make_graph([1, 1, 1], edges, thresholds=thresholds)
    sol = dp_shortest_path(g)
    assert sol.nodes == (0, 0, 0, 0, 0)
    assert sol.total_cost == pytest.approx(12.0)


def test_dp_matches_brute_force_on_random_graphs():
    rng = np.random.default_rng(17)
    for _ in range(25):
        g = random_instance(rng, int(rng.integers(1, 8)), 4, 10)
        sol = dp_shortest_path(g)
        check_path(g, sol.nodes, allow_reuse=True)
        assert sol.total_cost == pytest.approx(brute_shortest(g), abs=1e-9)
        assert g.path_cost(sol.nodes) == pytest.approx(sol.total_cost, abs=1e-12)


def test_dp_tie_break_lexicographic():
    edges = [
        {(0, 0): 0.0, (0, 1): 0.0, (0, 2): 0.0},
        {(0, 0): 1.0, (1, 0): 1.0, (2, 0): 1.0},
    ]
    g = make_graph([3], edges)
    assert dp_shortest_path(g).nodes == (0, 0, 0)


def test_dp_no_path():
    g = make_graph([2], [{(0, 1): 0.0}, {(0, 0): 1.0}])
    with pytest.raises(NoPathError):
        dp_shortest_path(g)


def test_exhaustive_conflict_fixture():
    g = conflict_fixture()
    sol = exhaustive_constrained(g)
    assert sol.total_cost == pytest.approx(10.0)
    check_path(g, sol.nodes, allow_reuse=False)
    # one regular node, one dummy
    kinds = sorted(g.node(k, sol.nodes[k]).kind for k in (1, 2))
    assert kinds == ["dummy", "regular"]


def test_exhaustive_dummies_only():
    thresholds = [0.0, 3.0, 4.0]
    edges = [{(0, 0): 0.0}, {(0, 0): 3.0}, {(0, 0): 4.0}]
    g = make_graph([1, 1], edges, thresholds=thresholds)
    assert exhaustive_constrained(g).total_cost == pytest.approx(7.0)


def test_exhaustive_matches_independent_enumeration():
    rng = np.random.default_rng(23)
    for _ in range(20):
        g = random_instance(rng, int(rng.integers(1, 6)), 3, 6)
        sol = exhaustive_constrained(g)
        check_path(g, sol.nodes, allow_reuse=False)
        assert sol.total_cost == pytest.approx(brute_constrained(g), abs=1e-9)
        # relaxation ordering
        assert dp_shortest_path(g).total_cost <= sol.total_cost + 1e-9


def test_exhaustive_budget():
    edges = [{(0, j): 0.0 for j in range(5)}]
    for _ in range(9):
        edges.append({(i, j): 0.0 for i in range(5) for j in range(5)})
    edges.append({(i, 0): 0.0 for i in range(5)})
    g = make_graph([5] * 10, edges)
    with pytest.raises(InstanceTooLargeError):
        exhaustive_constrained(g, budget=10_000)


def test_path_solution_invariant():
    with pytest.raises(Exception):
        PathSolution((0, 1, 0), 1.0, (1.0,))
