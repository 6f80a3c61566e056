import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import attrs_from, random_distances
from groupforge import (
    DistanceMatrix,
    PartitionProblem,
    brute_force_oracle,
    distance_matrix,
    edge_vector,
    feasibility_check,
    objective_value,
    solve_exact,
    validate_solution,
)
from groupforge.errors import (
    ConstraintViolation,
    DimensionMismatch,
    InfeasibleProblem,
    TimeoutBudgetExceeded,
    TooLarge,
)
from groupforge.partition import (
    PartitionSolution,
    canonical_assignment,
    restricted_growth_strings,
)


def four_student_instance(sense="max"):
    d = np.ones((4, 4)) - np.eye(4)
    d[0, 1] = d[1, 0] = d[2, 3] = d[3, 2] = 10.0
    return PartitionProblem(DistanceMatrix(d), 2, 2, sense=sense)


def adversarial_instance(B_L=0.0):
    """Students 0 and 5 carry the attribute and sit far from each other and
    from everyone else; the other eight are bunched together."""
    rng = np.random.default_rng(0)
    Q = rng.normal(0, 0.01, (10, 3))
    Q[0] = [5.0, 0, 0]
    Q[5] = [-5.0, 0, 0]
    col = np.zeros(10, dtype=int)
    col[[0, 5]] = 1
    attrs = attrs_from(col)
    return PartitionProblem(distance_matrix(Q), 5, 5, {"s": B_L}, attrs, "max")


def test_distance_matrix_examples():
    d = distance_matrix(np.array([[0, 0, 0], [3, 4, 0], [3, 4, 0], [1, 1, 1], [2, 2, 2]]))
    assert d.d[0, 1] == 5.0
    assert d.d[1, 2] == 0.0
    assert d.d[3, 4] == pytest.approx(math.sqrt(3), abs=1e-12)
    assert np.array_equal(d.d, d.d.T)


def test_edge_vector_examples():
    assert edge_vector([0, 0, 1, 1]).tolist() == [1, 0, 0, 0, 0, 1]
    assert edge_vector([0] * 5).tolist() == [1] * 10
    assert edge_vector(range(5)).tolist() == [0] * 10


def test_objective_value_examples():
    p = four_student_instance()
    assert objective_value(np.zeros(6), p.distances) == 0
    assert objective_value(np.ones(6), p.distances) == 24
    assert objective_value(edge_vector([0, 0, 1, 1]), p.distances) == 20
    with pytest.raises(DimensionMismatch):
        objective_value(np.ones(5), p.distances)


def test_feasibility_examples():
    d = random_distances(np.random.default_rng(1), 10)
    assert feasibility_check(PartitionProblem(d, 5, 5))
    bad = feasibility_check(PartitionProblem(d, 4, 4))
    assert not bad
    assert bad.reason == "no composition of 10 into parts of size exactly 4"
    attrs = attrs_from([1, 1, 0, 0, 0, 0, 0, 0, 0, 0])
    assert feasibility_check(PartitionProblem(d, 5, 5, {"s": 1.0}, attrs))
    three = attrs_from([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
    assert not feasibility_check(PartitionProblem(d, 5, 5, {"s": 1.0}, three))


def test_problem_validation():
    d = random_distances(np.random.default_rng(1), 6)
    with pytest.raises(ValueError):
        PartitionProblem(d, 4, 3)
    with pytest.raises(ValueError):
        PartitionProblem(d, 1, 7)
    with pytest.raises(ValueError):
        PartitionProblem(d, 2, 3, {"s": 1.5}, attrs_from([0, 1, 0, 1, 0, 1]))
    with pytest.raises(ValueError):
        PartitionProblem(d, 2, 3, {"s": 1.0})


def test_four_students_maximize():
    sol = solve_exact(four_student_instance("max"))
    assert sol.groups == [[0, 1], [2, 3]]
    assert sol.objective == 20
    assert sol.proven_optimal


def test_four_students_minimize_tie_break():
    sol = solve_exact(four_student_instance("min"))
    assert sol.groups == [[0, 2], [1, 3]]
    assert sol.objective == 2


def test_ten_students_two_attributed_fair():
    rng = np.random.default_rng(5)
    col = np.zeros(10, dtype=int)
    col[[3, 4]] = 1
    p = PartitionProblem(random_distances(rng, 10), 5, 5, {"s": 1.0}, attrs_from(col))
    sol = solve_exact(p)
    assert sol.group_sizes == [5, 5]
    assert [int(col[g].sum()) for g in sol.groups] == [1, 1]


def test_adversarial_unfair_and_fair():
    unfair = solve_exact(adversarial_instance(0.0))
    oracle, _ = brute_force_oracle(adversarial_instance(0.0))
    assert unfair.assignment == oracle.assignment
    assert unfair.assignment[0] == unfair.assignment[5]
    fair = solve_exact(adversarial_instance(1.0))
    assert fair.assignment[0] != fair.assignment[5]


def test_oracle_candidate_counts():
    _, c = brute_force_oracle(four_student_instance())
    assert c == 3
    _, c = brute_force_oracle(PartitionProblem(random_distances(np.random.default_rng(0), 5), 5, 5))
    assert c == 1
    with pytest.raises(TooLarge):
        brute_force_oracle(PartitionProblem(random_distances(np.random.default_rng(0), 13), 1, 13))


def test_restricted_growth_strings_count_bell_numbers():
    assert [sum(1 for _ in restricted_growth_strings(n)) for n in range(7)] == [1, 1, 2, 5, 15, 52, 203]
    rgs = list(restricted_growth_strings(4))
    assert rgs == sorted(rgs)


def test_infeasible_raises():
    d = random_distances(np.random.default_rng(1), 10)
    with pytest.raises(InfeasibleProblem, match="exactly 4"):
        solve_exact(PartitionProblem(d, 4, 4))
    with pytest.raises(InfeasibleProblem):
        brute_force_oracle(PartitionProblem(d, 4, 4))


def test_jointly_infeasible_attributes():
    # each attribute alone is satisfiable, but together they are not
    d = random_distances(np.random.default_rng(2), 4)
    from groupforge import AttributeTable
    attrs = AttributeTable(list("abcd"), {"x": [1, 1, 0, 0], "y": [1, 0, 1, 0], "z": [1, 0, 0, 1]})
    p = PartitionProblem(d, 2, 2, {"x": 1.0, "y": 1.0, "z": 1.0}, attrs)
    assert feasibility_check(p)
    with pytest.raises(InfeasibleProblem):
        solve_exact(p)
    with pytest.raises(InfeasibleProblem):
        brute_force_oracle(p)


def test_timeout_returns_incumbent():
    d = random_distances(np.random.default_rng(3), 40)
    sol = solve_exact(PartitionProblem(d, 4, 5), time_budget=0.2)
    assert not sol.proven_optimal
    validate_solution(PartitionProblem(d, 4, 5), sol)


def test_timeout_without_incumbent():
    d = random_distances(np.random.default_rng(3), 60)
    with pytest.raises(TimeoutBudgetExceeded):
        solve_exact(PartitionProblem(d, 30, 30), time_budget=1e-9)


def test_validator_catches_bad_solutions():
    p = four_student_instance()
    good = solve_exact(p)
    validate_solution(p, good)
    broken_w = good.w.copy()
    broken_w[1] = 1  # 0~2 joined without closing the triangle
    bad = PartitionSolution(good.assignment, broken_w, good.objective, True)
    with pytest.raises(ConstraintViolation, match="triangle"):
        validate_solution(p, bad)
    wrong_size = PartitionSolution((0, 0, 0, 1), edge_vector([0, 0, 0, 1]), 12.0, True)
    with pytest.raises(ConstraintViolation, match="size"):
        validate_solution(p, wrong_size)
    attrs = attrs_from([1, 1, 0, 0])
    fair = PartitionProblem(p.distances, 2, 2, {"s": 1.0}, attrs)
    with pytest.raises(ConstraintViolation, match="balance"):
        validate_solution(fair, good)


def test_canonical_assignment():
    assert canonical_assignment([2, 2, 0, 1, 0]) == (0, 0, 1, 2, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 9), st.sampled_from([0.0, 0.5, 1.0]),
       st.sampled_from(["max", "min"]))
def test_solver_matches_oracle(seed, n, B_L, sense):
    rng = np.random.default_rng(seed)
    F_L = int(rng.integers(1, n + 1))
    F_U = int(rng.integers(F_L, n + 1))
    p = PartitionProblem(random_distances(rng, n), F_L, F_U, {"s": B_L},
                         attrs_from(rng.integers(0, 2, n)), sense)
    try:
        expected, _ = brute_force_oracle(p)
    except InfeasibleProblem:
        with pytest.raises(InfeasibleProblem):
            solve_exact(p)
        return
    got = solve_exact(p)
    assert got.objective == expected.objective
    assert got.assignment == expected.assignment
    validate_solution(p, got)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 9))
def test_min_never_exceeds_max(seed, n):
    rng = np.random.default_rng(seed)
    F_L = int(rng.integers(1, n + 1))
    F_U = int(rng.integers(F_L, n + 1))
    p = PartitionProblem(random_distances(rng, n), F_L, F_U)
    if not feasibility_check(p):
        return
    assert solve_exact(p.with_sense("min")).objective <= solve_exact(p).objective


@pytest.mark.parametrize("workers", [2, 4])
def test_worker_count_does_not_change_result(workers):
    rng = np.random.default_rng(11)
    for _ in range(5):
        n = 11
        p = PartitionProblem(random_distances(rng, n), 3, 4, {"s": 0.5},
                             attrs_from(rng.integers(0, 2, n)))
        a = solve_exact(p, workers=1)
        b = solve_exact(p, workers=workers)
        assert a.assignment == b.assignment and a.objective == b.objective
        assert a.proven_optimal and b.proven_optimal
