from __future__ import annotations

import itertools
from collections import namedtuple

import numpy as np
import pytest

from reachavoid.allocation import (
    Coalition,
    CoalitionAssignment,
    MdeaContext,
    MdeaDecision,
    PairEvaluation,
    TeamState,
    active_defense_set,
    assignment_matrix,
    assignment_rule,
    check_number_bound,
    defense_inputs,
    evaluate_pair,
    exact_allocation,
    gamma_value,
    hilp,
    hilp_detailed,
    irreducible_subpairs,
    mdea,
    solve_ilp_exact,
)
from reachavoid.coordination import dmsdc_step, solve_single_attack
from reachavoid.exceptions import ConsistencyError, InvalidInputError
from reachavoid.solver import CheckCounter


def team(defenders, attackers, radii=None, active=None):
    return TeamState.from_arrays(
        defender_positions=defenders,
        defender_speeds=[1.0] * len(defenders),
        capture_radii=radii if radii is not None else [0.0] * len(defenders),
        attacker_positions=attackers,
        attacker_speeds=[1.0] * len(attackers),
        active=active,
    )


def pair(attacker, *ids, reward=1):
    return PairEvaluation(Coalition(ids), attacker, reward=reward, phi=1.0 if reward else 0.0)


def test_coalition_is_sorted_and_nonempty():
    assert Coalition.of(3, 1, 2).defender_ids == (1, 2, 3)
    assert Coalition.of(1, 2) < Coalition.of(1, 3)
    assert str(Coalition.of(2, 1)) == "{1,2}"
    with pytest.raises(InvalidInputError):
        Coalition(())
    with pytest.raises(InvalidInputError):
        Coalition.of(0)


def test_assignment_must_be_conflict_free():
    with pytest.raises(ConsistencyError):
        CoalitionAssignment({1: Coalition.of(1, 2), 2: Coalition.of(2)})


def test_assignment_rule_and_matrix():
    assignment = CoalitionAssignment({2: Coalition.of(1, 3), 1: Coalition.of(2)})
    assert assignment_rule(assignment, [1, 2, 3, 4]) == {1: 2, 2: 1, 3: 2, 4: None}
    matrix = assignment_matrix(assignment, 4, [1, 2])
    np.testing.assert_array_equal(matrix, [[0, 1], [1, 0], [0, 1], [0, 0]])
    # every defender serves at most one attacker
    assert matrix.sum(axis=1).max() <= 1


def test_gamma_value():
    evaluations = [pair(1, 1), pair(2, 2, reward=0)]
    assert gamma_value(CoalitionAssignment(), evaluations) == 0
    both = CoalitionAssignment({1: Coalition.of(1), 2: Coalition.of(2)})
    assert gamma_value(both, evaluations) == 1
    with pytest.raises(InvalidInputError):
        gamma_value(CoalitionAssignment({3: Coalition.of(3)}), evaluations)


def test_active_defense_set(square, target_ball):
    state = team([[0, 2], [10, 10]], [[0, -2]])
    view = state.view([1, 2], 1)
    result = solve_single_attack(view, square, target_ball, CheckCounter())
    assert active_defense_set(view, result) == Coalition.of(1)


def test_active_defense_set_symmetric_pinch(square, target_ball):
    # both bisectors meet on the axis at y = -1/3
    state = team([[-1, 1], [1, 1]], [[0, -2]])
    evaluation = evaluate_pair(Coalition.of(1, 2), 1, state, square, target_ball, CheckCounter())
    assert evaluation.reward == 1
    assert evaluation.phi == pytest.approx((7 / 3) ** 2, abs=1e-6)
    assert evaluation.ads == Coalition.of(1, 2)


def test_evaluate_pair(square, target_ball):
    state = team([[0, 2]], [[0, -2], [2, 3]], active=[True, True])
    counter = CheckCounter()
    feasible = evaluate_pair(Coalition.of(1), 1, state, square, target_ball, counter)
    assert feasible.reward == 1 and feasible.ads == Coalition.of(1)
    infeasible = evaluate_pair(Coalition.of(1), 2, state, square, target_ball, counter)
    assert infeasible.reward == 0 and infeasible.ads is None
    assert counter.count == 2


def test_evaluate_pair_inactive_attacker_costs_nothing(square, target_ball):
    state = team([[0, 2]], [[0, -2]], active=[False])
    counter = CheckCounter()
    assert evaluate_pair(Coalition.of(1), 1, state, square, target_ball, counter).reward == 0
    assert counter.count == 0


# flanking defenders: each bisector alone cuts the target, together they keep it out
FLANK = [[-3.2, 0.0], [3.2, 0.0]]


IrreducibleCase = namedtuple("IrreducibleCase", ["defenders", "coalition", "expected", "checks"])

IRREDUCIBLE_CASES = [
    IrreducibleCase([[0, 2]], (1,), [(1,)], 0),
    IrreducibleCase([[0, 2], [2, 0]], (1, 2), [(1,), (2,)], 2),
    IrreducibleCase(FLANK, (1, 2), [(1, 2)], 2),
]


@pytest.mark.parametrize("case", IRREDUCIBLE_CASES)
def test_irreducible_subpairs(case, square, target_ball):
    state = team(case.defenders, [[0, -2]])
    counter = CheckCounter()
    found = irreducible_subpairs(Coalition(case.coalition), 1, state, square, target_ball, counter)
    assert [c.defender_ids for c, _ in found] == case.expected
    assert all(j == 1 for _, j in found)
    assert counter.count == case.checks


def test_flanking_singletons_are_infeasible(square, target_ball):
    state = team(FLANK, [[0, -2]])
    for i in (1, 2):
        evaluation = evaluate_pair(Coalition.of(i), 1, state, square, target_ball, CheckCounter())
        assert evaluation.reward == 0
    both = evaluate_pair(Coalition.of(1, 2), 1, state, square, target_ball, CheckCounter())
    assert both.reward == 1


def test_solve_ilp_exact_trivial():
    assert solve_ilp_exact([]) == (CoalitionAssignment(), 0)
    assert solve_ilp_exact([pair(1, 1, reward=0)]) == (CoalitionAssignment(), 0)


def test_solve_ilp_exact_tie_break():
    assignment, value = solve_ilp_exact([pair(2, 1), pair(1, 1)])
    assert value == 1
    assert assignment.pairs == {1: Coalition.of(1)}


def _brute_force(candidates):
    best = 0
    feasible = [c for c in candidates if c.reward == 1]
    for k in range(len(feasible) + 1):
        for subset in itertools.combinations(feasible, k):
            attackers = [p.attacker_id for p in subset]
            defenders = [i for p in subset for i in p.coalition]
            if len(set(attackers)) == len(attackers) and len(set(defenders)) == len(defenders):
                best = max(best, k)
    return best


def test_solve_ilp_exact_matches_enumeration():
    rng = np.random.default_rng(2)
    for _ in range(30):
        candidates = []
        for _ in range(int(rng.integers(1, 13))):
            size = int(rng.integers(1, 3))
            ids = tuple(int(i) for i in rng.choice(np.arange(1, 6), size=size, replace=False))
            candidates.append(pair(int(rng.integers(1, 5)), *ids, reward=int(rng.integers(0, 2))))
        assignment, value = solve_ilp_exact(candidates)
        assert value == _brute_force(candidates) == len(assignment)


def test_hilp_single_pair(square, target_ball):
    state = team([[0, 2]], [[0, -2]])
    counter = CheckCounter()
    assignment, checks = hilp(state, square, target_ball, counter)
    assert assignment.pairs == {1: Coalition.of(1)}
    # the active defense set is the whole coalition, so no sub-pair is solved
    assert checks == 1 == counter.count


def test_hilp_flanking_pair(square, target_ball):
    state = team(FLANK, [[0, -2]])
    report = hilp_detailed(state, square, target_ball, CheckCounter())
    assert report.assignment.pairs == {1: Coalition.of(1, 2)}
    assert report.check_count == 3
    assert report.check_count < check_number_bound(2, 1)
    assert report.first_level_complete


def test_hilp_without_feasible_pairs(square, target_ball):
    state = team([[0, -4]], [[0, 1.5]])
    report = hilp_detailed(state, square, target_ball, CheckCounter())
    assert not report.assignment
    assert report.gamma == 0
    assert report.first_level_complete


def test_hilp_matches_exact_on_disjoint_instance(square, target_ball):
    # three attackers, each facing its own defender
    state = team([[-3, 2], [0, 2], [3, 2]], [[-3, -2], [0, -2], [3, -2]])
    report = hilp_detailed(state, square, target_ball, CheckCounter())
    _, exact = exact_allocation(state, square, target_ball, CheckCounter())
    assert report.gamma == exact == 3
    assert gamma_value(report.assignment, report.evaluations) == 3


def test_check_number_bound():
    assert check_number_bound(2, 1) == 4
    assert check_number_bound(3, 2) == 24


def test_exact_allocation_size_guard(square, target_ball):
    state = team([[0, 0]] * 9, [[1, 1]])
    with pytest.raises(InvalidInputError):
        exact_allocation(state, square, target_ball, CheckCounter())


def _context(previous, active):
    return MdeaContext(
        previous_assignment=CoalitionAssignment(previous),
        previous_active=frozenset(active),
        initialized=True,
    )


def test_mdea_adopts_strictly_better_assignment():
    state = team([[0, 0], [1, 1]], [[2, 2], [3, 3]])
    context = _context({1: Coalition.of(1)}, {1, 2})
    better = CoalitionAssignment({1: Coalition.of(1), 2: Coalition.of(2)})
    assert mdea(state, better, context) == better
    assert context.last_decision is MdeaDecision.ADOPT
    assert context.last_gamma == 2


def test_mdea_keeps_previous_on_tie():
    state = team([[0, 0], [1, 1]], [[2, 2], [3, 3]])
    context = _context({1: Coalition.of(1)}, {1, 2})
    tie = CoalitionAssignment({2: Coalition.of(2)})
    result = mdea(state, tie, context)
    assert context.last_decision is MdeaDecision.KEEP
    assert context.previous_assignment.pairs == {1: Coalition.of(1)}
    # the idle defender joins the unserved attacker
    assert result.pairs == {1: Coalition.of(1), 2: Coalition.of(2)}
    assert context.last_greedy_count == 1


def test_mdea_does_not_oscillate_between_equal_assignments():
    state = team([[0, 0], [1, 1]], [[2, 2], [3, 3]])
    straight = CoalitionAssignment({1: Coalition.of(1), 2: Coalition.of(2)})
    crossed = CoalitionAssignment({1: Coalition.of(2), 2: Coalition.of(1)})
    context = MdeaContext()
    results = [mdea(state, proposal, context) for proposal in [straight, crossed] * 3]
    for result in results:
        assert result.pairs == straight.pairs
    assert context.last_decision is MdeaDecision.KEEP
    assert context.last_greedy_count == 0


def test_mdea_greedy_nearest_attacker():
    state = team([[0, 0]], [[1, 0], [5, 0]])
    result = mdea(state, CoalitionAssignment(), MdeaContext())
    assert result.pairs == {1: Coalition.of(1)}


def test_mdea_drops_inactive_attackers():
    state = team([[0, 0], [1, 1]], [[2, 2], [3, 3]], active=[False, True])
    context = _context({1: Coalition.of(1), 2: Coalition.of(2)}, {1, 2})
    result = mdea(state, CoalitionAssignment({2: Coalition.of(1)}), context)
    assert context.last_decision is MdeaDecision.KEEP
    assert result.pairs == {2: Coalition.of(2)}


def test_mdea_without_active_attackers():
    state = team([[0, 0]], [[2, 2]], active=[False])
    context = MdeaContext()
    assert not mdea(state, CoalitionAssignment(), context)
    assert context.last_decision is MdeaDecision.EMPTY


def test_mdea_checks_rewards():
    state = team([[0, 0]], [[2, 2]])
    assignment = CoalitionAssignment({1: Coalition.of(1)})
    with pytest.raises(ConsistencyError):
        mdea(state, assignment, MdeaContext(), {(1, (1,)): pair(1, 1, reward=0)})


def test_defense_inputs(square, target_ball):
    state = team([[0, 2], [-3, 2], [4, 4]], [[0, -2], [-3, -2]])
    idle = defense_inputs(CoalitionAssignment(), state, square, target_ball, CheckCounter())
    assert all(np.array_equal(v, np.zeros(2)) for v in idle.values())

    assignment = CoalitionAssignment({1: Coalition.of(1), 2: Coalition.of(2)})
    inputs = defense_inputs(assignment, state, square, target_ball, CheckCounter())
    for j, i in ((1, 1), (2, 2)):
        expected = dmsdc_step(state.view([i], j), square, target_ball, CheckCounter())
        np.testing.assert_allclose(inputs[i], expected.defender_velocities[i])
    np.testing.assert_array_equal(inputs[3], np.zeros(2))
