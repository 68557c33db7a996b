from __future__ import annotations

import logging
import typing as t

import numpy as np

from reachavoid.allocation.base import (
    Coalition,
    CoalitionAssignment,
    MdeaContext,
    MdeaDecision,
    PairEvaluation,
    TeamState,
    gamma_value,
)
from reachavoid.coordination import CoordinationOutcome, dmsdc_step
from reachavoid.exceptions import ConsistencyError

if t.TYPE_CHECKING:
    from reachavoid.geometry import ConvexRegion, Vec
    from reachavoid.run_config import SolverConfig
    from reachavoid.solver import CheckCounter

logger = logging.getLogger(__name__)


def mdea(
    state: TeamState,
    hilp_assignment: CoalitionAssignment,
    context: MdeaContext,
    evaluations: t.Optional[
        t.Mapping[t.Tuple[int, t.Tuple[int, ...]], PairEvaluation]
    ] = None,
) -> CoalitionAssignment:
    """
    Monotonic defense enhancement allocation.

    Part I adopts the hierarchical assignment only when it strictly beats the
    previous one, corrected for attackers that stopped being active; otherwise the
    previous assignment is kept with the pairs of inactive attackers removed. Part
    II sends every still idle defender to the nearest unassigned active attacker
    (ties go to the smaller attacker id); defenders sent to the same attacker form
    one coalition.

    `context` carries the Part I result and the active set to the next call.
    When `evaluations` are given, the pair count of `hilp_assignment` is checked
    against the sum of its rewards.
    """
    active = frozenset(state.active_attackers)
    if not active:
        context.last_decision = MdeaDecision.EMPTY
        context.last_gamma = 0
        context.last_greedy_count = 0
        return CoalitionAssignment()

    if not context.initialized:
        context.previous_assignment = hilp_assignment
        context.previous_active = frozenset(state.attacker_positions)
        context.initialized = True

    gamma = len(hilp_assignment)
    if evaluations is not None and gamma_value(hilp_assignment, evaluations) != gamma:
        raise ConsistencyError(
            "hierarchical assignment holds a pair without reward"
        )
    gamma_prev = len(context.previous_assignment)
    threshold = gamma_prev - len(context.previous_active) + len(active)
    if gamma > threshold:
        chosen = hilp_assignment
        decision = MdeaDecision.ADOPT
    else:
        chosen = context.previous_assignment
        if len(context.previous_active) != len(active):
            chosen = chosen.restricted_to(active)
        decision = MdeaDecision.KEEP
    logger.debug(
        "mdea %s: gamma=%d previous=%d threshold=%d",
        decision.value,
        gamma,
        gamma_prev,
        threshold,
    )
    context.previous_assignment = chosen
    context.previous_active = active
    context.last_decision = decision
    context.last_gamma = len(chosen)

    idle = [i for i in state.defender_ids if i not in chosen.defenders]
    unserved = [j for j in state.active_attackers if j not in chosen.attackers]
    groups: t.Dict[int, t.List[int]] = {}
    if idle and unserved:
        for i in idle:
            p = state.defender_positions[i]
            nearest = min(
                unserved,
                key=lambda j: (float(np.linalg.norm(p - state.attacker_positions[j])), j),
            )
            groups.setdefault(nearest, []).append(i)
    context.last_greedy_count = sum(len(ids) for ids in groups.values())
    greedy = CoalitionAssignment({j: Coalition(tuple(ids)) for j, ids in groups.items()})
    return chosen.merged(greedy)


def coordinate_assignment(
    assignment: CoalitionAssignment,
    state: TeamState,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> t.Dict[int, CoordinationOutcome]:
    "single-attack coordination of every pair whose attacker is still active"
    active = set(state.active_attackers)
    return {
        j: dmsdc_step(state.view(coalition, j), domain, target, counter, config)
        for j, coalition in assignment.items()
        if j in active
    }


def defense_inputs(
    assignment: CoalitionAssignment,
    state: TeamState,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> t.Dict[int, Vec]:
    """
    Velocity of every defender: assigned defenders follow their coalition's
    coordination, idle ones stay put.
    """
    outcomes = coordinate_assignment(assignment, state, domain, target, counter, config)
    return velocities_from_outcomes(outcomes, state)


def velocities_from_outcomes(
    outcomes: t.Mapping[int, CoordinationOutcome], state: TeamState
) -> t.Dict[int, Vec]:
    velocities = {i: np.zeros(state.dim) for i in state.defender_ids}
    for outcome in outcomes.values():
        velocities.update(outcome.defender_velocities)
    return velocities
