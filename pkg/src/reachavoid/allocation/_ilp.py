from __future__ import annotations

import itertools
import logging
import typing as t

from reachavoid.allocation.base import (
    Coalition,
    CoalitionAssignment,
    PairEvaluation,
    TeamState,
    evaluate_pair,
)
from reachavoid.exceptions import InvalidInputError

if t.TYPE_CHECKING:
    from reachavoid.geometry import ConvexRegion
    from reachavoid.run_config import SolverConfig
    from reachavoid.solver import CheckCounter

logger = logging.getLogger(__name__)

MAX_EXACT_DEFENDERS = 8
MAX_EXACT_ATTACKERS = 6


def solve_ilp_exact(
    candidate_pairs: t.Iterable[PairEvaluation],
) -> t.Tuple[CoalitionAssignment, int]:
    """
    Maximise the number of stopped attackers over conflict-free, redundancy-free
    selections of the candidate pairs.

    Depth-first branch-and-bound over attackers in ascending id order. For each
    attacker the candidate coalitions are tried in ascending order before the
    attacker is left out, and the incumbent is only replaced on strict
    improvement, so the optimum returned is the lexicographically smallest list
    of (attacker id, coalition ids).

    Returns
    -------
    (assignment, value)
    """
    options: t.Dict[int, t.List[Coalition]] = {}
    for pair in candidate_pairs:
        if pair.reward != 1:
            continue
        options.setdefault(pair.attacker_id, []).append(pair.coalition)
    attackers = sorted(options)
    for j in attackers:
        options[j] = sorted(set(options[j]))

    best: t.Dict[str, t.Any] = {"value": 0, "pairs": {}}
    chosen: t.Dict[int, Coalition] = {}

    def search(k: int, used: t.FrozenSet[int]) -> None:
        value = len(chosen)
        if value > best["value"]:
            best["value"] = value
            best["pairs"] = dict(chosen)
        if k == len(attackers):
            return
        # every remaining attacker can add at most one
        if value + (len(attackers) - k) <= best["value"]:
            return
        j = attackers[k]
        for coalition in options[j]:
            if coalition.isdisjoint(used):
                chosen[j] = coalition
                search(k + 1, used | set(coalition))
                del chosen[j]
        search(k + 1, used)

    search(0, frozenset())
    return CoalitionAssignment(best["pairs"]), int(best["value"])


def enumerate_coalitions(
    defender_ids: t.Sequence[int], max_size: int
) -> t.Iterator[Coalition]:
    "all coalitions of 1..max_size defenders, smallest first"
    ids = sorted(defender_ids)
    for size in range(1, min(max_size, len(ids)) + 1):
        for combo in itertools.combinations(ids, size):
            yield Coalition(combo)


def exact_allocation(
    state: TeamState,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> t.Tuple[CoalitionAssignment, int]:
    """
    Optimal allocation by evaluating every coalition of at most n defenders
    against every active attacker (one check each) and solving the integer
    program exactly.
    """
    n_defenders = len(state.defender_positions)
    n_attackers = len(state.active_attackers)
    if n_defenders > MAX_EXACT_DEFENDERS or n_attackers > MAX_EXACT_ATTACKERS:
        raise InvalidInputError(
            f"exact allocation is limited to {MAX_EXACT_DEFENDERS} defenders and "
            f"{MAX_EXACT_ATTACKERS} active attackers, got {n_defenders} and {n_attackers}"
        )
    candidates = [
        evaluate_pair(coalition, j, state, domain, target, counter, config)
        for j in state.active_attackers
        for coalition in enumerate_coalitions(state.defender_ids, state.dim)
    ]
    logger.debug(
        "exact allocation evaluated %d pairs, %d feasible",
        len(candidates),
        sum(c.reward for c in candidates),
    )
    return solve_ilp_exact(candidates)
