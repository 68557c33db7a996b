from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field

from reachavoid.allocation._ilp import solve_ilp_exact
from reachavoid.allocation.base import (
    Coalition,
    CoalitionAssignment,
    PairEvaluation,
    TeamState,
    evaluate_pair,
)
from reachavoid.exceptions import ConsistencyError

if t.TYPE_CHECKING:
    from reachavoid.geometry import ConvexRegion
    from reachavoid.run_config import SolverConfig
    from reachavoid.solver import CheckCounter

logger = logging.getLogger(__name__)


@dataclass
class HilpReport:
    """
    Result of the hierarchical allocation plus what it took to get there.

    Attributes
    ----------
    assignment : CoalitionAssignment
    check_count : int
        Minimum distance solves spent.
    iterations : int
        Number of priority levels that were solved.
    first_level_complete : bool
        True when every attacker left after the first level was either assigned or
        infeasible against all defenders, in which case the assignment is optimal.
    ads_sizes : list of int
        Size of every active defense set met.
    evaluations : dict
        Every pair evaluated, keyed by (attacker id, coalition ids).
    """

    assignment: CoalitionAssignment
    check_count: int
    iterations: int = 0
    first_level_complete: bool = False
    ads_sizes: t.List[int] = field(default_factory=list)
    evaluations: t.Dict[t.Tuple[int, t.Tuple[int, ...]], PairEvaluation] = field(
        default_factory=dict, repr=False
    )

    @property
    def gamma(self) -> int:
        return len(self.assignment)

    def check_bound(self, dim: int, n_active: int) -> int:
        return check_number_bound(dim, n_active)


def check_number_bound(dim: int, n_active: int) -> int:
    "upper bound on the checks of one hierarchical allocation when no active defense set exceeds dim"
    return 2 ** (dim - 1) * n_active * (1 + n_active)


def _irreducible(
    parent: PairEvaluation,
    dim: int,
    state: TeamState,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig],
) -> t.List[PairEvaluation]:
    coalition, j = parent.coalition, parent.attacker_id
    found: t.List[PairEvaluation] = []
    remaining = set(coalition)
    for size in range(1, dim + 1):
        if len(remaining) < size:
            break
        elif len(coalition) == size:
            found.append(parent)
            break
        for subset in Coalition(tuple(remaining)).subsets(size):
            # members may have left the residual set earlier in this sweep
            if not set(subset) <= remaining:
                continue
            evaluation = evaluate_pair(subset, j, state, domain, target, counter, config)
            if evaluation.reward == 1:
                found.append(evaluation)
                remaining -= set(subset)
    return found


def irreducible_subpairs(
    coalition: Coalition,
    attacker_id: int,
    state: TeamState,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> t.List[t.Tuple[Coalition, int]]:
    """
    Irreducible sub-pairs of a feasible coalition-attacker pair.

    Subsets of size 1, 2, ... up to the space dimension are drawn from the
    residual coalition; every feasible one is emitted and its members leave the
    residual set. When the coalition itself has the current size it is emitted
    as is, without a solve.
    """
    parent = PairEvaluation(coalition, attacker_id, reward=1, phi=float("nan"))
    found = _irreducible(parent, state.dim, state, domain, target, counter, config)
    return [(e.coalition, e.attacker_id) for e in found]


def hilp_detailed(
    state: TeamState,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> HilpReport:
    """
    Hierarchical allocation.

    Each level checks every remaining attacker against all remaining defenders,
    narrows feasible pairs to their active defense set and its irreducible
    sub-pairs, and solves the integer program restricted to that priority set.
    Assigned defenders and attackers (and infeasible attackers) leave the
    remaining sets before the next level.
    """
    start = counter.count
    free_defenders = set(state.defender_ids)
    open_attackers = list(state.active_attackers)
    assignment = CoalitionAssignment()
    report = HilpReport(assignment=assignment, check_count=0)

    while free_defenders and open_attackers:
        priority: t.List[PairEvaluation] = []
        everyone = Coalition(tuple(free_defenders))
        for j in list(open_attackers):
            evaluation = evaluate_pair(everyone, j, state, domain, target, counter, config)
            report.evaluations[evaluation.key] = evaluation
            if evaluation.reward == 0:
                open_attackers.remove(j)
                continue
            ads = evaluation.ads
            if ads is None:
                raise ConsistencyError(f"feasible pair for attacker {j} has no active defense set")
            report.ads_sizes.append(len(ads))
            ads_pair = (
                evaluation
                if ads == everyone
                else PairEvaluation(ads, j, reward=1, phi=evaluation.phi, waypoint=evaluation.waypoint, ads=ads)
            )
            for pair in _irreducible(ads_pair, state.dim, state, domain, target, counter, config):
                report.evaluations.setdefault(pair.key, pair)
                priority.append(pair)

        if not priority:
            break
        level, value = solve_ilp_exact(priority)
        report.iterations += 1
        logger.debug(
            "hilp level %d: %d priority pairs, %d assigned, %d attackers open",
            report.iterations,
            len(priority),
            value,
            len(open_attackers),
        )
        assignment = assignment.merged(level)
        free_defenders -= level.defenders
        open_attackers = [j for j in open_attackers if j not in level.attackers]
        if report.iterations == 1:
            report.first_level_complete = not open_attackers

    if report.iterations == 0:
        report.first_level_complete = not open_attackers
    report.assignment = assignment
    report.check_count = counter.count - start
    return report


def hilp(
    state: TeamState,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> t.Tuple[CoalitionAssignment, int]:
    report = hilp_detailed(state, domain, target, counter, config)
    return report.assignment, report.check_count
