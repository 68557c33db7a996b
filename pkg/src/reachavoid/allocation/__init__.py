from reachavoid.allocation._hilp import (
    HilpReport,
    check_number_bound,
    hilp,
    hilp_detailed,
    irreducible_subpairs,
)
from reachavoid.allocation._ilp import (
    MAX_EXACT_ATTACKERS,
    MAX_EXACT_DEFENDERS,
    enumerate_coalitions,
    exact_allocation,
    solve_ilp_exact,
)
from reachavoid.allocation._mdea import (
    coordinate_assignment,
    defense_inputs,
    mdea,
    velocities_from_outcomes,
)
from reachavoid.allocation.base import (
    Coalition,
    CoalitionAssignment,
    MdeaContext,
    MdeaDecision,
    PairEvaluation,
    TeamState,
    active_defense_set,
    assignment_matrix,
    assignment_rule,
    evaluate_pair,
    gamma_value,
    validate_assignment,
)

__all__ = [
    "Coalition",
    "CoalitionAssignment",
    "HilpReport",
    "MAX_EXACT_ATTACKERS",
    "MAX_EXACT_DEFENDERS",
    "MdeaContext",
    "MdeaDecision",
    "PairEvaluation",
    "TeamState",
    "active_defense_set",
    "assignment_matrix",
    "assignment_rule",
    "check_number_bound",
    "coordinate_assignment",
    "defense_inputs",
    "enumerate_coalitions",
    "evaluate_pair",
    "exact_allocation",
    "gamma_value",
    "hilp",
    "hilp_detailed",
    "irreducible_subpairs",
    "mdea",
    "solve_ilp_exact",
    "validate_assignment",
    "velocities_from_outcomes",
]
