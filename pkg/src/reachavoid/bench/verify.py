"""
Invariant checks on a single scenario, run by `reachavoid verify`.
"""
from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field

import numpy as np
from rich.table import Table

from reachavoid.allocation import (
    MAX_EXACT_ATTACKERS,
    MAX_EXACT_DEFENDERS,
    CoalitionAssignment,
    TeamState,
    check_number_bound,
    evaluate_pair,
    exact_allocation,
    hilp_detailed,
)
from reachavoid.coordination import (
    CoalitionView,
    CoordinationMode,
    solve_single_attack,
    value_gradients,
)
from reachavoid.engine import AttackPolicy, DefensePolicy, ScenarioConfig, run_game
from reachavoid.geometry import CaptureFrontier, ConvexRegion, apollonius_ball, region_bounds
from reachavoid.run_config import SolverConfig
from reachavoid.solver import CheckCounter, kkt_residual

logger = logging.getLogger(__name__)

KKT_TOL = 1e-6
GRADIENT_RTOL = 1e-3
FD_STEP = 1e-5


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class VerifyReport:
    checks: t.List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name, bool(passed), detail))
        if not passed:
            logger.warning("check %s failed: %s", name, detail)

    def table(self) -> Table:
        table = Table("Check", "Result", "Detail", title="Scenario invariants")
        for c in self.checks:
            table.add_row(c.name, "pass" if c.passed else "FAIL", c.detail)
        return table


def srs_membership_mismatches(
    view: CoalitionView, points: np.ndarray, tol: float = 1e-9
) -> int:
    """
    Count sample points where a capture frontier of `view` disagrees with the
    closed-form safe region of its defender.

    Equal speeds without capture radius give the Voronoi half-plane, a faster
    defender without capture radius the complement of its Apollonius ball, and
    a positive radius the arrival-time comparison. Points within `tol` of the
    closed-form boundary are not counted.
    """
    a = view.attacker_position
    mismatches = 0
    for p, gamma, r in zip(view.defender_positions, view.gammas, view.radii):
        atom = CaptureFrontier(p, a, gamma, r)
        if r == 0.0 and gamma > 1.0:
            center, radius = apollonius_ball(p, a, gamma)
        for q in points:
            if r == 0.0 and gamma == 1.0:
                margin = float(np.linalg.norm(q - p) - np.linalg.norm(q - a))
            elif r == 0.0:
                margin = radius - float(np.linalg.norm(q - center))
            else:
                margin = float(np.linalg.norm(q - p) - gamma * np.linalg.norm(q - a) - r)
            if abs(margin) <= tol:
                continue
            if (atom.value(q) <= 0.0) != (margin > 0.0):
                mismatches += 1
    return mismatches


def finite_difference_gradients(
    view: CoalitionView,
    domain: ConvexRegion,
    target: ConvexRegion,
    config: t.Optional[SolverConfig] = None,
    step: float = FD_STEP,
) -> t.Tuple[t.Dict[int, np.ndarray], np.ndarray]:
    "central differences of the single-attack value in every defender and the attacker coordinate"
    counter = CheckCounter()

    def phi(positions: t.Sequence[np.ndarray], attacker: np.ndarray) -> float:
        moved = CoalitionView.create(
            view.defender_ids, positions, view.max_speeds, view.radii, view.attacker_id, attacker, view.attacker_max_speed
        )
        return float(solve_single_attack(moved, domain, target, counter, config).value)

    base = list(view.defender_positions)
    defenders = {}
    for k, i in enumerate(view.defender_ids):
        grad = np.zeros(view.dim)
        for c in range(view.dim):
            e = np.zeros(view.dim)
            e[c] = step
            plus = base[:k] + [base[k] + e] + base[k + 1 :]
            minus = base[:k] + [base[k] - e] + base[k + 1 :]
            grad[c] = (phi(plus, view.attacker_position) - phi(minus, view.attacker_position)) / (2 * step)
        defenders[i] = grad
    attacker = np.zeros(view.dim)
    for c in range(view.dim):
        e = np.zeros(view.dim)
        e[c] = step
        attacker[c] = (phi(base, view.attacker_position + e) - phi(base, view.attacker_position - e)) / (2 * step)
    return defenders, attacker


def gradients_agree(numeric: np.ndarray, analytic: np.ndarray, rtol: float = GRADIENT_RTOL, atol: float = 1e-6) -> bool:
    scale = max(float(np.linalg.norm(numeric)), float(np.linalg.norm(analytic)))
    return float(np.linalg.norm(numeric - analytic)) <= rtol * scale + atol


def irreducibility_violations(
    assignment: CoalitionAssignment,
    state: TeamState,
    domain: ConvexRegion,
    target: ConvexRegion,
    config: t.Optional[SolverConfig] = None,
) -> t.List[str]:
    "pairs larger than the dimension or with a feasible proper sub-coalition"
    problems = []
    counter = CheckCounter()
    for j, coalition in assignment.items():
        if len(coalition) > state.dim:
            problems.append(f"attacker {j}: coalition {coalition.defender_ids} exceeds dimension")
            continue
        for size in range(1, len(coalition)):
            for subset in coalition.subsets(size):
                if evaluate_pair(subset, j, state, domain, target, counter, config).reward == 1:
                    problems.append(f"attacker {j}: {subset.defender_ids} already suffices")
    return problems


def _sample_points(config: ScenarioConfig, n_points: int, seed: int) -> np.ndarray:
    lower, upper = region_bounds(config.domain)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    return rng.uniform(lower, upper, size=(n_points, config.dimension))


def verify_scenario(
    config: ScenarioConfig,
    solver_config: t.Optional[SolverConfig] = None,
    n_points: int = 2000,
    attack_policy: t.Union[AttackPolicy, str] = AttackPolicy.OPTIMAL,
) -> VerifyReport:
    """
    Run the invariant suite on the initial joint state of `config` and on one
    simulated game.

    Checks the closed forms of the safe-reachable set, the multiplier gradients
    of every feasible single pair against finite differences, the KKT residual of
    those solves, the hierarchical allocation against the exact one (small teams
    only) together with the irreducibility of its pairs and its check-number
    bound, and the payoff bound plus monotonicity of a reallocating game.
    """
    config.validate()
    report = VerifyReport()
    team = config.initial_state().team_state(config)
    points = _sample_points(config, n_points, config.rng_seed)

    mismatches = sum(
        srs_membership_mismatches(team.view(team.defender_ids, j), points)
        for j in team.active_attackers
    )
    report.add("srs closed forms", mismatches == 0, f"{mismatches} mismatches on {len(points)} points")

    counter = CheckCounter()
    worst_kkt = 0.0
    bad_gradients: t.List[str] = []
    n_pairs = 0
    for j in team.active_attackers:
        for i in team.defender_ids:
            view = team.view([i], j)
            result = solve_single_attack(view, config.domain, config.target, counter, solver_config)
            if result.optimal:
                worst_kkt = max(worst_kkt, kkt_residual(result))
            if not result.optimal or result.value <= 1e-6:
                continue
            n_pairs += 1
            analytic = value_gradients(view, config.domain, config.target, counter, solver_config)
            if analytic.mode is not CoordinationMode.WINNING:
                continue
            numeric_d, numeric_a = finite_difference_gradients(view, config.domain, config.target, solver_config)
            if not gradients_agree(numeric_d[i], analytic.defenders[i]):
                bad_gradients.append(f"d{i}/a{j}")
            if not gradients_agree(numeric_a, analytic.attacker):
                bad_gradients.append(f"a{j}(d{i})")
    report.add("kkt residual", worst_kkt <= KKT_TOL, f"worst {worst_kkt:.2e}")
    report.add(
        "gradient correspondence",
        not bad_gradients,
        f"{n_pairs} feasible pairs" + (f", mismatched: {', '.join(bad_gradients)}" if bad_gradients else ""),
    )

    hilp_counter = CheckCounter()
    hilp_report = hilp_detailed(team, config.domain, config.target, hilp_counter, solver_config)
    n_active = len(team.active_attackers)
    if hilp_report.ads_sizes and max(hilp_report.ads_sizes) <= team.dim and n_active:
        bound = check_number_bound(team.dim, n_active)
        report.add("check number bound", hilp_report.check_count < bound, f"{hilp_report.check_count} < {bound}")
    problems = irreducibility_violations(hilp_report.assignment, team, config.domain, config.target, solver_config)
    report.add("irreducible pairs", not problems, "; ".join(problems) or f"{hilp_report.gamma} pairs")

    if config.n_defenders <= MAX_EXACT_DEFENDERS and n_active <= MAX_EXACT_ATTACKERS:
        _, exact_value = exact_allocation(team, config.domain, config.target, CheckCounter(), solver_config)
        detail = f"hierarchical {hilp_report.gamma}, exact {exact_value}"
        report.add("allocation below optimum", hilp_report.gamma <= exact_value, detail)
        if hilp_report.first_level_complete:
            report.add("allocation optimal after one level", hilp_report.gamma == exact_value, detail)

    trace = run_game(config, DefensePolicy.MDEA, attack_policy, solver_config, record_snapshots=True)
    bound = trace.guaranteed_bound
    report.add(
        "payoff bound",
        bound is None or trace.payoff <= bound,
        f"payoff {trace.payoff}, bound {bound}",
    )
    report.add("monotone allocation value", trace.monotone_gamma())
    report.add("status conservation", trace.conservation_holds())
    report.add("resolved attackers frozen", trace.frozen_agents_hold())
    return report
