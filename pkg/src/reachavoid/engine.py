"""
Discrete-time multiplayer reach-avoid game.

Agents follow single-integrator dynamics integrated with forward Euler and
projected back onto the domain. Capture and target entry are checked at step
boundaries; the allocation is recomputed every `allocation_period` seconds.
"""
from __future__ import annotations

import json
import logging
import math
import typing as t
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd
from pydantic import BaseModel

from reachavoid.allocation import (
    CoalitionAssignment,
    MdeaContext,
    TeamState,
    check_number_bound,
    coordinate_assignment,
    hilp_detailed,
    mdea,
    velocities_from_outcomes,
)
from reachavoid.coordination import (
    almost_optimal_waypoint,
    random_attack_input,
    straight_line_attack_input,
)
from reachavoid.exceptions import ConfigurationError, ConsistencyError, InvalidInputError
from reachavoid.geometry import (
    ConvexRegion,
    Vec,
    as_vec,
    capture_region_contains,
    project_to_domain,
    region_contains,
)
from reachavoid.run_config import EPS_MEMBERSHIP, EPS_WIN, SolverConfig
from reachavoid.solver import CheckCounter, solve_min_distance
from reachavoid.utils import clip_to_arrival, normalize

logger = logging.getLogger(__name__)

_SPEED_TOL = 1e-12


class AttackerStatus(str, Enum):
    ACTIVE = "Active"
    CAPTURED = "Captured"
    REACHED_TARGET = "ReachedTarget"


class DefensePolicy(str, Enum):
    MDEA = "mdea"
    INITIAL_ONLY = "initial"
    NONE = "none"


class AttackPolicy(str, Enum):
    OPTIMAL = "optimal"
    STRAIGHT_LINE = "straight"
    RANDOM = "random"


class TerminationReason(str, Enum):
    ALL_RESOLVED = "AllResolved"
    TIMEOUT = "Timeout"
    NO_ATTACKERS = "NoAttackers"


class GameOutcome(str, Enum):
    DEFENSE_SUCCESS_CAPTURE = "DefenseSuccessCapture"
    DEFENSE_SUCCESS_TIMEOUT = "DefenseSuccessTimeout"
    DEFENSE_FAIL = "DefenseFail"


@dataclass(frozen=True)
class DefenderSpec:
    position: Vec
    max_speed: float
    capture_radius: float

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec(self.position, name="defender position"))


@dataclass(frozen=True)
class AttackerSpec:
    position: Vec
    max_speed: float

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec(self.position, name="attacker position"))


@dataclass(frozen=True)
class ScenarioConfig:
    """
    One fully specified game.

    The target may extend past the domain (a halfspace beyond a wall, say); the
    set attackers actually aim for is its intersection with the domain, which must
    be nonempty.
    """

    dimension: int
    domain: ConvexRegion
    target: ConvexRegion
    defenders: t.Tuple[DefenderSpec, ...]
    attackers: t.Tuple[AttackerSpec, ...]
    dt: float = 1e-2
    allocation_period: float = 1e-1
    t_max: float = 120.0
    rng_seed: int = 0

    @property
    def n_defenders(self) -> int:
        return len(self.defenders)

    @property
    def n_attackers(self) -> int:
        return len(self.attackers)

    @property
    def allocation_steps(self) -> int:
        "number of integration steps between allocation times"
        return max(1, int(round(self.allocation_period / self.dt)))

    @property
    def max_steps(self) -> int:
        return int(math.ceil(self.t_max / self.dt - 1e-9))

    def with_overrides(self, **changes: t.Any) -> ScenarioConfig:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)

    def validate(self) -> ScenarioConfig:
        """
        Check the scenario invariants; raises ConfigurationError.
        """
        n = self.dimension
        if n not in (2, 3):
            raise ConfigurationError(f"dimension must be 2 or 3, got {n}", "dimension")
        if self.domain.dim != n or not self.domain.atoms:
            raise ConfigurationError("domain must be a nonempty set of atoms in the scenario dimension", "domain")
        if self.target.dim != n or not self.target.atoms:
            raise ConfigurationError("target must be a nonempty set of atoms in the scenario dimension", "target")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}", "dt")
        if self.allocation_period < self.dt:
            raise ConfigurationError(
                f"allocation period {self.allocation_period} is shorter than dt {self.dt}",
                "allocation_period",
            )
        if not self.t_max > 0:
            raise ConfigurationError(f"t_max must be positive, got {self.t_max}", "t_max")
        probe = solve_min_distance(self.domain, self.target, CheckCounter())
        if not probe.optimal or probe.value > EPS_WIN:
            raise ConfigurationError("target does not meet the domain", "target")

        for i, d in enumerate(self.defenders, start=1):
            where = f"defenders[{i - 1}]"
            if d.position.shape[0] != n:
                raise ConfigurationError(f"position has dimension {d.position.shape[0]}", where)
            if not d.max_speed > 0:
                raise ConfigurationError(f"max_speed must be positive, got {d.max_speed}", where)
            if d.capture_radius < 0:
                raise ConfigurationError(f"capture_radius must be >= 0, got {d.capture_radius}", where)
            if not region_contains(self.domain, d.position, EPS_MEMBERSHIP):
                raise ConfigurationError("initial position outside the domain", where)
        for j, a in enumerate(self.attackers, start=1):
            where = f"attackers[{j - 1}]"
            if a.position.shape[0] != n:
                raise ConfigurationError(f"position has dimension {a.position.shape[0]}", where)
            if not a.max_speed > 0:
                raise ConfigurationError(f"max_speed must be positive, got {a.max_speed}", where)
            if not region_contains(self.domain, a.position, EPS_MEMBERSHIP):
                raise ConfigurationError("initial position outside the domain", where)
            if region_contains(self.target, a.position, 0.0):
                raise ConfigurationError("attacker starts inside the target", where)
            for i, d in enumerate(self.defenders, start=1):
                if d.max_speed < a.max_speed:
                    raise ConfigurationError(
                        f"speed ratio of defender {i} over attacker {j} is "
                        f"{d.max_speed / a.max_speed:.6g} < 1: defenders must be at least as fast as every attacker",
                        where,
                    )
                if capture_region_contains(d.position, a.position, d.capture_radius):
                    raise ConfigurationError(
                        f"attacker starts inside the capture region of defender {i}", where
                    )
        return self

    def initial_state(self) -> JointState:
        return JointState(
            time=0.0,
            step_index=0,
            defender_positions=tuple(d.position.copy() for d in self.defenders),
            attacker_positions=tuple(a.position.copy() for a in self.attackers),
            attacker_status=tuple(AttackerStatus.ACTIVE for _ in self.attackers),
        )


@dataclass(frozen=True)
class JointState:
    time: float
    step_index: int
    defender_positions: t.Tuple[Vec, ...]
    attacker_positions: t.Tuple[Vec, ...]
    attacker_status: t.Tuple[AttackerStatus, ...]

    def count(self, status: AttackerStatus) -> int:
        return sum(1 for s in self.attacker_status if s is status)

    @property
    def n_active(self) -> int:
        return self.count(AttackerStatus.ACTIVE)

    @property
    def n_captured(self) -> int:
        return self.count(AttackerStatus.CAPTURED)

    @property
    def n_reached(self) -> int:
        return self.count(AttackerStatus.REACHED_TARGET)

    def active_ids(self) -> t.Tuple[int, ...]:
        return tuple(
            j
            for j, s in enumerate(self.attacker_status, start=1)
            if s is AttackerStatus.ACTIVE
        )

    def team_state(self, config: ScenarioConfig) -> TeamState:
        return TeamState(
            defender_positions={i: p for i, p in enumerate(self.defender_positions, start=1)},
            defender_speeds={i: d.max_speed for i, d in enumerate(config.defenders, start=1)},
            capture_radii={i: d.capture_radius for i, d in enumerate(config.defenders, start=1)},
            attacker_positions={j: p for j, p in enumerate(self.attacker_positions, start=1)},
            attacker_speeds={j: a.max_speed for j, a in enumerate(config.attackers, start=1)},
            active_attackers=self.active_ids(),
        )


@dataclass
class StepRecord:
    time: float
    defender_positions: t.Tuple[Vec, ...]
    attacker_positions: t.Tuple[Vec, ...]
    attacker_status: t.Tuple[AttackerStatus, ...]
    # coordination value of every defended attacker at this step
    phi: t.Dict[int, float] = field(default_factory=dict)

    @classmethod
    def of(cls, state: JointState, phi: t.Optional[t.Dict[int, float]] = None) -> StepRecord:
        return cls(
            time=state.time,
            defender_positions=state.defender_positions,
            attacker_positions=state.attacker_positions,
            attacker_status=state.attacker_status,
            phi=dict(phi or {}),
        )

    def count(self, status: AttackerStatus) -> int:
        return sum(1 for s in self.attacker_status if s is status)


@dataclass
class AllocationRecord:
    """
    One allocation instant.

    `gamma` counts the pairs kept by the monotonic step before idle defenders are
    added greedily; `check_count` is the number of minimum distance solves the
    hierarchical allocation spent.
    """

    time: float
    assignment: CoalitionAssignment
    gamma: int
    n_captured: int
    check_count: int
    decision: str
    greedy_count: int
    hilp_gamma: int
    hilp_iterations: int
    first_level_complete: bool
    max_ads_size: int
    n_active: int


@dataclass
class GameTrace:
    defense_policy: DefensePolicy
    attack_policy: AttackPolicy
    n_attackers: int
    snapshots: t.List[StepRecord] = field(default_factory=list)
    allocations: t.List[AllocationRecord] = field(default_factory=list)
    termination_reason: t.Optional[TerminationReason] = None
    control_checks: int = 0
    steps: int = 0
    dimension: int = 2
    seed: int = 0

    @property
    def final(self) -> StepRecord:
        return self.snapshots[-1]

    @property
    def payoff(self) -> int:
        return self.final.count(AttackerStatus.REACHED_TARGET)

    @property
    def n_captured(self) -> int:
        return self.final.count(AttackerStatus.CAPTURED)

    @property
    def n_reached(self) -> int:
        return self.payoff

    @property
    def n_timed_out(self) -> int:
        return self.final.count(AttackerStatus.ACTIVE)

    @property
    def capture_number(self) -> int:
        return self.n_captured

    @property
    def outcome(self) -> GameOutcome:
        if self.payoff > 0:
            return GameOutcome.DEFENSE_FAIL
        if self.n_timed_out > 0:
            return GameOutcome.DEFENSE_SUCCESS_TIMEOUT
        return GameOutcome.DEFENSE_SUCCESS_CAPTURE

    @property
    def average_check_number(self) -> float:
        if not self.allocations:
            return 0.0
        return sum(a.check_count for a in self.allocations) / len(self.allocations)

    @property
    def guaranteed_bound(self) -> t.Optional[int]:
        "M - Gamma(first allocation) - N_c(0); None without allocations"
        if not self.allocations:
            return None
        first = self.allocations[0]
        return self.n_attackers - first.gamma - first.n_captured

    @property
    def bound_slack(self) -> t.Optional[int]:
        bound = self.guaranteed_bound
        return None if bound is None else bound - self.payoff

    def check_bound_holds(self) -> t.Optional[bool]:
        """
        Whether every allocation whose active defense sets stayed within the space
        dimension spent fewer checks than the hierarchical bound; None when no
        allocation qualifies.
        """
        relevant = [
            a for a in self.allocations if a.n_active > 0 and a.max_ads_size <= self.dimension
        ]
        if not relevant:
            return None
        return all(a.check_count < check_number_bound(self.dimension, a.n_active) for a in relevant)

    def monotone_gamma(self) -> bool:
        "Gamma + N_c never decreases over the allocation instants"
        values = [a.gamma + a.n_captured for a in self.allocations]
        return all(b >= a for a, b in zip(values, values[1:]))

    def conservation_holds(self) -> bool:
        return all(
            s.count(AttackerStatus.ACTIVE)
            + s.count(AttackerStatus.CAPTURED)
            + s.count(AttackerStatus.REACHED_TARGET)
            == self.n_attackers
            for s in self.snapshots
        )

    def frozen_agents_hold(self) -> bool:
        "positions of resolved attackers never change afterwards"
        for before, after in zip(self.snapshots, self.snapshots[1:]):
            for j, status in enumerate(before.attacker_status):
                if status is not AttackerStatus.ACTIVE and not np.array_equal(
                    before.attacker_positions[j], after.attacker_positions[j]
                ):
                    return False
        return True


def _speed_check(velocity: Vec, limit: float, who: str) -> None:
    if float(np.linalg.norm(velocity)) > limit + _SPEED_TOL:
        raise InvalidInputError(
            f"{who} velocity {np.linalg.norm(velocity):.6g} exceeds its max speed {limit}"
        )


def step(
    state: JointState,
    defender_velocities: t.Sequence[npt.ArrayLike],
    attacker_velocities: t.Sequence[npt.ArrayLike],
    config: ScenarioConfig,
) -> JointState:
    """
    Forward-Euler step with projection onto the domain; statuses are untouched.
    """
    if len(defender_velocities) != config.n_defenders or len(attacker_velocities) != config.n_attackers:
        raise InvalidInputError("one velocity per agent is required")
    n = config.dimension
    defenders = []
    for i, (p, v, spec) in enumerate(
        zip(state.defender_positions, defender_velocities, config.defenders), start=1
    ):
        v = as_vec(v, n, name=f"defender {i} velocity")
        _speed_check(v, spec.max_speed, f"defender {i}")
        defenders.append(project_to_domain(config.domain, p + v * config.dt))
    attackers = []
    for j, (p, v, spec, status) in enumerate(
        zip(state.attacker_positions, attacker_velocities, config.attackers, state.attacker_status),
        start=1,
    ):
        v = as_vec(v, n, name=f"attacker {j} velocity")
        if status is not AttackerStatus.ACTIVE:
            if np.any(v != 0.0):
                raise InvalidInputError(f"attacker {j} is {status.value} and cannot move")
            attackers.append(p)
            continue
        _speed_check(v, spec.max_speed, f"attacker {j}")
        attackers.append(project_to_domain(config.domain, p + v * config.dt))
    k = state.step_index + 1
    return JointState(
        time=k * config.dt,
        step_index=k,
        defender_positions=tuple(defenders),
        attacker_positions=tuple(attackers),
        attacker_status=state.attacker_status,
    )


def update_status(state: JointState, config: ScenarioConfig) -> JointState:
    """
    Resolve active attackers: capture (strictly inside a capture radius) is
    checked before target entry.
    """
    statuses = list(state.attacker_status)
    for j, (p, status) in enumerate(zip(state.attacker_positions, statuses)):
        if status is not AttackerStatus.ACTIVE:
            continue
        if any(
            capture_region_contains(d, p, spec.capture_radius)
            for d, spec in zip(state.defender_positions, config.defenders)
        ):
            statuses[j] = AttackerStatus.CAPTURED
        elif region_contains(config.target, p, EPS_MEMBERSHIP):
            statuses[j] = AttackerStatus.REACHED_TARGET
    return replace(state, attacker_status=tuple(statuses))


def payoff(trace: GameTrace) -> int:
    "number of attackers that reached the target"
    return trace.payoff


def _attacker_inputs(
    team: TeamState,
    config: ScenarioConfig,
    attack_policy: AttackPolicy,
    waypoints: t.Dict[int, Vec],
    counter: CheckCounter,
    rng: np.random.Generator,
    solver_config: t.Optional[SolverConfig],
) -> t.List[Vec]:
    velocities = []
    for j, spec in enumerate(config.attackers, start=1):
        if j not in team.active_attackers:
            velocities.append(np.zeros(config.dimension))
            continue
        p = team.attacker_positions[j]
        if attack_policy is AttackPolicy.RANDOM:
            velocities.append(random_attack_input(spec.max_speed, rng, config.dimension))
            continue
        if attack_policy is AttackPolicy.STRAIGHT_LINE:
            v = straight_line_attack_input(p, spec.max_speed, config.target, solver_config)
            goal = project_to_domain(config.target, p, solver_config)
        else:
            goal = waypoints.get(j)
            if goal is None:
                # no coalition stands against this attacker
                outcome = almost_optimal_waypoint(
                    team.view([], j), config.domain, config.target, counter, solver_config
                )
                goal = outcome.waypoint
            v = spec.max_speed * normalize(goal - p)
        velocities.append(clip_to_arrival(v, p, goal, config.dt))
    return velocities


def run_game(
    config: ScenarioConfig,
    defense_policy: t.Union[DefensePolicy, str] = DefensePolicy.MDEA,
    attack_policy: t.Union[AttackPolicy, str] = AttackPolicy.OPTIMAL,
    solver_config: t.Optional[SolverConfig] = None,
    record_snapshots: bool = True,
) -> GameTrace:
    """
    Play one game to completion.

    Parameters
    ----------
    config : ScenarioConfig
    defense_policy : DefensePolicy
        MDEA reallocates at every allocation time, INITIAL_ONLY keeps the t=0
        allocation for the whole game and NONE never moves the defenders.
    attack_policy : AttackPolicy
    solver_config : SolverConfig, optional
    record_snapshots : bool
        When False only the first and the last joint states are kept.

    Returns
    -------
    GameTrace
    """
    defense_policy = DefensePolicy(defense_policy)
    attack_policy = AttackPolicy(attack_policy)
    rng = np.random.default_rng(np.random.SeedSequence([config.rng_seed, 1]))
    trace = GameTrace(
        defense_policy=defense_policy,
        attack_policy=attack_policy,
        n_attackers=config.n_attackers,
        dimension=config.dimension,
        seed=config.rng_seed,
    )
    state = update_status(config.initial_state(), config)
    trace.snapshots.append(StepRecord.of(state))
    if config.n_attackers == 0:
        trace.termination_reason = TerminationReason.NO_ATTACKERS
        logger.info("game ended at t=0: no attackers")
        return trace

    context = MdeaContext()
    assignment = CoalitionAssignment()
    control = CheckCounter()
    last: t.Optional[StepRecord] = None

    while True:
        if state.n_active == 0:
            trace.termination_reason = TerminationReason.ALL_RESOLVED
            break
        if state.step_index >= config.max_steps:
            trace.termination_reason = TerminationReason.TIMEOUT
            break
        team = state.team_state(config)
        k = state.step_index
        reallocate = defense_policy is DefensePolicy.MDEA or k == 0
        if defense_policy is not DefensePolicy.NONE and k % config.allocation_steps == 0 and reallocate:
            assignment = _allocate(team, config, context, trace, state, solver_config)

        outcomes = coordinate_assignment(
            assignment, team, config.domain, config.target, control, solver_config
        )
        by_defender = velocities_from_outcomes(outcomes, team)
        waypoint_of = {i: outcomes[j].waypoint for j, c in assignment.items() if j in outcomes for i in c}
        defender_velocities = [
            clip_to_arrival(by_defender[i], team.defender_positions[i], waypoint_of[i], config.dt)
            if i in waypoint_of
            else by_defender[i]
            for i in team.defender_ids
        ]
        attacker_velocities = _attacker_inputs(
            team,
            config,
            attack_policy,
            {j: o.waypoint for j, o in outcomes.items()},
            control,
            rng,
            solver_config,
        )
        state = update_status(step(state, defender_velocities, attacker_velocities, config), config)
        last = StepRecord.of(state, {j: o.phi for j, o in outcomes.items()})
        if record_snapshots:
            trace.snapshots.append(last)

    if not record_snapshots and last is not None:
        trace.snapshots.append(last)
    trace.steps = state.step_index
    trace.control_checks = control.count
    if not trace.conservation_holds():
        raise ConsistencyError("attacker statuses do not add up to the team size")
    logger.info(
        "game ended at t=%.2f (%s): %d captured, %d reached, %d active",
        state.time,
        trace.termination_reason.value if trace.termination_reason else "?",
        state.n_captured,
        state.n_reached,
        state.n_active,
    )
    return trace


def _allocate(
    team: TeamState,
    config: ScenarioConfig,
    context: MdeaContext,
    trace: GameTrace,
    state: JointState,
    solver_config: t.Optional[SolverConfig],
) -> CoalitionAssignment:
    counter = CheckCounter()
    report = hilp_detailed(team, config.domain, config.target, counter, solver_config)
    assignment = mdea(team, report.assignment, context, report.evaluations)
    trace.allocations.append(
        AllocationRecord(
            time=state.time,
            assignment=assignment,
            gamma=context.last_gamma,
            n_captured=state.n_captured,
            check_count=report.check_count,
            decision=context.last_decision.value if context.last_decision else "",
            greedy_count=context.last_greedy_count,
            hilp_gamma=report.gamma,
            hilp_iterations=report.iterations,
            first_level_complete=report.first_level_complete,
            max_ads_size=max(report.ads_sizes, default=0),
            n_active=state.n_active,
        )
    )
    return assignment


class AllocationSummary(BaseModel):
    t: float
    gamma: int
    n_captured: int
    check_count: int
    decision: str
    greedy_count: int
    assignment: t.Dict[str, t.List[int]]


class TraceSummary(BaseModel):
    payoff: int
    captures: int
    reached: int
    timeouts: int
    outcome: str
    termination_reason: str
    defense_policy: str
    attack_policy: str
    steps: int
    average_check_number: float
    guaranteed_bound: t.Optional[int] = None
    allocations: t.List[AllocationSummary] = []

    @classmethod
    def from_trace(cls, trace: GameTrace) -> TraceSummary:
        return cls(
            payoff=trace.payoff,
            captures=trace.n_captured,
            reached=trace.n_reached,
            timeouts=trace.n_timed_out,
            outcome=trace.outcome.value,
            termination_reason=trace.termination_reason.value if trace.termination_reason else "",
            defense_policy=trace.defense_policy.value,
            attack_policy=trace.attack_policy.value,
            steps=trace.steps,
            average_check_number=round(trace.average_check_number, 6),
            guaranteed_bound=trace.guaranteed_bound,
            allocations=[
                AllocationSummary(
                    t=round(a.time, 9),
                    gamma=a.gamma,
                    n_captured=a.n_captured,
                    check_count=a.check_count,
                    decision=a.decision,
                    greedy_count=a.greedy_count,
                    assignment=a.assignment.to_dict(),
                )
                for a in trace.allocations
            ],
        )


def trace_frame(trace: GameTrace) -> pd.DataFrame:
    "one row per agent per recorded step"
    axes = ["x", "y", "z"][: trace.dimension]
    rows = []
    for snap in trace.snapshots:
        for i, p in enumerate(snap.defender_positions, start=1):
            rows.append([snap.time, i, "defender", *p.tolist(), ""])
        for j, (p, s) in enumerate(zip(snap.attacker_positions, snap.attacker_status), start=1):
            rows.append([snap.time, j, "attacker", *p.tolist(), s.value])
    return pd.DataFrame(rows, columns=["t", "agent_id", "kind", *axes, "status"])


def write_trace_csv(trace: GameTrace, path: t.Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace_frame(trace).to_csv(path, index=False, float_format="%.9f")
    return path


def write_trace_summary(trace: GameTrace, path: t.Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary = TraceSummary.from_trace(trace)
    path.write_text(json.dumps(summary.model_dump(), sort_keys=True, indent=2) + "\n")
    return path
