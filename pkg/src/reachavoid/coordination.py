"""
Single-attack defense coordination.

A coalition of defenders guards the target against one attacker by steering
toward the almost-optimal waypoint: the point of the attacker's safe-reachable
set closest to the target while that distance is positive (winning mode), or the
attacker's projection onto the part of the target it can still reach safely
(recovery mode).
"""
from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import numpy.typing as npt

from reachavoid.exceptions import InvalidInputError
from reachavoid.geometry import (
    CaptureFrontier,
    ConvexRegion,
    Vec,
    as_vec,
    build_srs,
    capture_frontier_param_gradients,
    project_to_domain,
)
from reachavoid.run_config import EPS_WIN, SolverConfig
from reachavoid.solver import (
    CheckCounter,
    SolveResult,
    SolveStatus,
    solve_min_distance,
    solve_projection,
)
from reachavoid.utils import normalize

logger = logging.getLogger(__name__)


class CoordinationMode(str, Enum):
    WINNING = "WinningMode"
    RECOVERY = "RecoveryMode"


@dataclass(frozen=True)
class CoalitionView:
    """
    Joint state of one coalition of defenders and the attacker it faces.

    `gammas[i]` is the speed ratio of defender i over the attacker.
    """

    defender_ids: t.Tuple[int, ...]
    defender_positions: t.Tuple[Vec, ...]
    gammas: t.Tuple[float, ...]
    radii: t.Tuple[float, ...]
    max_speeds: t.Tuple[float, ...]
    attacker_id: int
    attacker_position: Vec
    attacker_max_speed: float

    def __post_init__(self):
        n = len(self.defender_ids)
        lengths = {
            len(self.defender_positions),
            len(self.gammas),
            len(self.radii),
            len(self.max_speeds),
        }
        if lengths != {n}:
            raise InvalidInputError(
                "defender ids, positions, gammas, radii and speeds must have equal lengths"
            )
        if len(set(self.defender_ids)) != n:
            raise InvalidInputError(f"duplicate defender ids in {self.defender_ids}")
        a = as_vec(self.attacker_position, name="attacker position")
        object.__setattr__(self, "attacker_position", a)
        object.__setattr__(
            self,
            "defender_positions",
            tuple(
                as_vec(p, a.shape[0], name=f"defender {i} position")
                for i, p in zip(self.defender_ids, self.defender_positions)
            ),
        )
        if self.attacker_max_speed <= 0:
            raise InvalidInputError(
                f"attacker max speed must be positive, got {self.attacker_max_speed}"
            )
        for i, gamma, speed in zip(self.defender_ids, self.gammas, self.max_speeds):
            if gamma < 1.0:
                raise InvalidInputError(
                    f"defender {i} is slower than attacker {self.attacker_id} (gamma={gamma})"
                )
            if abs(gamma * self.attacker_max_speed - speed) > 1e-9 * max(1.0, speed):
                raise InvalidInputError(
                    f"gamma of defender {i} does not match its speed ratio"
                )

    @classmethod
    def create(
        cls,
        defender_ids: t.Sequence[int],
        defender_positions: t.Sequence[npt.ArrayLike],
        max_speeds: t.Sequence[float],
        radii: t.Sequence[float],
        attacker_id: int,
        attacker_position: npt.ArrayLike,
        attacker_max_speed: float,
    ) -> CoalitionView:
        "build a view with the speed ratios derived from the max speeds"
        return cls(
            defender_ids=tuple(int(i) for i in defender_ids),
            defender_positions=tuple(as_vec(p) for p in defender_positions),
            gammas=tuple(float(s) / attacker_max_speed for s in max_speeds),
            radii=tuple(float(r) for r in radii),
            max_speeds=tuple(float(s) for s in max_speeds),
            attacker_id=int(attacker_id),
            attacker_position=as_vec(attacker_position),
            attacker_max_speed=float(attacker_max_speed),
        )

    @property
    def dim(self) -> int:
        return self.attacker_position.shape[0]

    def srs(self, domain: ConvexRegion) -> ConvexRegion:
        return build_srs(
            self.defender_positions,
            self.attacker_position,
            self.gammas,
            self.radii,
            domain,
        )

    def restrict(self, defender_ids: t.Iterable[int]) -> CoalitionView:
        "view of a sub-coalition, keeping the original defender order"
        keep = set(defender_ids)
        idx = [k for k, i in enumerate(self.defender_ids) if i in keep]
        return CoalitionView(
            defender_ids=tuple(self.defender_ids[k] for k in idx),
            defender_positions=tuple(self.defender_positions[k] for k in idx),
            gammas=tuple(self.gammas[k] for k in idx),
            radii=tuple(self.radii[k] for k in idx),
            max_speeds=tuple(self.max_speeds[k] for k in idx),
            attacker_id=self.attacker_id,
            attacker_position=self.attacker_position,
            attacker_max_speed=self.attacker_max_speed,
        )


@dataclass
class CoordinationOutcome:
    phi: float
    waypoint: Vec
    mode: CoordinationMode
    defender_velocities: t.Dict[int, Vec] = field(default_factory=dict)
    # recovery projection failed and the winning waypoint was kept
    fallback: bool = False


@dataclass
class ValueGradients:
    """
    Gradients of the single-attack value (or of the recovery value) with respect
    to the defender positions and to the attacker position.
    """

    phi: float
    mode: CoordinationMode
    defenders: t.Dict[int, Vec]
    attacker: Vec


def solve_single_attack(
    view: CoalitionView,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> SolveResult:
    "minimum distance program between the safe-reachable set and the target (one check)"
    return solve_min_distance(view.srs(domain), target, counter, config=config)


def _phi(result: SolveResult) -> float:
    if result.status is SolveStatus.INFEASIBLE:
        return np.inf
    return float(result.value)


def single_attack_value(
    view: CoalitionView,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> t.Tuple[float, t.Optional[Vec]]:
    """
    Squared distance between the attacker's safe-reachable set and the target,
    and the closest point of the safe-reachable set.

    An empty safe-reachable set (the attacker sits inside a capture region) gives
    an infinite value and no waypoint.
    """
    result = solve_single_attack(view, domain, target, counter, config)
    if result.status is SolveStatus.INFEASIBLE:
        return np.inf, None
    return _phi(result), result.primal_q


def is_defense_winning(
    view: CoalitionView,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> bool:
    phi, _ = single_attack_value(view, domain, target, counter, config)
    return phi > EPS_WIN


def almost_optimal_waypoint(
    view: CoalitionView,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> CoordinationOutcome:
    """
    Waypoint shared by the coalition and the optimal attacker, without velocities.
    """
    result = solve_single_attack(view, domain, target, counter, config)
    phi = _phi(result)
    if result.status is SolveStatus.INFEASIBLE:
        # captured already; the coalition closes in on the attacker
        return CoordinationOutcome(
            phi=phi, waypoint=view.attacker_position.copy(), mode=CoordinationMode.WINNING
        )
    if phi > EPS_WIN:
        return CoordinationOutcome(
            phi=phi, waypoint=result.primal_q, mode=CoordinationMode.WINNING
        )

    reachable_target = view.srs(domain).intersect(target)
    projection = solve_projection(
        view.attacker_position, reachable_target, counter, config=config
    )
    if projection.status is SolveStatus.INFEASIBLE:
        logger.warning(
            "attacker %d: reachable part of the target is empty at phi=%.3e, keeping the winning waypoint",
            view.attacker_id,
            phi,
        )
        return CoordinationOutcome(
            phi=phi,
            waypoint=result.primal_q,
            mode=CoordinationMode.WINNING,
            fallback=True,
        )
    return CoordinationOutcome(
        phi=phi, waypoint=projection.primal_q, mode=CoordinationMode.RECOVERY
    )


def dmsdc_step(
    view: CoalitionView,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> CoordinationOutcome:
    """
    Dual-mode switching defense coordination for one coalition.

    Every defender runs at full speed toward the almost-optimal waypoint.
    """
    outcome = almost_optimal_waypoint(view, domain, target, counter, config)
    outcome.defender_velocities = {
        i: speed * normalize(outcome.waypoint - p)
        for i, p, speed in zip(view.defender_ids, view.defender_positions, view.max_speeds)
    }
    return outcome


def optimal_attack_input(
    view: CoalitionView,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> Vec:
    outcome = almost_optimal_waypoint(view, domain, target, counter, config)
    return attack_velocity(view, outcome)


def attack_velocity(view: CoalitionView, outcome: CoordinationOutcome) -> Vec:
    "full speed toward the waypoint of an already computed outcome"
    return view.attacker_max_speed * normalize(outcome.waypoint - view.attacker_position)


def straight_line_attack_input(
    attacker_position: npt.ArrayLike,
    attacker_max_speed: float,
    target: ConvexRegion,
    config: t.Optional[SolverConfig] = None,
) -> Vec:
    p = as_vec(attacker_position, target.dim, name="attacker position")
    nearest = project_to_domain(target, p, solver_config=config)
    return attacker_max_speed * normalize(nearest - p)


def random_attack_input(
    attacker_max_speed: float, rng: np.random.Generator, dim: int
) -> Vec:
    "velocity drawn uniformly from the ball of admissible inputs"
    direction = normalize(rng.standard_normal(dim))
    radius = attacker_max_speed * float(rng.random()) ** (1.0 / dim)
    return radius * direction


def value_gradients(
    view: CoalitionView,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> ValueGradients:
    """
    Gradients of the coordination value from the optimal multipliers.

    In winning mode the value is the minimum distance to the target; in recovery
    mode it is the squared distance from the attacker to the reachable part of the
    target, which adds -2 (waypoint - attacker) to the attacker gradient.
    """
    n_domain = len(domain.atoms)
    result = solve_single_attack(view, domain, target, counter, config)
    phi = _phi(result)
    mode = CoordinationMode.WINNING
    attacker_grad = np.zeros(view.dim)
    if phi <= EPS_WIN:
        mode = CoordinationMode.RECOVERY
        result = solve_projection(
            view.attacker_position,
            view.srs(domain).intersect(target),
            counter,
            config=config,
        )
        phi = _phi(result)
        attacker_grad = -2.0 * (result.primal_q - view.attacker_position)

    defenders: t.Dict[int, Vec] = {}
    for k, i in enumerate(view.defender_ids):
        lam = float(result.multipliers[n_domain + k]) if result.optimal else 0.0
        if lam == 0.0:
            defenders[i] = np.zeros(view.dim)
            continue
        atom = t.cast(CaptureFrontier, result.atoms[n_domain + k])
        grad_d, grad_a = capture_frontier_param_gradients(atom, result.primal_q)
        defenders[i] = lam * grad_d
        attacker_grad = attacker_grad + lam * grad_a
    return ValueGradients(phi=phi, mode=mode, defenders=defenders, attacker=attacker_grad)
