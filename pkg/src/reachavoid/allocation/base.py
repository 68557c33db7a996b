from __future__ import annotations

import itertools
import logging
import typing as t
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import numpy.typing as npt

from reachavoid.coordination import CoalitionView, solve_single_attack
from reachavoid.exceptions import ConsistencyError, InvalidInputError
from reachavoid.geometry import ConvexRegion, Vec, as_vec
from reachavoid.run_config import EPS_WIN, SolverConfig
from reachavoid.solver import CheckCounter, SolveResult, SolveStatus

logger = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class Coalition:
    """
    Nonempty set of defender ids, stored sorted so coalitions compare
    lexicographically.
    """

    defender_ids: t.Tuple[int, ...]

    def __post_init__(self):
        ids = tuple(sorted({int(i) for i in self.defender_ids}))
        if not ids:
            raise InvalidInputError("a coalition needs at least one defender")
        if ids[0] < 1:
            raise InvalidInputError(f"defender ids start at 1, got {ids}")
        object.__setattr__(self, "defender_ids", ids)

    @classmethod
    def of(cls, *ids: int) -> Coalition:
        return cls(tuple(ids))

    def __iter__(self) -> t.Iterator[int]:
        return iter(self.defender_ids)

    def __len__(self) -> int:
        return len(self.defender_ids)

    def __contains__(self, i: object) -> bool:
        return i in self.defender_ids

    def isdisjoint(self, other: t.Iterable[int]) -> bool:
        return set(self.defender_ids).isdisjoint(other)

    def subsets(self, size: int) -> t.Iterator[Coalition]:
        for ids in itertools.combinations(self.defender_ids, size):
            yield Coalition(ids)

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in self.defender_ids) + "}"


@dataclass
class CoalitionAssignment:
    """
    Sparse coalition assignment: attacker id -> coalition of defenders.

    Keys are unique by construction (each attacker has at most one coalition);
    the coalitions must be pairwise disjoint (each defender serves at most one
    attacker).
    """

    pairs: t.Dict[int, Coalition] = field(default_factory=dict)

    def __post_init__(self):
        self.pairs = {int(j): c for j, c in sorted(self.pairs.items())}
        seen: t.Set[int] = set()
        for j, coalition in self.pairs.items():
            if not coalition.isdisjoint(seen):
                raise ConsistencyError(
                    f"defenders {sorted(seen & set(coalition))} are assigned to more than one attacker"
                )
            seen.update(coalition)

    def __len__(self) -> int:
        return len(self.pairs)

    def __bool__(self) -> bool:
        return bool(self.pairs)

    def items(self) -> t.List[t.Tuple[int, Coalition]]:
        return list(self.pairs.items())

    @property
    def attackers(self) -> t.Set[int]:
        return set(self.pairs)

    @property
    def defenders(self) -> t.Set[int]:
        return {i for c in self.pairs.values() for i in c}

    def restricted_to(self, attacker_ids: t.Iterable[int]) -> CoalitionAssignment:
        "drop the pairs of attackers outside `attacker_ids`"
        keep = set(attacker_ids)
        return CoalitionAssignment({j: c for j, c in self.pairs.items() if j in keep})

    def merged(self, other: CoalitionAssignment) -> CoalitionAssignment:
        overlap = self.attackers & other.attackers
        if overlap:
            raise ConsistencyError(f"attackers {sorted(overlap)} assigned twice")
        return CoalitionAssignment({**self.pairs, **other.pairs})

    def as_key(self) -> t.Tuple[t.Tuple[int, t.Tuple[int, ...]], ...]:
        return tuple((j, c.defender_ids) for j, c in self.pairs.items())

    def to_dict(self) -> t.Dict[str, t.List[int]]:
        return {str(j): list(c.defender_ids) for j, c in self.pairs.items()}


@dataclass(frozen=True)
class PairEvaluation:
    coalition: Coalition
    attacker_id: int
    reward: int
    phi: float
    waypoint: t.Optional[Vec] = None
    ads: t.Optional[Coalition] = None

    @property
    def key(self) -> t.Tuple[int, t.Tuple[int, ...]]:
        return (self.attacker_id, self.coalition.defender_ids)


class MdeaDecision(str, Enum):
    ADOPT = "adopt"
    KEEP = "keep"
    EMPTY = "empty"


@dataclass
class MdeaContext:
    """
    Memory of the monotonic enhancement step between allocation times.

    `previous_assignment` is the assignment before greedy completion.
    """

    previous_assignment: CoalitionAssignment = field(default_factory=CoalitionAssignment)
    previous_active: t.FrozenSet[int] = frozenset()
    initialized: bool = False
    last_decision: t.Optional[MdeaDecision] = None
    last_gamma: int = 0
    last_greedy_count: int = 0


@dataclass(frozen=True)
class TeamState:
    """
    Positions and capabilities of every agent at one allocation instant.
    """

    defender_positions: t.Dict[int, Vec]
    defender_speeds: t.Dict[int, float]
    capture_radii: t.Dict[int, float]
    attacker_positions: t.Dict[int, Vec]
    attacker_speeds: t.Dict[int, float]
    active_attackers: t.Tuple[int, ...]

    def __post_init__(self):
        if set(self.defender_positions) != set(self.defender_speeds) or set(
            self.defender_positions
        ) != set(self.capture_radii):
            raise InvalidInputError("defender positions, speeds and radii disagree on ids")
        if set(self.attacker_positions) != set(self.attacker_speeds):
            raise InvalidInputError("attacker positions and speeds disagree on ids")
        unknown = set(self.active_attackers) - set(self.attacker_positions)
        if unknown:
            raise InvalidInputError(f"unknown active attackers {sorted(unknown)}")
        object.__setattr__(self, "active_attackers", tuple(sorted(self.active_attackers)))

    @classmethod
    def from_arrays(
        cls,
        defender_positions: t.Sequence[npt.ArrayLike],
        defender_speeds: t.Sequence[float],
        capture_radii: t.Sequence[float],
        attacker_positions: t.Sequence[npt.ArrayLike],
        attacker_speeds: t.Sequence[float],
        active: t.Optional[t.Sequence[bool]] = None,
    ) -> TeamState:
        "build a state with 1-based ids from positional lists"
        if active is None:
            active = [True] * len(attacker_positions)
        return cls(
            defender_positions={i + 1: as_vec(p) for i, p in enumerate(defender_positions)},
            defender_speeds={i + 1: float(s) for i, s in enumerate(defender_speeds)},
            capture_radii={i + 1: float(r) for i, r in enumerate(capture_radii)},
            attacker_positions={j + 1: as_vec(p) for j, p in enumerate(attacker_positions)},
            attacker_speeds={j + 1: float(s) for j, s in enumerate(attacker_speeds)},
            active_attackers=tuple(j + 1 for j, a in enumerate(active) if a),
        )

    @property
    def defender_ids(self) -> t.Tuple[int, ...]:
        return tuple(sorted(self.defender_positions))

    @property
    def dim(self) -> int:
        some = next(iter(self.attacker_positions.values()), None)
        if some is None:
            some = next(iter(self.defender_positions.values()))
        return int(some.shape[0])

    def view(self, coalition: t.Iterable[int], attacker_id: int) -> CoalitionView:
        ids = sorted(coalition)
        return CoalitionView.create(
            defender_ids=ids,
            defender_positions=[self.defender_positions[i] for i in ids],
            max_speeds=[self.defender_speeds[i] for i in ids],
            radii=[self.capture_radii[i] for i in ids],
            attacker_id=attacker_id,
            attacker_position=self.attacker_positions[attacker_id],
            attacker_max_speed=self.attacker_speeds[attacker_id],
        )


def gamma_value(
    assignment: CoalitionAssignment,
    evaluations: t.Union[
        t.Mapping[t.Tuple[int, t.Tuple[int, ...]], PairEvaluation],
        t.Iterable[PairEvaluation],
    ],
) -> int:
    """
    Expected number of attackers the assignment stops: the sum of the rewards of
    the assigned pairs.
    """
    if not isinstance(evaluations, t.Mapping):
        evaluations = {e.key: e for e in evaluations}
    total = 0
    for j, coalition in assignment.items():
        key = (j, coalition.defender_ids)
        if key not in evaluations:
            raise InvalidInputError(
                f"no evaluation for attacker {j} against coalition {coalition}"
            )
        total += evaluations[key].reward
    return total


def assignment_rule(
    assignment: CoalitionAssignment, defender_ids: t.Iterable[int]
) -> t.Dict[int, t.Optional[int]]:
    "map each defender to the attacker it serves, None when idle"
    served = {i: j for j, c in assignment.items() for i in c}
    return {i: served.get(i) for i in sorted(defender_ids)}


def assignment_matrix(
    assignment: CoalitionAssignment,
    n_defenders: int,
    attacker_ids: t.Sequence[int],
) -> npt.NDArray[np.int64]:
    """
    Dense 0/1 defender-by-attacker matrix; row i-1 belongs to defender i.
    """
    column = {j: k for k, j in enumerate(attacker_ids)}
    matrix = np.zeros((n_defenders, len(attacker_ids)), dtype=np.int64)
    for j, coalition in assignment.items():
        if j not in column:
            raise InvalidInputError(f"attacker {j} is not among {list(attacker_ids)}")
        for i in coalition:
            if not 1 <= i <= n_defenders:
                raise InvalidInputError(f"defender {i} out of range 1..{n_defenders}")
            matrix[i - 1, column[j]] = 1
    return matrix


def validate_assignment(
    assignment: CoalitionAssignment, state: TeamState
) -> None:
    "structural checks against a team state; raises ConsistencyError"
    unknown_d = assignment.defenders - set(state.defender_positions)
    unknown_a = assignment.attackers - set(state.attacker_positions)
    if unknown_d or unknown_a:
        raise ConsistencyError(
            f"assignment references unknown defenders {sorted(unknown_d)} or attackers {sorted(unknown_a)}"
        )
    # the constructor already enforces disjoint coalitions
    CoalitionAssignment(dict(assignment.pairs))


def active_defense_set(
    view: CoalitionView,
    solve_result: SolveResult,
    eps_active: t.Optional[float] = None,
) -> Coalition:
    """
    Defenders whose capture frontiers are active at the waypoint of a feasible
    pair.

    Raises
    ------
    ConsistencyError
        When no frontier is active, which cannot happen at a feasible pair.
    """
    indices = set(
        solve_result.active_set
        if eps_active is None
        else [i for i in range(len(solve_result.atoms)) if _active(solve_result, i, eps_active)]
    )
    n_domain = solve_result.n_atoms_q - len(view.defender_ids)
    ids = [
        view.defender_ids[k]
        for k in range(len(view.defender_ids))
        if n_domain + k in indices
    ]
    if not ids:
        raise ConsistencyError(
            f"no active capture frontier for attacker {view.attacker_id} at a feasible pair"
        )
    return Coalition(tuple(ids))


def _active(result: SolveResult, index: int, eps: float) -> bool:
    point = result.primal_q if index < result.n_atoms_q else result.primal_qtilde
    return abs(result.atoms[index].value(t.cast(Vec, point))) <= eps


def evaluate_pair(
    coalition: Coalition,
    attacker_id: int,
    state: TeamState,
    domain: ConvexRegion,
    target: ConvexRegion,
    counter: CheckCounter,
    config: t.Optional[SolverConfig] = None,
) -> PairEvaluation:
    """
    Reward of one coalition-attacker pair, counted as one check. Feasible pairs
    also carry their active defense set.
    """
    if attacker_id not in state.active_attackers:
        return PairEvaluation(coalition, attacker_id, reward=0, phi=0.0)
    view = state.view(coalition, attacker_id)
    result = solve_single_attack(view, domain, target, counter, config)
    if result.status is SolveStatus.INFEASIBLE:
        # the attacker sits inside a capture region of the coalition
        return PairEvaluation(
            coalition,
            attacker_id,
            reward=1,
            phi=np.inf,
            waypoint=view.attacker_position,
            ads=coalition,
        )
    phi = float(result.value)
    if phi <= EPS_WIN:
        return PairEvaluation(coalition, attacker_id, reward=0, phi=phi, waypoint=result.primal_q)
    return PairEvaluation(
        coalition,
        attacker_id,
        reward=1,
        phi=phi,
        waypoint=result.primal_q,
        ads=active_defense_set(view, result),
    )
