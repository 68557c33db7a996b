from __future__ import annotations

import typing as t

import numpy as np
import pytest

from reachavoid.coordination import CoalitionView
from reachavoid.engine import AttackerSpec, DefenderSpec, ScenarioConfig
from reachavoid.geometry import ConvexRegion, ball_region, box


def make_view(
    defenders: t.Sequence[t.Sequence[float]],
    attacker: t.Sequence[float],
    speeds: t.Optional[t.Sequence[float]] = None,
    radii: t.Optional[t.Sequence[float]] = None,
    attacker_speed: float = 1.0,
) -> CoalitionView:
    n = len(defenders)
    return CoalitionView.create(
        defender_ids=list(range(1, n + 1)),
        defender_positions=[np.array(d, dtype=float) for d in defenders],
        max_speeds=speeds if speeds is not None else [1.0] * n,
        radii=radii if radii is not None else [0.0] * n,
        attacker_id=1,
        attacker_position=np.array(attacker, dtype=float),
        attacker_max_speed=attacker_speed,
    )


def make_scenario(
    defenders: t.Sequence[t.Tuple[t.Sequence[float], float, float]],
    attackers: t.Sequence[t.Tuple[t.Sequence[float], float]],
    domain: t.Optional[ConvexRegion] = None,
    target: t.Optional[ConvexRegion] = None,
    **kwargs: t.Any,
) -> ScenarioConfig:
    "defenders as (position, max_speed, capture_radius), attackers as (position, max_speed)"
    domain = domain if domain is not None else box([-5.0, -5.0], [5.0, 5.0])
    target = target if target is not None else ball_region([0.0, 3.0], 1.0)
    return ScenarioConfig(
        dimension=domain.dim,
        domain=domain,
        target=target,
        defenders=tuple(DefenderSpec(np.array(p, dtype=float), s, r) for p, s, r in defenders),
        attackers=tuple(AttackerSpec(np.array(p, dtype=float), s) for p, s in attackers),
        **kwargs,
    ).validate()


@pytest.fixture
def square() -> ConvexRegion:
    return box([-5.0, -5.0], [5.0, 5.0])


@pytest.fixture
def target_ball() -> ConvexRegion:
    return ball_region([0.0, 3.0], 1.0)


@pytest.fixture
def bisector_view() -> CoalitionView:
    # equal speeds, no capture radius: the safe-reachable set is the half-plane y <= 0
    return make_view([[0.0, 2.0]], [0.0, -2.0])


@pytest.fixture
def apollonius_view() -> CoalitionView:
    # defender twice as fast: safe region is the disk centered (-1, 0) of radius 2
    return make_view([[3.0, 0.0]], [0.0, 0.0], speeds=[2.0])


@pytest.fixture
def duel() -> ScenarioConfig:
    "one defender guarding the target against one attacker coming from below"
    return make_scenario(
        defenders=[([0.0, 2.0], 1.0, 0.5)],
        attackers=[([0.0, -2.0], 1.0)],
        dt=0.05,
        allocation_period=0.1,
        t_max=5.0,
    )


@pytest.fixture
def view_factory() -> t.Callable[..., CoalitionView]:
    return make_view


@pytest.fixture
def scenario_factory() -> t.Callable[..., ScenarioConfig]:
    return make_scenario
