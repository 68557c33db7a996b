"""
Scenario templates and randomized initial joint states.
"""
from __future__ import annotations

import logging
import typing as t
from dataclasses import dataclass, field, replace

import numpy as np

from reachavoid.engine import AttackerSpec, DefenderSpec, ScenarioConfig
from reachavoid.exceptions import ConfigurationError
from reachavoid.geometry import (
    ConvexRegion,
    ball_region,
    box,
    capture_region_contains,
    cylinder_region,
    halfspace,
    point_region,
    region_bounds,
    region_contains,
)
from reachavoid.run_config import EPS_MEMBERSHIP

logger = logging.getLogger(__name__)

MAX_SAMPLING_ATTEMPTS = 10_000


@dataclass(frozen=True)
class ScenarioTemplate:
    """
    Recipe for random scenarios.

    Team sizes and capture radii are drawn uniformly from the listed choices;
    with `matched_teams` the attacker team is as large as the defender team.
    Positions are drawn uniformly in the domain.

    Attributes
    ----------
    name : str
    dimension : int
    domain : ConvexRegion
        Must be bounded along every axis.
    target : ConvexRegion
    n_defenders : tuple of int
    n_attackers : tuple of int
    capture_radii : tuple of float
    defender_speed : float
    attacker_speed : float
    matched_teams : bool
    dt, allocation_period, t_max : float
    """

    name: str
    dimension: int
    domain: ConvexRegion
    target: ConvexRegion
    n_defenders: t.Tuple[int, ...] = (2, 3)
    n_attackers: t.Tuple[int, ...] = (1,)
    capture_radii: t.Tuple[float, ...] = (0.5,)
    defender_speed: float = 1.0
    attacker_speed: float = 1.0
    matched_teams: bool = False
    dt: float = 1e-2
    allocation_period: float = 1e-1
    t_max: float = 120.0

    def validate(self) -> ScenarioTemplate:
        if self.dimension not in (2, 3):
            raise ConfigurationError(f"dimension must be 2 or 3, got {self.dimension}", "dimension")
        if not self.n_defenders or min(self.n_defenders) < 0:
            raise ConfigurationError("n_defenders needs nonnegative choices", "n_defenders")
        if not self.matched_teams and (not self.n_attackers or min(self.n_attackers) < 0):
            raise ConfigurationError("n_attackers needs nonnegative choices", "n_attackers")
        if not self.capture_radii or min(self.capture_radii) < 0:
            raise ConfigurationError("capture radii must be >= 0", "capture_radii")
        if not (self.defender_speed > 0 and self.attacker_speed > 0):
            raise ConfigurationError("speeds must be positive", "speeds")
        if self.defender_speed < self.attacker_speed:
            raise ConfigurationError(
                f"speed ratio {self.defender_speed / self.attacker_speed:.6g} < 1: "
                "defenders must be at least as fast as the attackers",
                "defender_speed",
            )
        lower, upper = region_bounds(self.domain)
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ConfigurationError("domain must be bounded to sample positions", "domain")
        return self

    def with_overrides(self, **changes: t.Any) -> ScenarioTemplate:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)


@dataclass(frozen=True)
class BenchSpec:
    """
    A batch of randomized trials: every trial plays each policy pair on the same
    sampled scenario.
    """

    template: ScenarioTemplate
    trials: int = 10
    seed: int = 0
    defense_policies: t.Tuple[str, ...] = ("mdea",)
    attack_policies: t.Tuple[str, ...] = ("optimal",)
    out_dir: str = "bench-out"
    emit_plots: bool = False
    record_traces: bool = True
    # resample a trial until the smallest initial single-attack value lies in this window
    initial_phi_min: t.Optional[float] = None
    initial_phi_max: t.Optional[float] = None

    def validate(self) -> BenchSpec:
        if self.trials < 1:
            raise ConfigurationError(f"trial count must be >= 1, got {self.trials}", "trials")
        if not self.defense_policies or not self.attack_policies:
            raise ConfigurationError("policy matrix is empty", "policies")
        lo, hi = self.initial_phi_min, self.initial_phi_max
        if lo is not None and hi is not None and lo > hi:
            raise ConfigurationError(f"initial value window [{lo}, {hi}] is empty", "initial_phi_min")
        self.template.validate()
        return self

    def with_overrides(self, **changes: t.Any) -> BenchSpec:
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)


@dataclass
class _Sampler:
    rng: np.random.Generator
    lower: np.ndarray
    upper: np.ndarray
    attempts: int = 0
    rejected: t.Dict[str, int] = field(default_factory=dict)

    def draw(self) -> np.ndarray:
        self.attempts += 1
        if self.attempts > MAX_SAMPLING_ATTEMPTS:
            reasons = ", ".join(f"{k}={v}" for k, v in sorted(self.rejected.items()))
            raise ConfigurationError(
                f"no clean initial state after {MAX_SAMPLING_ATTEMPTS} samples ({reasons})",
                "template",
            )
        return self.rng.uniform(self.lower, self.upper)

    def reject(self, reason: str) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + 1


def generate_random_scenario(template: ScenarioTemplate, seed: int) -> ScenarioConfig:
    """
    Sample one scenario from `template`; the same seed gives the same scenario.

    Defenders are drawn uniformly in the domain, then every attacker is drawn
    uniformly and resampled while it lies in the target or in a capture region.

    Raises
    ------
    ConfigurationError
        When the template is invalid or the sampler gives up.
    """
    template.validate()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    n_def = int(rng.choice(template.n_defenders))
    n_att = n_def if template.matched_teams else int(rng.choice(template.n_attackers))
    lower, upper = region_bounds(template.domain)
    sampler = _Sampler(rng, lower, upper)

    defenders: t.List[DefenderSpec] = []
    while len(defenders) < n_def:
        p = sampler.draw()
        if not region_contains(template.domain, p, EPS_MEMBERSHIP):
            sampler.reject("outside domain")
            continue
        radius = float(rng.choice(template.capture_radii))
        defenders.append(DefenderSpec(p, template.defender_speed, radius))

    attackers: t.List[AttackerSpec] = []
    while len(attackers) < n_att:
        p = sampler.draw()
        if not region_contains(template.domain, p, EPS_MEMBERSHIP):
            sampler.reject("outside domain")
        elif region_contains(template.target, p, 0.0):
            sampler.reject("inside target")
        elif any(capture_region_contains(d.position, p, d.capture_radius) for d in defenders):
            sampler.reject("captured at start")
        else:
            attackers.append(AttackerSpec(p, template.attacker_speed))

    logger.debug(
        "%s seed %d: %d defenders, %d attackers after %d samples",
        template.name,
        seed,
        n_def,
        n_att,
        sampler.attempts,
    )
    return ScenarioConfig(
        dimension=template.dimension,
        domain=template.domain,
        target=template.target,
        defenders=tuple(defenders),
        attackers=tuple(attackers),
        dt=template.dt,
        allocation_period=template.allocation_period,
        t_max=template.t_max,
        rng_seed=seed,
    ).validate()


def _single_2d() -> ScenarioTemplate:
    return ScenarioTemplate(
        name="single-2d",
        dimension=2,
        domain=box([-5.0, -5.0], [5.0, 5.0]),
        target=ball_region([0.0, 0.0], 1.0),
        n_defenders=(2, 3),
        n_attackers=(1,),
        capture_radii=(0.5, 3.0),
    )


def _single_3d() -> ScenarioTemplate:
    return ScenarioTemplate(
        name="single-3d",
        dimension=3,
        domain=box([-5.0] * 3, [5.0] * 3),
        target=point_region([0.0, 0.0, 0.0]),
        n_defenders=(2, 3),
        n_attackers=(1,),
        capture_radii=(0.1, 2.0),
    )


def _multi_2d() -> ScenarioTemplate:
    # the wall y = 5 of the domain
    return ScenarioTemplate(
        name="multi-2d",
        dimension=2,
        domain=box([-5.0, -5.0], [5.0, 5.0]),
        target=halfspace([0.0, -1.0], 5.0),
        n_defenders=(10, 20, 30, 40, 50),
        capture_radii=(0.05,),
        matched_teams=True,
    )


def _multi_3d() -> ScenarioTemplate:
    # the floor z = -5 of the domain
    return ScenarioTemplate(
        name="multi-3d",
        dimension=3,
        domain=box([-5.0] * 3, [5.0] * 3),
        target=halfspace([0.0, 0.0, 1.0], 5.0),
        n_defenders=(10, 20, 30, 40, 50),
        capture_radii=(0.2,),
        matched_teams=True,
    )


def _indoor_2d() -> ScenarioTemplate:
    # walled square with a strip along the north wall as target
    return ScenarioTemplate(
        name="indoor-2d",
        dimension=2,
        domain=box([-2.0, -2.0], [2.0, 2.0]),
        target=box([-0.75, 1.5], [0.75, 2.0]),
        n_defenders=(3,),
        n_attackers=(5,),
        capture_radii=(0.6,),
        defender_speed=0.22,
        attacker_speed=0.22,
        dt=2e-2,
    )


def _nofly_3d() -> ScenarioTemplate:
    return ScenarioTemplate(
        name="nofly-3d",
        dimension=3,
        domain=box([-5.0, -5.0, 0.0], [5.0, 5.0, 5.0]),
        target=cylinder_region(2, [0.0, 0.0], 1.0),
        n_defenders=(5,),
        n_attackers=(5,),
        capture_radii=(1.5,),
        defender_speed=0.8,
        attacker_speed=0.8,
        dt=2e-2,
    )


PRESETS: t.Dict[str, t.Callable[[], ScenarioTemplate]] = {
    "single-2d": _single_2d,
    "single-3d": _single_3d,
    "multi-2d": _multi_2d,
    "multi-3d": _multi_3d,
    "indoor-2d": _indoor_2d,
    "nofly-3d": _nofly_3d,
}


def get_preset(name: str) -> ScenarioTemplate:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}, choose from {sorted(PRESETS)}", "preset"
        ) from None
