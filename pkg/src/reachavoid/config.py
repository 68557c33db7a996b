"""
JSON configuration files for single games and benchmark batches.

A scenario file describes one game::

    {
      "dimension": 2,
      "domain": {"shape": "box", "lower": [-5, -5], "upper": [5, 5]},
      "target": {"shape": "ball", "center": [0, 0], "radius": 1},
      "defenders": [{"position": [3, 0], "max_speed": 1, "capture_radius": 0.5}],
      "attackers": [{"position": [-4, 4], "max_speed": 1}],
      "dt": 0.01, "allocation_period": 0.1, "t_max": 120, "seed": 0
    }

A region is a single shape or a list of shapes, read as their intersection.
A bench file names a preset or spells out a template, plus the trial count and
the policy matrix. All quantities are in SI units.
"""
from __future__ import annotations

import json
import logging
import re
import typing as t
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from reachavoid.bench.scenarios import BenchSpec, ScenarioTemplate, get_preset
from reachavoid.engine import (
    AttackerSpec,
    AttackPolicy,
    DefenderSpec,
    DefensePolicy,
    ScenarioConfig,
)
from reachavoid.exceptions import ConfigurationError, InvalidInputError
from reachavoid.geometry import (
    ConvexRegion,
    ball_region,
    box,
    cylinder_region,
    halfspace,
    point_region,
)

logger = logging.getLogger(__name__)

_AXES = {"x": 0, "y": 1, "z": 2}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BoxShape(_Strict):
    shape: t.Literal["box"]
    lower: t.List[float]
    upper: t.List[float]

    def build(self) -> ConvexRegion:
        return box(self.lower, self.upper)


class BallShape(_Strict):
    shape: t.Literal["ball"]
    center: t.List[float]
    radius: float = Field(ge=0)

    def build(self) -> ConvexRegion:
        return ball_region(self.center, self.radius)


class PointShape(_Strict):
    shape: t.Literal["point"]
    position: t.List[float]

    def build(self) -> ConvexRegion:
        return point_region(self.position)


class HalfspaceShape(_Strict):
    "{q : normal . q + offset <= 0}"

    shape: t.Literal["halfspace"]
    normal: t.List[float]
    offset: float

    def build(self) -> ConvexRegion:
        return halfspace(self.normal, self.offset)


class CylinderShape(_Strict):
    shape: t.Literal["cylinder"]
    axis: t.Union[int, t.Literal["x", "y", "z"]]
    center: t.List[float]
    radius: float = Field(ge=0)

    def build(self) -> ConvexRegion:
        axis = _AXES[self.axis] if isinstance(self.axis, str) else self.axis
        return cylinder_region(axis, self.center, self.radius)


Shape = t.Annotated[
    t.Union[BoxShape, BallShape, PointShape, HalfspaceShape, CylinderShape],
    Field(discriminator="shape"),
]
RegionSpec = t.Union[Shape, t.List[Shape]]


def build_region(spec: RegionSpec) -> ConvexRegion:
    shapes = spec if isinstance(spec, list) else [spec]
    region = ConvexRegion()
    for shape in shapes:
        region = region.intersect(shape.build())
    return region


class DefenderEntry(_Strict):
    position: t.List[float]
    max_speed: float = Field(gt=0)
    capture_radius: float = Field(ge=0)


class AttackerEntry(_Strict):
    position: t.List[float]
    max_speed: float = Field(gt=0)


class ScenarioFile(_Strict):
    dimension: t.Literal[2, 3]
    domain: RegionSpec
    target: RegionSpec
    defenders: t.List[DefenderEntry] = []
    attackers: t.List[AttackerEntry] = []
    dt: float = Field(default=1e-2, gt=0)
    allocation_period: float = Field(default=1e-1, gt=0)
    t_max: float = Field(default=120.0, gt=0)
    seed: int = 0

    def to_config(self) -> ScenarioConfig:
        return ScenarioConfig(
            dimension=self.dimension,
            domain=build_region(self.domain),
            target=build_region(self.target),
            defenders=tuple(
                DefenderSpec(d.position, d.max_speed, d.capture_radius) for d in self.defenders
            ),
            attackers=tuple(AttackerSpec(a.position, a.max_speed) for a in self.attackers),
            dt=self.dt,
            allocation_period=self.allocation_period,
            t_max=self.t_max,
            rng_seed=self.seed,
        )


class TemplateEntry(_Strict):
    name: str = "custom"
    dimension: t.Literal[2, 3]
    domain: RegionSpec
    target: RegionSpec
    n_defenders: t.List[int] = [2, 3]
    n_attackers: t.List[int] = [1]
    capture_radii: t.List[float] = [0.5]
    defender_speed: float = Field(default=1.0, gt=0)
    attacker_speed: float = Field(default=1.0, gt=0)
    matched_teams: bool = False
    dt: float = Field(default=1e-2, gt=0)
    allocation_period: float = Field(default=1e-1, gt=0)
    t_max: float = Field(default=120.0, gt=0)

    def to_template(self) -> ScenarioTemplate:
        return ScenarioTemplate(
            name=self.name,
            dimension=self.dimension,
            domain=build_region(self.domain),
            target=build_region(self.target),
            n_defenders=tuple(self.n_defenders),
            n_attackers=tuple(self.n_attackers),
            capture_radii=tuple(self.capture_radii),
            defender_speed=self.defender_speed,
            attacker_speed=self.attacker_speed,
            matched_teams=self.matched_teams,
            dt=self.dt,
            allocation_period=self.allocation_period,
            t_max=self.t_max,
        )


class BenchFile(_Strict):
    preset: t.Optional[str] = None
    template: t.Optional[TemplateEntry] = None
    trials: int = Field(default=10, ge=1)
    seed: int = 0
    defense_policies: t.List[DefensePolicy] = [DefensePolicy.MDEA]
    attack_policies: t.List[AttackPolicy] = [AttackPolicy.OPTIMAL]
    out_dir: str = "bench-out"
    emit_plots: bool = False
    record_traces: bool = True
    initial_phi_min: t.Optional[float] = None
    initial_phi_max: t.Optional[float] = None

    @model_validator(mode="after")
    def one_template(self) -> BenchFile:
        if (self.preset is None) == (self.template is None):
            raise ValueError("give exactly one of 'preset' and 'template'")
        return self

    def to_spec(self) -> BenchSpec:
        template = get_preset(self.preset) if self.preset else self.template.to_template()  # type: ignore[union-attr]
        return BenchSpec(
            template=template,
            trials=self.trials,
            seed=self.seed,
            defense_policies=tuple(p.value for p in self.defense_policies),
            attack_policies=tuple(p.value for p in self.attack_policies),
            out_dir=self.out_dir,
            emit_plots=self.emit_plots,
            record_traces=self.record_traces,
            initial_phi_min=self.initial_phi_min,
            initial_phi_max=self.initial_phi_max,
        )


def _line_of(text: str, location: t.Sequence[t.Union[str, int]]) -> t.Optional[int]:
    "best effort line number of a JSON location, following its keys in order"
    pos = 0
    found = None
    for part in location:
        if not isinstance(part, str):
            continue
        idx = text.find(f'"{part}"', pos)
        if idx < 0:
            break
        pos = idx
        found = text.count("\n", 0, idx) + 1
    return found


def _split_location(location: str) -> t.List[t.Union[str, int]]:
    return [int(p) if p.isdigit() else p for p in re.split(r"[.\[\]]+", location) if p]


def _where(text: str, loc: t.Sequence[t.Union[str, int]], path: Path) -> str:
    dotted = ".".join(str(p) for p in loc) or "<root>"
    line = _line_of(text, loc)
    return f"{path}:{line} ({dotted})" if line else f"{path} ({dotted})"


def _parse(path: Path) -> t.Tuple[str, t.Dict[str, t.Any]]:
    if not path.is_file():
        raise ConfigurationError(f"config file {path} does not exist")
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"invalid JSON: {e.msg}", f"{path}:{e.lineno}:{e.colno}") from e
    if not isinstance(raw, dict):
        raise ConfigurationError("top level must be an object", str(path))
    return text, raw


def _validated(model: t.Type[BaseModel], text: str, raw: t.Dict[str, t.Any], path: Path) -> t.Any:
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        # drop the union member tags pydantic inserts into the location
        loc = [p for p in first["loc"] if not (isinstance(p, str) and (p in _SHAPE_TAGS or "[" in p))]
        raise ConfigurationError(
            f"{first['msg']} ({e.error_count()} error(s) in total)", _where(text, loc, path)
        ) from e


_SHAPE_TAGS = {"box", "ball", "point", "halfspace", "cylinder"}


def is_bench_file(raw: t.Mapping[str, t.Any]) -> bool:
    return "preset" in raw or "template" in raw


def load_config(path: t.Union[str, Path]) -> t.Union[ScenarioConfig, BenchSpec]:
    """
    Read a scenario or bench file and check every invariant.

    Files with a `preset` or a `template` key are bench files, anything else is a
    scenario file.

    Raises
    ------
    ConfigurationError
        Naming the file, the line where it could be traced and the JSON location.
    """
    path = Path(path)
    text, raw = _parse(path)
    try:
        if is_bench_file(raw):
            bench: BenchFile = _validated(BenchFile, text, raw, path)
            return bench.to_spec().validate()
        scenario: ScenarioFile = _validated(ScenarioFile, text, raw, path)
        return scenario.to_config().validate()
    except ConfigurationError as e:
        if e.location and e.location.startswith(str(path)):
            raise
        loc = _split_location(e.location or "")
        raise ConfigurationError(e.reason, _where(text, loc, path)) from e
    except InvalidInputError as e:
        raise ConfigurationError(e.message, str(path)) from e


def load_scenario(path: t.Union[str, Path]) -> ScenarioConfig:
    config = load_config(path)
    if not isinstance(config, ScenarioConfig):
        raise ConfigurationError("expected a scenario file, got a bench file", str(path))
    return config


def load_bench(path: t.Union[str, Path]) -> BenchSpec:
    config = load_config(path)
    if not isinstance(config, BenchSpec):
        raise ConfigurationError("expected a bench file, got a scenario file", str(path))
    return config
