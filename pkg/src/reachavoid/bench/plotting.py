"""
SVG figures of safe-reachable sets and game trajectories.

Boundaries are sampled by marching rays out of the attacker position: the
safe-reachable set is convex and holds the attacker, so every ray leaves it
exactly once.
"""
from __future__ import annotations

import logging
import typing as t
from pathlib import Path

import numpy as np
import numpy.typing as npt
import pandas as pd
from matplotlib.figure import Figure
from matplotlib.patches import Circle

from reachavoid.coordination import CoalitionView, almost_optimal_waypoint
from reachavoid.exceptions import InvalidInputError, UnsupportedDimensionError
from reachavoid.geometry import Ball, ConvexRegion, region_bounds
from reachavoid.solver import CheckCounter

if t.TYPE_CHECKING:
    from reachavoid.engine import GameTrace, ScenarioConfig
    from reachavoid.run_config import SolverConfig

logger = logging.getLogger(__name__)

_BISECTION_STEPS = 60
_GRID = 200


def _exit_distance(region: ConvexRegion, origin: npt.NDArray, direction: npt.NDArray, reach: float) -> float:
    if region.max_value(origin + reach * direction) <= 0.0:
        return reach
    lo, hi = 0.0, reach
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if region.max_value(origin + mid * direction) <= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def _reach(domain: ConvexRegion) -> float:
    lower, upper = region_bounds(domain)
    span = upper - lower
    if not np.all(np.isfinite(span)):
        raise InvalidInputError("ray marching needs a bounded domain")
    return float(np.linalg.norm(span))


def _directions(dim: int, n_rays: int) -> npt.NDArray[np.float64]:
    if dim == 2:
        angles = np.linspace(0.0, 2.0 * np.pi, n_rays, endpoint=False)
        return np.column_stack([np.cos(angles), np.sin(angles)])
    # Fibonacci sphere
    k = np.arange(n_rays) + 0.5
    polar = np.arccos(1.0 - 2.0 * k / n_rays)
    azimuth = np.pi * (1.0 + 5.0**0.5) * k
    return np.column_stack(
        [np.cos(azimuth) * np.sin(polar), np.sin(azimuth) * np.sin(polar), np.cos(polar)]
    )


def srs_boundary(
    view: CoalitionView, domain: ConvexRegion, n_rays: int = 720
) -> t.Optional[npt.NDArray[np.float64]]:
    """
    Points on the boundary of the attacker's safe-reachable set, one per ray.

    Returns None when the set is empty, i.e. the attacker already sits in a
    capture region or outside the domain.
    """
    srs = view.srs(domain)
    origin = view.attacker_position
    if srs.max_value(origin) > 0.0:
        return None
    reach = _reach(domain)
    directions = _directions(view.dim, n_rays)
    return np.array([origin + _exit_distance(srs, origin, u, reach) * u for u in directions])


def _scenario_view(scenario: ScenarioConfig, attacker_id: int, coalition: t.Optional[t.Iterable[int]]) -> CoalitionView:
    team = scenario.initial_state().team_state(scenario)
    ids = team.defender_ids if coalition is None else tuple(coalition)
    return team.view(ids, attacker_id)


def _draw_region(ax, region: ConvexRegion, lower, upper, **style) -> None:
    if len(region.atoms) == 1 and isinstance(region.atoms[0], Ball) and region.atoms[0].radius == 0.0:
        ax.plot(*region.atoms[0].center, marker="*", markersize=12, linestyle="none", color=style.get("colors", "k"))
        return
    # grid slightly larger than the domain so its own boundary is drawn
    pad = 0.04 * float(np.max(upper - lower))
    xs = np.linspace(lower[0] - pad, upper[0] + pad, _GRID)
    ys = np.linspace(lower[1] - pad, upper[1] + pad, _GRID)
    X, Y = np.meshgrid(xs, ys)
    Z = np.array([[region.max_value((x, y)) for x in xs] for y in ys])
    ax.contour(X, Y, Z, levels=[0.0], **style)


def _bisectors(ax, view: CoalitionView, lower, upper) -> None:
    "perpendicular bisectors of defenders that are as fast as the attacker and have no capture radius"
    a = view.attacker_position
    for p, gamma, r in zip(view.defender_positions, view.gammas, view.radii):
        if gamma != 1.0 or r != 0.0:
            continue
        mid = 0.5 * (a + p)
        along = np.array([-(p - a)[1], (p - a)[0]])
        along /= np.linalg.norm(along)
        span = float(np.linalg.norm(upper - lower))
        ends = np.array([mid - span * along, mid + span * along])
        ax.plot(ends[:, 0], ends[:, 1], linestyle="--", linewidth=0.8, color="grey")


def _framed(lower, upper) -> t.Tuple[Figure, t.Any]:
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot()
    ax.set_aspect("equal")
    pad = 0.05 * float(np.max(upper - lower))
    ax.set_xlim(lower[0] - pad, upper[0] + pad)
    ax.set_ylim(lower[1] - pad, upper[1] + pad)
    return fig, ax


def emit_srs_plot(
    scenario: ScenarioConfig,
    attacker_id: int,
    coalition: t.Optional[t.Iterable[int]],
    path: t.Union[str, Path],
    solver_config: t.Optional[SolverConfig] = None,
    n_rays: int = 720,
) -> Path:
    """
    SVG of the domain, the target, the capture disks, the boundary of the
    attacker's safe-reachable set and the almost-optimal waypoint at t = 0.

    `coalition` defaults to every defender.

    Raises
    ------
    UnsupportedDimensionError
        For 3D scenarios, see `write_srs_point_cloud`.
    """
    if scenario.dimension != 2:
        raise UnsupportedDimensionError(scenario.dimension, (2,))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    view = _scenario_view(scenario, attacker_id, coalition)
    lower, upper = region_bounds(scenario.domain)
    fig, ax = _framed(lower, upper)

    _draw_region(ax, scenario.domain, lower, upper, colors="k", linewidths=1.5)
    _draw_region(ax, scenario.target, lower, upper, colors="green", linewidths=1.5)
    for p, r in zip(view.defender_positions, view.radii):
        ax.add_patch(Circle(tuple(p), r, color="tab:blue", alpha=0.35))
        ax.plot(*p, marker="o", color="tab:blue", linestyle="none")
    ax.plot(*view.attacker_position, marker="o", color="tab:red", linestyle="none")
    _bisectors(ax, view, lower, upper)

    boundary = srs_boundary(view, scenario.domain, n_rays)
    if boundary is None:
        ax.set_title(f"attacker {attacker_id}: empty safe-reachable set")
        logger.info("attacker %d has an empty safe-reachable set", attacker_id)
    else:
        closed = np.vstack([boundary, boundary[:1]])
        ax.plot(closed[:, 0], closed[:, 1], color="tab:red", linewidth=1.2)
        outcome = almost_optimal_waypoint(view, scenario.domain, scenario.target, CheckCounter(), solver_config)
        ax.plot(*outcome.waypoint, marker="x", markersize=10, color="k", linestyle="none")
        ax.set_title(f"attacker {attacker_id}: phi = {outcome.phi:.4g} ({outcome.mode.value})")

    fig.savefig(path, format="svg")
    return path


def write_srs_point_cloud(
    scenario: ScenarioConfig,
    attacker_id: int,
    coalition: t.Optional[t.Iterable[int]],
    path: t.Union[str, Path],
    n_rays: int = 2000,
) -> Path:
    "boundary samples of the safe-reachable set as CSV, for any dimension"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    view = _scenario_view(scenario, attacker_id, coalition)
    boundary = srs_boundary(view, scenario.domain, n_rays)
    axes = ["x", "y", "z"][: scenario.dimension]
    points = np.empty((0, scenario.dimension)) if boundary is None else boundary
    pd.DataFrame(points, columns=axes).to_csv(path, index=False, float_format="%.9f")
    return path


def emit_trajectory_plot(trace: GameTrace, scenario: ScenarioConfig, path: t.Union[str, Path]) -> Path:
    if scenario.dimension != 2:
        raise UnsupportedDimensionError(scenario.dimension, (2,))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lower, upper = region_bounds(scenario.domain)
    fig, ax = _framed(lower, upper)
    _draw_region(ax, scenario.domain, lower, upper, colors="k", linewidths=1.5)
    _draw_region(ax, scenario.target, lower, upper, colors="green", linewidths=1.5)

    for i, spec in enumerate(scenario.defenders):
        path_i = np.array([s.defender_positions[i] for s in trace.snapshots])
        ax.plot(path_i[:, 0], path_i[:, 1], color="tab:blue", linewidth=0.8)
        ax.add_patch(Circle(tuple(path_i[-1]), spec.capture_radius, color="tab:blue", alpha=0.25))
    for j in range(scenario.n_attackers):
        path_j = np.array([s.attacker_positions[j] for s in trace.snapshots])
        ax.plot(path_j[:, 0], path_j[:, 1], color="tab:red", linewidth=0.8)
        ax.plot(*path_j[-1], marker="x", color="tab:red", linestyle="none")
    ax.set_title(
        f"{trace.defense_policy.value} vs {trace.attack_policy.value}: "
        f"{trace.n_captured} captured, {trace.payoff} reached"
    )
    fig.savefig(path, format="svg")
    return path
