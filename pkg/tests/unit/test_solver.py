from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from reachavoid.geometry import ball_region, box, build_srs, halfspace, point_region
from reachavoid.run_config import SolverConfig
from reachavoid.solver import (
    CheckCounter,
    SolveStatus,
    active_set,
    complementary_slackness,
    kkt_residual,
    solve_min_distance,
    solve_projection,
)


@pytest.fixture
def bisector_srs(square):
    return build_srs([[0, 2]], [0, -2], [1.0], [0.0], square)


def test_bisector_min_distance(bisector_srs, target_ball):
    counter = CheckCounter()
    result = solve_min_distance(bisector_srs, target_ball, counter)

    assert result.status is SolveStatus.OPTIMAL
    assert counter.count == 1
    assert result.value == pytest.approx(4.0, abs=1e-6)
    np.testing.assert_allclose(result.primal_q, (0, 0), atol=1e-6)
    np.testing.assert_allclose(result.primal_qtilde, (0, 2), atol=1e-6)
    # box faces first, then the capture frontier, then the target ball
    np.testing.assert_allclose(result.multipliers, [0, 0, 0, 0, 0.5, 2.0], atol=1e-6)
    assert kkt_residual(result) <= 1e-6
    assert complementary_slackness(result) <= 1e-6


def test_bisector_active_set(bisector_srs, target_ball):
    result = solve_min_distance(bisector_srs, target_ball, CheckCounter())
    assert active_set(result) == [4, 5]


def test_apollonius_min_distance(square):
    srs = build_srs([[3, 0]], [0, 0], [2.0], [0.0], square)
    result = solve_min_distance(srs, point_region([4, 0]), CheckCounter())
    assert result.status is SolveStatus.OPTIMAL
    assert result.value == pytest.approx(9.0, abs=1e-6)
    np.testing.assert_allclose(result.primal_q, (1, 0), atol=1e-6)
    np.testing.assert_allclose(result.primal_qtilde, (4, 0), atol=1e-12)
    assert kkt_residual(result) <= 1e-6


def test_overlapping_regions(square, target_ball):
    # attacker next to the target, defender far away
    srs = build_srs([[0, -4]], [0, 1.5], [1.0], [0.0], square)
    result = solve_min_distance(srs, target_ball, CheckCounter())
    assert result.optimal
    assert result.value == pytest.approx(0.0, abs=1e-6)


def test_empty_region_is_infeasible(square, target_ball):
    # attacker inside the capture region of the defender
    srs = build_srs([[0, 0.1]], [0, 0], [1.0], [0.5], square)
    counter = CheckCounter()
    result = solve_min_distance(srs, target_ball, counter)
    assert result.status is SolveStatus.INFEASIBLE
    assert result.value == np.inf
    assert counter.count == 1


def test_hand_built_kkt_point(bisector_srs, target_ball):
    result = solve_min_distance(bisector_srs, target_ball, CheckCounter())
    exact = replace(
        result,
        primal_q=np.array([0.0, 0.0]),
        primal_qtilde=np.array([0.0, 2.0]),
        multipliers=np.array([0, 0, 0, 0, 0.5, 2.0]),
    )
    assert kkt_residual(exact, (bisector_srs, target_ball)) <= 1e-9

    perturbed = replace(result, multipliers=result.multipliers + 0.1)
    assert kkt_residual(perturbed) > 1e-3


@pytest.mark.parametrize(
    ["point", "region", "expected", "value"],
    [
        [(1, -2), box([-5, -5], [5, 5]), (1, -2), 0.0],
        [(0, 6), box([-5, -5], [5, 5]), (0, 5), 1.0],
        [(0, -2), halfspace([0, -1], 0.0).intersect(ball_region([0, 1], 3.0)), (0, 0), 4.0],
    ],
)
def test_projection(point, region, expected, value):
    counter = CheckCounter()
    result = solve_projection(point, region, counter)
    assert result.optimal
    np.testing.assert_allclose(result.primal_q, expected, atol=1e-6)
    assert result.value == pytest.approx(value, abs=1e-6)
    assert kkt_residual(result) <= 1e-6
    # projections are not checks
    assert counter.count == 0


def test_projection_active_sets():
    inside = solve_projection([1, 1], box([-5, -5], [5, 5]), CheckCounter())
    assert active_set(inside) == []
    corner = solve_projection([7, 7], box([-5, -5], [5, 5]), CheckCounter())
    assert active_set(corner) == [0, 2]


def test_determinism(bisector_srs, target_ball):
    first = solve_min_distance(bisector_srs, target_ball, CheckCounter())
    second = solve_min_distance(bisector_srs, target_ball, CheckCounter())
    assert first.value == second.value
    assert np.array_equal(first.primal_q, second.primal_q)
    assert np.array_equal(first.multipliers, second.multipliers)


def test_multi_start_agreement(square):
    rng = np.random.default_rng(5)
    srs = build_srs([[2, 3], [-3, 1]], [0.5, -3], [1.0, 1.5], [0.3, 0.2], square)
    target = ball_region([0, 3.5], 1.0)
    reference = solve_min_distance(srs, target, CheckCounter())
    assert reference.value > 1e-6
    for q0, qt0 in rng.uniform(-5, 5, size=(5, 2, 2)):
        other = solve_min_distance(srs, target, CheckCounter(), q0=q0, qtilde0=qt0)
        assert other.value == pytest.approx(reference.value, abs=1e-6)
        np.testing.assert_allclose(other.primal_q, reference.primal_q, atol=1e-4)


def test_iteration_cap(bisector_srs, target_ball):
    config = SolverConfig(max_iterations=2)
    result = solve_min_distance(bisector_srs, target_ball, CheckCounter(), config=config)
    assert result.status is SolveStatus.MAX_ITERATIONS
    assert result.iterations == 2


def test_three_dimensional_point_target():
    domain = box([-5, -5, -5], [5, 5, 5])
    srs = build_srs([[0, 0, 4]], [0, 0, -4], [1.0], [0.0], domain)
    result = solve_min_distance(srs, point_region([0, 0, 2]), CheckCounter())
    assert result.value == pytest.approx(4.0, abs=1e-6)
    np.testing.assert_allclose(result.primal_q, (0, 0, 0), atol=1e-6)
