from __future__ import annotations

import numpy as np
import pytest

import reachavoid.coordination as coordination
from reachavoid.coordination import (
    CoordinationMode,
    almost_optimal_waypoint,
    attack_velocity,
    dmsdc_step,
    is_defense_winning,
    optimal_attack_input,
    random_attack_input,
    single_attack_value,
    straight_line_attack_input,
    value_gradients,
)
from reachavoid.exceptions import InvalidInputError
from reachavoid.geometry import halfspace, point_region
from reachavoid.run_config import EPS_WIN
from reachavoid.solver import CheckCounter


@pytest.fixture
def recovery_view(view_factory):
    # the whole target lies in the attacker's safe-reachable set
    return view_factory([[0.0, -4.0]], [0.0, 1.5])


def test_single_attack_value(bisector_view, square, target_ball):
    counter = CheckCounter()
    phi, waypoint = single_attack_value(bisector_view, square, target_ball, counter)
    assert phi == pytest.approx(4.0, abs=1e-6)
    np.testing.assert_allclose(waypoint, (0, 0), atol=1e-6)
    assert counter.count == 1


def test_single_attack_value_without_defenders(view_factory, square, target_ball):
    view = view_factory([], [4.0, -4.0])
    phi, _ = single_attack_value(view, square, target_ball, CheckCounter())
    assert phi == pytest.approx(0.0, abs=1e-6)


def test_single_attack_value_when_captured(view_factory, square, target_ball):
    view = view_factory([[0.0, 0.1]], [0.0, 0.0], radii=[0.5])
    phi, waypoint = single_attack_value(view, square, target_ball, CheckCounter())
    assert phi == np.inf and waypoint is None


def test_is_defense_winning(bisector_view, recovery_view, square, target_ball):
    assert is_defense_winning(bisector_view, square, target_ball, CheckCounter())
    assert not is_defense_winning(recovery_view, square, target_ball, CheckCounter())


def test_winning_threshold_is_strict(bisector_view, square, target_ball, monkeypatch):
    monkeypatch.setattr(coordination, "single_attack_value", lambda *args, **kwargs: (EPS_WIN / 2, None))
    assert not is_defense_winning(bisector_view, square, target_ball, CheckCounter())


def test_dmsdc_winning_mode(bisector_view, square, target_ball):
    outcome = dmsdc_step(bisector_view, square, target_ball, CheckCounter())
    assert outcome.mode is CoordinationMode.WINNING
    np.testing.assert_allclose(outcome.waypoint, (0, 0), atol=1e-6)
    np.testing.assert_allclose(outcome.defender_velocities[1], (0, -1), atol=1e-6)


def test_dmsdc_coalition_shares_waypoint(view_factory, square, target_ball):
    # the closer defender pins the bisector at y = -1
    view = view_factory([[0.0, 2.0], [0.0, 0.0]], [0.0, -2.0])
    outcome = dmsdc_step(view, square, target_ball, CheckCounter())
    assert outcome.mode is CoordinationMode.WINNING
    assert outcome.phi == pytest.approx(9.0, abs=1e-6)
    np.testing.assert_allclose(outcome.waypoint, (0, -1), atol=1e-6)
    for i in (1, 2):
        np.testing.assert_allclose(outcome.defender_velocities[i], (0, -1), atol=1e-6)


def test_dmsdc_recovery_mode(recovery_view, square, target_ball):
    outcome = dmsdc_step(recovery_view, square, target_ball, CheckCounter())
    assert outcome.mode is CoordinationMode.RECOVERY
    assert outcome.phi == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(outcome.waypoint, (0, 2), atol=1e-6)
    np.testing.assert_allclose(outcome.defender_velocities[1], (0, 1), atol=1e-6)


def test_optimal_attack_input(bisector_view, recovery_view, view_factory, square, target_ball):
    v = optimal_attack_input(bisector_view, square, target_ball, CheckCounter())
    np.testing.assert_allclose(v, (0, 1), atol=1e-6)

    v = optimal_attack_input(recovery_view, square, target_ball, CheckCounter())
    np.testing.assert_allclose(v, (0, 1), atol=1e-6)

    outcome = almost_optimal_waypoint(bisector_view, square, target_ball, CheckCounter())
    outcome.waypoint = bisector_view.attacker_position.copy()
    np.testing.assert_allclose(attack_velocity(bisector_view, outcome), (0, 0))


@pytest.mark.parametrize(
    ["attacker", "target", "expected"],
    [
        [(0, 0), halfspace([0, -1], 5.0), (0, 1)],
        [(3, 4), point_region([0, 0]), (-0.6, -0.8)],
        [(0, 6), halfspace([0, -1], 5.0), (0, 0)],
    ],
)
def test_straight_line_attack_input(attacker, target, expected):
    np.testing.assert_allclose(straight_line_attack_input(attacker, 1.0, target), expected, atol=1e-9)


def test_random_attack_input_is_admissible():
    rng = np.random.default_rng(0)
    for dim in (2, 3):
        for _ in range(200):
            v = random_attack_input(2.0, rng, dim)
            assert v.shape == (dim,)
            assert np.linalg.norm(v) <= 2.0


def test_value_gradients_winning_mode(bisector_view, square, target_ball):
    grads = value_gradients(bisector_view, square, target_ball, CheckCounter())
    assert grads.mode is CoordinationMode.WINNING
    assert grads.phi == pytest.approx(4.0, abs=1e-6)
    # moving either agent up by h moves the bisector up by h / 2
    np.testing.assert_allclose(grads.defenders[1], (0, -2), atol=1e-5)
    np.testing.assert_allclose(grads.attacker, (0, -2), atol=1e-5)


def test_value_gradients_recovery_mode(recovery_view, square, target_ball):
    grads = value_gradients(recovery_view, square, target_ball, CheckCounter())
    assert grads.mode is CoordinationMode.RECOVERY
    assert grads.phi == pytest.approx(0.25, abs=1e-6)
    # the capture frontier is inactive at the recovery point
    np.testing.assert_allclose(grads.defenders[1], (0, 0), atol=1e-6)
    np.testing.assert_allclose(grads.attacker, (0, -1), atol=1e-5)


def test_view_rejects_slower_defender(view_factory):
    with pytest.raises(InvalidInputError):
        view_factory([[1.0, 1.0]], [0.0, 0.0], speeds=[0.5])


def test_view_restrict(view_factory):
    view = view_factory([[1, 1], [2, 2], [3, 3]], [0, 0], radii=[0.1, 0.2, 0.3])
    sub = view.restrict([3, 1])
    assert sub.defender_ids == (1, 3)
    assert sub.radii == (0.1, 0.3)
