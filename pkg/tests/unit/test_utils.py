from __future__ import annotations

import logging
import pickle

import numpy as np
import pytest

from reachavoid.exceptions import (
    ConfigurationError,
    DegeneratePointError,
    InvalidInputError,
    SolverError,
    UnsupportedDimensionError,
)
from reachavoid.run_config import RunConfig, add_retry
from reachavoid.solver import SolveStatus
from reachavoid.utils import (
    as_float_tuple,
    clip_to_arrival,
    get_full_suite_mode,
    normalize,
    patch_logger,
    stable_seed,
)


@pytest.mark.parametrize(
    ["v", "expected"],
    [
        [(3, 4), (0.6, 0.8)],
        [(0, 0), (0, 0)],
        [(0, 0, -2), (0, 0, -1)],
    ],
)
def test_normalize(v, expected):
    np.testing.assert_allclose(normalize(v), expected)


@pytest.mark.parametrize(
    ["velocity", "position", "waypoint", "expected"],
    [
        [(1, 0), (0, 0), (5, 0), (1, 0)],
        [(1, 0), (0, 0), (0.05, 0), (0.5, 0)],
        [(0, 0), (0, 0), (0, 0), (0, 0)],
    ],
)
def test_clip_to_arrival(velocity, position, waypoint, expected):
    v = clip_to_arrival(np.array(velocity, float), np.array(position, float), np.array(waypoint, float), 0.1)
    np.testing.assert_allclose(v, expected)


def test_stable_seed():
    assert stable_seed(1, 2) == stable_seed(1, 2)
    assert stable_seed(1, 2) != stable_seed(2, 1)


def test_as_float_tuple():
    assert as_float_tuple(np.array([0.1 + 0.2, 1.0])) == (0.3, 1.0)


def test_full_suite_mode(monkeypatch):
    monkeypatch.delenv("REACHAVOID_FULL_SUITE", raising=False)
    assert not get_full_suite_mode()
    monkeypatch.setenv("REACHAVOID_FULL_SUITE", "True")
    assert get_full_suite_mode()


def test_patch_logger():
    patch_logger("reachavoid.test_patch", logging.DEBUG)
    logger = logging.getLogger("reachavoid.test_patch")
    assert logger.level == logging.DEBUG
    assert not logger.propagate


def test_add_retry():
    calls = []

    def flaky():
        calls.append(1)
        if len(calls) < 3:
            raise OSError("busy")
        return "done"

    wrapped = add_retry(flaky, RunConfig(max_retries=3, max_wait=0))
    assert wrapped() == "done"
    assert len(calls) == 3


def test_add_retry_reraises():
    def broken():
        raise OSError("gone")

    with pytest.raises(OSError):
        add_retry(broken, RunConfig(max_retries=2, max_wait=0))()


@pytest.mark.parametrize(
    "exc",
    [
        InvalidInputError("bad vector"),
        DegeneratePointError([1.0, 2.0]),
        SolverError(SolveStatus.INFEASIBLE, what="projection"),
        ConfigurationError("speed ratio 0.5 < 1", "attackers[0]"),
        UnsupportedDimensionError(3, [2]),
    ],
)
def test_exceptions_survive_pickling(exc):
    restored = pickle.loads(pickle.dumps(exc))
    assert type(restored) is type(exc)
    assert str(restored) == str(exc)
    assert restored.__dict__ == exc.__dict__


def test_configuration_error_location():
    err = ConfigurationError("speed ratio 0.5 < 1", "attackers[0]")
    assert err.reason == "speed ratio 0.5 < 1"
    assert str(err) == "attackers[0]: speed ratio 0.5 < 1"
