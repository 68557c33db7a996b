from __future__ import annotations

import pytest

from reachavoid.exceptions import ExceptionInRunner
from reachavoid.executor import Executor, TrialFailure


@pytest.mark.parametrize("max_workers", [1, 2])
def test_results_keep_submission_order(max_workers):
    executor = Executor(keep_progress_bar=False, max_workers=max_workers)
    for k in range(6):
        executor.submit(pow, k, 2, name=f"square-{k}")
    assert executor.results() == [0, 1, 4, 9, 16, 25]


def test_failures_are_recorded():
    executor = Executor(keep_progress_bar=False)
    executor.submit(int, "12")
    executor.submit(int, "x", name="bad")
    first, second = executor.results()
    assert first == 12
    assert isinstance(second, TrialFailure)
    assert second.name == "bad"
    assert second.error_type == "ValueError"


def test_failures_can_raise():
    executor = Executor(keep_progress_bar=False, raise_exceptions=True)
    executor.submit(int, "x")
    with pytest.raises(ExceptionInRunner):
        executor.results()


def test_empty_executor():
    assert Executor(keep_progress_bar=False).results() == []
