from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from reachavoid.bench.plotting import (
    emit_srs_plot,
    emit_trajectory_plot,
    srs_boundary,
    write_srs_point_cloud,
)
from reachavoid.engine import run_game
from reachavoid.exceptions import UnsupportedDimensionError
from reachavoid.geometry import ball_region, box


@pytest.fixture
def duel_3d(scenario_factory):
    return scenario_factory(
        defenders=[([0.0, 0.0, 2.0], 1.0, 0.5)],
        attackers=[([0.0, 0.0, -2.0], 1.0)],
        domain=box([-5.0] * 3, [5.0] * 3),
        target=ball_region([0.0, 0.0, 3.0], 1.0),
    )


def test_voronoi_boundary(bisector_view, square):
    boundary = srs_boundary(bisector_view, square, n_rays=90)
    assert boundary.shape == (90, 2)
    for x, y in boundary:
        on_bisector = abs(y) < 1e-6
        on_wall = abs(abs(x) - 5.0) < 1e-6 or abs(abs(y) - 5.0) < 1e-6
        assert on_bisector or on_wall
    assert boundary[:, 1].max() == pytest.approx(0.0, abs=1e-6)


def test_boundary_avoids_capture_disks(view_factory, square):
    view = view_factory([[3.0, 0.0], [-2.0, 2.0]], [0.0, -1.0], speeds=[1.0, 2.0], radii=[2.0, 0.5])
    boundary = srs_boundary(view, square, n_rays=180)
    srs = view.srs(square)
    for q in boundary:
        assert srs.max_value(q) <= 0.0
        assert np.linalg.norm(q - (3.0, 0.0)) >= 2.0 - 1e-9
        assert np.linalg.norm(q - (-2.0, 2.0)) >= 0.5 - 1e-9


def test_empty_set_has_no_boundary(view_factory, square):
    view = view_factory([[0.0, 0.1]], [0.0, 0.0], radii=[0.5])
    assert srs_boundary(view, square) is None


def test_emit_srs_plot(duel, tmp_path):
    path = emit_srs_plot(duel, 1, None, tmp_path / "plots" / "srs.svg", n_rays=90)
    text = path.read_text()
    assert "<svg" in text


def test_emit_srs_plot_is_planar_only(duel_3d, tmp_path):
    with pytest.raises(UnsupportedDimensionError):
        emit_srs_plot(duel_3d, 1, None, tmp_path / "srs.svg")


def test_point_cloud(duel_3d, tmp_path):
    path = write_srs_point_cloud(duel_3d, 1, [1], tmp_path / "srs.csv", n_rays=50)
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["x", "y", "z"]
    assert len(frame) == 50
    # the bisector plane z = 0 caps the set
    assert frame["z"].max() == pytest.approx(0.0, abs=1e-6)


def test_trajectory_plot(duel, tmp_path):
    trace = run_game(duel.with_overrides(t_max=0.5))
    path = emit_trajectory_plot(trace, duel, tmp_path / "trajectory.svg")
    assert "<svg" in path.read_text()
