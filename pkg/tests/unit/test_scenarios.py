from __future__ import annotations

import numpy as np
import pytest

from reachavoid.bench import PRESETS, BenchSpec, generate_random_scenario, get_preset
from reachavoid.exceptions import ConfigurationError
from reachavoid.geometry import capture_region_contains, region_contains


def _positions(config):
    return [d.position for d in config.defenders] + [a.position for a in config.attackers]


def test_same_seed_same_scenario():
    template = get_preset("single-2d")
    first = generate_random_scenario(template, seed=42)
    second = generate_random_scenario(template, seed=42)
    assert first.n_defenders == second.n_defenders
    for p, q in zip(_positions(first), _positions(second)):
        np.testing.assert_array_equal(p, q)
    assert [d.capture_radius for d in first.defenders] == [d.capture_radius for d in second.defenders]


def test_different_seeds_differ():
    template = get_preset("single-2d")
    first = generate_random_scenario(template, seed=1)
    second = generate_random_scenario(template, seed=2)
    assert not np.array_equal(first.attackers[0].position, second.attackers[0].position)


@pytest.mark.parametrize("name", ["single-2d", "single-3d", "indoor-2d", "nofly-3d"])
def test_presets_sample_clean_starts(name):
    template = get_preset(name)
    for seed in range(5):
        config = generate_random_scenario(template, seed)
        assert config.dimension == template.dimension
        assert config.n_defenders in template.n_defenders
        assert config.rng_seed == seed
        for a in config.attackers:
            assert region_contains(config.domain, a.position)
            assert not region_contains(config.target, a.position, 0.0)
            for d in config.defenders:
                assert not capture_region_contains(d.position, a.position, d.capture_radius)


def test_matched_teams():
    template = get_preset("multi-2d").with_overrides(n_defenders=(10,))
    config = generate_random_scenario(template, seed=0)
    assert config.n_defenders == config.n_attackers == 10


def test_sampler_gives_up():
    # every attacker would start inside a capture region
    template = get_preset("single-2d").with_overrides(n_defenders=(1,), capture_radii=(100.0,))
    with pytest.raises(ConfigurationError) as info:
        generate_random_scenario(template, seed=0)
    assert "captured at start" in info.value.reason


@pytest.mark.parametrize(
    ["changes", "location"],
    [
        [dict(dimension=4), "dimension"],
        [dict(capture_radii=(-1.0,)), "capture_radii"],
        [dict(attacker_speed=2.0), "defender_speed"],
        [dict(n_defenders=()), "n_defenders"],
    ],
)
def test_template_validation(changes, location):
    template = get_preset("single-2d").with_overrides(**changes)
    with pytest.raises(ConfigurationError) as info:
        template.validate()
    assert info.value.location == location


def test_bench_spec_validation():
    template = get_preset("single-2d")
    with pytest.raises(ConfigurationError):
        BenchSpec(template, trials=0).validate()
    with pytest.raises(ConfigurationError):
        BenchSpec(template, defense_policies=()).validate()
    with pytest.raises(ConfigurationError):
        BenchSpec(template, initial_phi_min=2.0, initial_phi_max=1.0).validate()
    assert BenchSpec(template).with_overrides(trials=3, seed=None).trials == 3


def test_unknown_preset():
    with pytest.raises(ConfigurationError) as info:
        get_preset("nope")
    assert info.value.location == "preset"
    assert set(PRESETS) >= {"single-2d", "single-3d", "multi-2d", "multi-3d"}
