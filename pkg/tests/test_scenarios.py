import numpy as np
import pytest

from swarmnav.scenarios import (
    PlacementError,
    ScenarioConfig,
    generate_fixed_count,
    generate_scenario,
    load_scenario,
    make_rng,
    sample_agent_count,
    save_scenario,
    scenario_from_json,
    scenario_to_json,
)

CFG = ScenarioConfig()


def test_geometric_pmf_matches_closed_form():
    rng = make_rng(1)
    cfg = ScenarioConfig(max_agents=10_000)  # effectively untruncated
    draws = rng.geometric(cfg.p_geo, size=200_000)
    for n, expected in ((1, 1 / 3), (2, 2 / 9), (3, 4 / 27)):
        freq = float(np.mean(draws == n))
        assert freq == pytest.approx(expected, rel=0.03)


def test_geometric_mean_one_over_p():
    rng = make_rng(2)
    draws = rng.geometric(1 / 3, size=1_000_000)
    assert float(draws.mean()) == pytest.approx(3.0, rel=0.01)


def test_p_near_one_always_single_agent():
    rng = make_rng(3)
    cfg = ScenarioConfig(p_geo=1 - 1e-12)
    assert all(sample_agent_count(rng, cfg) == 1 for _ in range(200))


def test_truncation_bounds():
    rng = make_rng(4)
    cfg = ScenarioConfig(max_agents=3)
    counts = {sample_agent_count(rng, cfg) for _ in range(5000)}
    assert counts == {1, 2, 3}


def test_truncation_preserves_relative_probabilities():
    rng = make_rng(5)
    cfg = ScenarioConfig(max_agents=2)
    draws = np.array([sample_agent_count(rng, cfg) for _ in range(100_000)])
    # resampling renormalizes: P(1)/P(2) stays (1/3)/(2/9) = 3/2
    ratio = np.mean(draws == 1) / np.mean(draws == 2)
    assert ratio == pytest.approx(1.5, rel=0.05)


def test_same_seed_identical_stream():
    worlds_a = [generate_scenario(make_rng(42), CFG) for _ in range(1)]
    worlds_b = [generate_scenario(make_rng(42), CFG) for _ in range(1)]
    for wa, wb in zip(worlds_a, worlds_b):
        assert len(wa.agents) == len(wb.agents)
        for a, b in zip(wa.agents, wb.agents):
            assert np.array_equal(a.position, b.position)
            assert np.array_equal(a.destination, b.destination)


def test_placement_constraints_hold_over_many_scenarios():
    rng = make_rng(7)
    cfg = ScenarioConfig(max_agents=2)
    violations = 0
    for _ in range(10_000):
        world = generate_fixed_count(rng, cfg, 2)
        pts = [a.position for a in world.agents] + [a.destination for a in world.agents]
        for p in pts:
            if not (0.0 < p[0] < cfg.arena[0] and 0.0 < p[1] < cfg.arena[1]):
                violations += 1
        s0, s1 = world.agents[0].position, world.agents[1].position
        if np.linalg.norm(s0 - s1) < cfg.min_separation:
            violations += 1
        d0, d1 = world.agents[0].destination, world.agents[1].destination
        if np.linalg.norm(d0 - d1) < cfg.min_separation:
            violations += 1
        for a in world.agents:
            if a.dist_to_destination() < cfg.min_route_length:
                violations += 1
    assert violations == 0


def test_initial_state_at_rest_facing_destination():
    world = generate_scenario(make_rng(8), CFG)
    for a in world.agents:
        assert np.array_equal(a.velocity, [0.0, 0.0])
        offset = a.destination - a.position
        assert a.heading == pytest.approx(np.arctan2(offset[1], offset[0]))
        assert not a.arrived


def test_impossible_placement_names_constraint():
    cfg = ScenarioConfig(arena=(5.0, 5.0), min_separation=50.0, max_agents=4,
                         min_route_length=1.0, p_geo=0.01)
    with pytest.raises(PlacementError, match="apart|separation"):
        generate_fixed_count(make_rng(9), cfg, 4)


def test_scenario_json_round_trip(tmp_path):
    world = generate_scenario(make_rng(10), CFG)
    text = scenario_to_json(world, seed=10)
    rebuilt = scenario_from_json(text)
    assert len(rebuilt.agents) == len(world.agents)
    for a, b in zip(world.agents, rebuilt.agents):
        assert np.allclose(a.position, b.position)
        assert np.allclose(a.destination, b.destination)
        assert a.heading == pytest.approx(b.heading)

    path = tmp_path / "scene.json"
    save_scenario(path, world, seed=10)
    assert len(load_scenario(path).agents) == len(world.agents)


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(p_geo=1.5).validate()
    with pytest.raises(ValueError):
        ScenarioConfig(max_agents=0).validate()
    ScenarioConfig().validate()
