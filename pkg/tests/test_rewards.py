import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmnav.rewards import (
    RewardConfig,
    StepReward,
    acceleration_reward,
    arrival_reward,
    collision_pair_reward,
    collision_reward,
    time_reward,
)
from swarmnav.simulation import WorldState, make_agent

CFG = RewardConfig()


def test_arrival_inside_zone():
    assert arrival_reward(0.0, CFG) == 100.0
    assert arrival_reward(1.9999, CFG) == 100.0


def test_arrival_outside_zone_is_zero_regardless_of_distance():
    # both the near miss and the far miss earn nothing
    assert arrival_reward(2.0001, CFG) == 0.0
    assert arrival_reward(50.0, CFG) == 0.0


def test_arrival_boundary_inclusive():
    assert arrival_reward(2.0, CFG) == 100.0


def test_collision_inside_hard_zone():
    assert collision_pair_reward(CFG.eps_cav / 2, CFG) == -200.0


def test_collision_ramp_midpoint():
    # eps 3, delta 10: at 6.5 m the ramp factor is (10 - 6.5) / 7 = 0.5
    assert collision_pair_reward(6.5, CFG) == pytest.approx(-100.0)


def test_collision_two_neighbors_sum():
    w = WorldState(agents=[
        make_agent((0, 0), (50, 0)),
        make_agent((1, 0), (50, 10)),
        make_agent((0, 1), (50, -10)),
    ])
    assert collision_reward(0, w, CFG) == pytest.approx(-400.0)


def test_collision_ignores_arrived_agents():
    w = WorldState(agents=[
        make_agent((0, 0), (50, 0)),
        make_agent((1, 0), (50, 10)),
    ])
    w.agents[1].arrived = True
    assert collision_reward(0, w, CFG) == 0.0


def test_collision_continuous_at_outer_boundary():
    assert collision_pair_reward(CFG.delta_cav, CFG) == pytest.approx(0.0)
    assert collision_pair_reward(CFG.delta_cav - 1e-9, CFG) == pytest.approx(
        0.0, abs=1e-6)
    assert collision_pair_reward(CFG.delta_cav + 1e-9, CFG) == 0.0


def test_collision_full_penalty_throughout_hard_zone():
    for d in np.linspace(0.0, CFG.eps_cav, 20):
        assert collision_pair_reward(float(d), CFG) == CFG.r_cav


@given(st.floats(0, 20), st.floats(0, 20))
@settings(max_examples=100)
def test_collision_monotone_in_distance(d1, d2):
    lo, hi = sorted((d1, d2))
    assert collision_pair_reward(lo, CFG) <= collision_pair_reward(hi, CFG)


def test_time_reward_example():
    assert time_reward(60.0, CFG, dt=0.1, v_max=2.0) == pytest.approx(-10.0 * 0.2 / 60.0)


def test_time_reward_halves_with_double_distance():
    r1 = time_reward(30.0, CFG, dt=0.1, v_max=2.0)
    r2 = time_reward(60.0, CFG, dt=0.1, v_max=2.0)
    assert r2 == pytest.approx(r1 / 2)


@pytest.mark.parametrize("dist", [24.0, 37.4, 60.0, 109.8])
def test_time_reward_straight_flight_accumulates_total(dist):
    # route lengths that are whole multiples of the per-step travel
    dt, v_max = 0.1, 2.0
    steps = round(dist / (v_max * dt))
    total = steps * time_reward(dist, CFG, dt, v_max)
    assert total == pytest.approx(CFG.r_tme_total, abs=1e-9)


def test_time_reward_fairness_between_agents():
    dt, v_max = 0.1, 2.0
    totals = []
    for dist in (24.0, 60.0):
        steps = round(dist / (v_max * dt))
        totals.append(steps * time_reward(dist, CFG, dt, v_max))
    assert abs(totals[0] - totals[1]) / abs(totals[0]) < 1e-6


def test_time_reward_degenerate_route_rejected():
    with pytest.raises(ValueError):
        time_reward(0.0, CFG, 0.1, 2.0)


def test_acceleration_reward_cases():
    assert acceleration_reward((1, 0), (1, 0), 0.1) == 0.0
    assert acceleration_reward((1, 0), (0, 1), 0.1) == pytest.approx(-np.sqrt(2))
    assert acceleration_reward((0, 0), (2, 0), 0.1) == -2.0


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50))
@settings(max_examples=60)
def test_step_reward_decomposition_exact(a, c, t, acc):
    combined = StepReward.combine(CFG, a, c, t, acc)
    assert combined.total == (CFG.w_arr * a + CFG.w_cav * c
                              + CFG.w_tme * t + CFG.w_acc * acc)


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(delta_cav=2.0, eps_cav=3.0).validate()
    with pytest.raises(ValueError):
        RewardConfig(r_cav=5.0).validate()
    with pytest.raises(ValueError):
        RewardConfig(w_tme=-1.0).validate()
    RewardConfig().validate()
