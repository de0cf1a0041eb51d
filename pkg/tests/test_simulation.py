import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmnav.simulation import (
    ContractViolation,
    DoneReason,
    SimParams,
    TRACK_COLUMNS,
    WorldState,
    episode_done,
    make_agent,
    observe,
    rotated_world,
    step,
    track_rows,
    translated_world,
    write_tracks,
)

PARAMS = SimParams(dt=0.1, v_max=2.0, eps_arr=2.0, max_steps=600)


def world_of(pairs):
    return WorldState(agents=[make_agent(s, d) for s, d in pairs])


# ---------------------------------------------------------------------------
# stepping

def test_euler_step_single_axis():
    w = world_of([((0, 0), (100, 0))])
    w2 = step(w, [(1.0, 0.0)], PARAMS)
    assert np.allclose(w2.agents[0].position, [0.1, 0.0])
    assert np.allclose(w2.agents[0].velocity, [1.0, 0.0])


def test_zero_action_preserves_position_and_heading():
    w = world_of([((0, 0), (0, 100))])  # initial heading +y
    before = w.agents[0].heading
    w2 = step(w, [(0.0, 0.0)], PARAMS)
    assert np.allclose(w2.agents[0].position, [0.0, 0.0])
    assert w2.agents[0].heading == before


def test_diagonal_step_sets_heading():
    w = world_of([((0, 0), (100, 0))])
    w2 = step(w, [(1.0, 1.0)], SimParams(dt=0.5))
    assert np.allclose(w2.agents[0].position, [0.5, 0.5])
    assert w2.agents[0].heading == pytest.approx(np.pi / 4)


def test_speed_ceiling_rescales():
    w = world_of([((0, 0), (100, 0))])
    w2 = step(w, [(6.0, 8.0)], PARAMS)  # magnitude 10 -> 2
    assert np.linalg.norm(w2.agents[0].velocity) == pytest.approx(2.0)
    assert w2.agents[0].heading == pytest.approx(np.arctan2(8, 6))


def test_action_count_mismatch_rejected():
    w = world_of([((0, 0), (100, 0))])
    with pytest.raises(ContractViolation):
        step(w, [(1.0, 0.0), (0.0, 0.0)], PARAMS)


def test_non_finite_action_rejected():
    w = world_of([((0, 0), (100, 0))])
    with pytest.raises(ContractViolation):
        step(w, [(np.nan, 0.0)], PARAMS)


def test_time_tracks_step_count_exactly():
    w = world_of([((0, 0), (100, 0))])
    for k in range(7):
        w = step(w, [(1.0, 0.0)], PARAMS)
    assert w.step_count == 7
    assert w.time == 7 * PARAMS.dt


@given(st.floats(-1.4, 1.4), st.floats(-1.4, 1.4), st.integers(1, 60))
@settings(max_examples=30, deadline=None)
def test_euler_exactness_constant_action(ax, ay, n):
    # commanded speed stays under the 2 m/s ceiling, so no rescaling applies
    w = world_of([((3, -4), (1000, 1000))])
    for _ in range(n):
        w = step(w, [(ax, ay)], PARAMS)
    expected = np.array([3.0, -4.0]) + n * PARAMS.dt * np.array([ax, ay])
    assert np.all(np.abs(w.agents[0].position - expected) <= n * 1e-12 + 1e-12)


def test_arrival_latches_and_freezes():
    w = world_of([((0, 0), (0.5, 0))])  # already within 2 m? route is 0.5 m
    w = step(w, [(1.0, 0.0)], PARAMS)
    assert w.agents[0].arrived
    pos = w.agents[0].position.copy()
    for _ in range(5):
        w = step(w, [(2.0, 2.0)], PARAMS)
        assert w.agents[0].arrived
        assert np.array_equal(w.agents[0].position, pos)
        assert np.array_equal(w.agents[0].velocity, [0.0, 0.0])


# ---------------------------------------------------------------------------
# observations

def test_observe_collinear_ahead():
    w = world_of([((0, 0), (100, 0)), ((10, 0), (-100, 0))])
    obs = observe(w, 0)
    assert len(obs.neighbors) == 1
    nb = obs.neighbors[0]
    assert nb.distance == pytest.approx(10.0)
    assert nb.bearing_to_other == pytest.approx(0.0)


def test_observe_perpendicular_destination_sign():
    # ego nose +x, destination straight to the right (-y): bearing +pi/2
    w = world_of([((0, 0), (100, 0))])
    agent = w.agents[0]
    agent.destination = np.array([0.0, -10.0])
    obs = observe(w, 0)
    assert obs.bearing_to_destination == pytest.approx(np.pi / 2)
    agent.destination = np.array([0.0, 10.0])
    assert observe(w, 0).bearing_to_destination == pytest.approx(-np.pi / 2)


def test_observe_head_on_pair():
    w = world_of([((0, 0), (20, 0)), ((20, 0), (0, 0))])
    obs = observe(w, 0)
    nb = obs.neighbors[0]
    assert nb.distance == pytest.approx(20.0)
    assert nb.bearing_to_other == pytest.approx(0.0)
    assert nb.other_relative_heading == pytest.approx(0.0)
    # and symmetrically for the other agent
    obs2 = observe(w, 1)
    assert obs2.neighbors[0].bearing_to_other == pytest.approx(0.0)
    assert obs2.neighbors[0].other_relative_heading == pytest.approx(0.0)


def test_observe_distance_symmetry(rng):
    w = world_of([(rng.uniform(0, 60, 2), rng.uniform(0, 60, 2)) for _ in range(4)])
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            di = observe(w, i).neighbors
            dj = observe(w, j).neighbors
            # neighbor lists follow world order with self removed
            idx_j = j if j < i else j - 1
            idx_i = i if i < j else i - 1
            assert di[idx_j].distance == pytest.approx(dj[idx_i].distance)


def test_arrived_agents_invisible():
    w = world_of([((0, 0), (100, 0)), ((5, 0), (5.1, 0)), ((9, 9), (-50, 0))])
    w = step(w, [(0, 0), (1.0, 0), (0, 0)], PARAMS)
    assert w.agents[1].arrived
    obs = observe(w, 0)
    assert len(obs.neighbors) == 1  # only the third agent remains visible
    with pytest.raises(ContractViolation):
        observe(w, 1)


def test_observe_bad_index():
    w = world_of([((0, 0), (100, 0))])
    with pytest.raises(ContractViolation):
        observe(w, 3)


@given(st.floats(-np.pi, np.pi), st.floats(-40, 40), st.floats(-40, 40))
@settings(max_examples=40, deadline=None)
def test_rotation_invariance(angle, tx, ty):
    w = world_of([((0, 0), (30, 5)), ((10, 3), (-20, 8)), ((-5, 12), (0, -30))])
    w = step(w, [(1.0, 0.2), (-0.5, 1.0), (0.3, -1.2)], PARAMS)
    base = [observe(w, i) for i in range(3)]
    rotated = rotated_world(w, angle)
    translated = translated_world(w, (tx, ty))
    for variant in (rotated, translated):
        for i in range(3):
            got = observe(variant, i)
            assert got.bearing_to_destination == pytest.approx(
                base[i].bearing_to_destination, abs=1e-9)
            for nb_got, nb_base in zip(got.neighbors, base[i].neighbors):
                assert nb_got.distance == pytest.approx(nb_base.distance, abs=1e-9)
                assert nb_got.bearing_to_other == pytest.approx(
                    nb_base.bearing_to_other, abs=1e-9)
                assert nb_got.other_relative_heading == pytest.approx(
                    nb_base.other_relative_heading, abs=1e-9)


# ---------------------------------------------------------------------------
# lifecycle

def test_episode_done_all_arrived():
    w = world_of([((0, 0), (1, 0)), ((5, 5), (5.5, 5))])
    w = step(w, [(1, 0), (1, 0)], PARAMS)
    assert all(a.arrived for a in w.agents)
    assert episode_done(w, 600) == (True, DoneReason.ALL_ARRIVED)


def test_episode_done_timeout():
    w = world_of([((0, 0), (100, 0))])
    w.step_count = 600
    assert episode_done(w, 600) == (True, DoneReason.TIMEOUT)


def test_episode_not_done():
    w = world_of([((0, 0), (100, 0))])
    w.step_count = 599
    assert episode_done(w, 600) == (False, None)


def test_track_rows_and_csv(tmp_path):
    w = world_of([((1, 2), (100, 0))])
    rows = track_rows(w, episode=3)
    assert rows[0][:6] == [3, 0, 0.0, 0, 1.0, 2.0]
    path = tmp_path / "tracks.csv"
    write_tracks(path, rows)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(TRACK_COLUMNS)
    assert len(lines) == 2
