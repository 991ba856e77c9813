import math

import numpy as np
import pytest

from dgap.sim import episode as episode_mod
from dgap.sim.episode import classify, local_waypoint, run_episode
from dgap.sim.scenario import ScenarioError, load_builtin, load_scenario, scenario_from_dict
from dgap.sim.world import Agent, WorldState, in_collision, raycast_scan, step_world
from dgap.types import EgoState

HEAD_ON = {"name": "head_on", "ego": {"start": [0, 0]}, "goal": [10, 0], "time_limit": 6,
           "agents": [{"start": [3, 0], "waypoints": [[-5, 0]], "speed": 1.0, "radius": 0.3}]}


def world(agents=(), segments=(), **ego):
    return WorldState(EgoState(**ego), tuple(agents), np.asarray(segments, float).reshape(-1, 2, 2))


# --------------------------------------------------------------------------- raycast

def test_empty_world_all_max():
    s = raycast_scan(world(), 90, 5.0)
    assert np.all(s.ranges == 5.0)


def test_wall_ahead():
    s = raycast_scan(world(segments=[((2, -1), (2, 1))]), 360, 5.0)
    assert s.ranges[s.beam_index(0.0)] == pytest.approx(2.0, abs=1e-12)


def test_disk_ahead():
    s = raycast_scan(world([Agent(center=(2, 0), radius=0.3)]), 360, 5.0)
    assert s.ranges[s.beam_index(0.0)] == pytest.approx(1.7, abs=1e-12)


def test_beams_in_ego_frame():
    s = raycast_scan(world(segments=[((-1, 2), (1, 2))], theta=math.pi / 2), 360, 5.0)
    assert s.ranges[s.beam_index(0.0)] == pytest.approx(2.0, abs=1e-12)


def test_raycast_needs_three_beams():
    with pytest.raises(ValueError):
        raycast_scan(world(), 2, 5.0)


def test_raycast_noise_seeded():
    w = world(segments=[((2, -1), (2, 1))])
    a = raycast_scan(w, 90, 5.0, 0.01, np.random.default_rng(4))
    b = raycast_scan(w, 90, 5.0, 0.01, np.random.default_rng(4))
    np.testing.assert_array_equal(a.ranges, b.ranges)
    assert np.all((a.ranges > 0) & (a.ranges <= 5.0))


# --------------------------------------------------------------------------- stepping

def test_step_integrates_command():
    w = step_world(world(), (1.0, 0.0), 0.1)
    np.testing.assert_allclose(w.ego.p, [0.1, 0.0], atol=1e-15)
    w = step_world(world(theta=math.pi / 2), (1.0, 0.0), 0.1)
    np.testing.assert_allclose(w.ego.p, [0.0, 0.1], atol=1e-15)


def test_step_with_turn_matches_fine_integration():
    u, om, dt = np.array([0.6, 0.2]), 0.8, 0.5
    w = step_world(world(theta=0.3), u, dt, omega=om)
    p, th, h = np.zeros(2), 0.3, 1e-5
    for _ in range(round(dt / h)):
        c, s = math.cos(th + 0.5 * om * h), math.sin(th + 0.5 * om * h)
        p = p + h * np.array([c * u[0] - s * u[1], s * u[0] + c * u[1]])
        th += om * h
    np.testing.assert_allclose(w.ego.p, p, atol=1e-9)
    assert w.ego.theta == pytest.approx(0.3 + om * dt)


def test_step_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        step_world(world(), (1, 0), 0.0)


def test_agent_snaps_at_waypoint():
    a = Agent(center=(0, 0), radius=0.2, waypoints=((1, 0), (1, 1)), speed=1.0)
    b = a.advance(0.0, 1.5)
    np.testing.assert_allclose(b.center, [1.0, 0.5], atol=1e-12)
    np.testing.assert_allclose(b.velocity(1.5), [0.0, 1.0])
    end = b.advance(1.5, 5.0)
    np.testing.assert_allclose(end.center, [1.0, 1.0])
    assert not end.velocity(6.5).any()


def test_agent_delay_and_loop():
    a = Agent(center=(0, 0), radius=0.2, waypoints=((1, 0), (0, 0)), speed=1.0, loop=True, delay=1.0)
    assert a.advance(0.0, 0.5) is a
    b = a.advance(0.0, 1.5)
    np.testing.assert_allclose(b.center, [0.5, 0.0])
    c = b.advance(1.5, 2.0)  # 0.5 to (1,0), 1.0 back to origin, 0.5 out again
    np.testing.assert_allclose(c.center, [0.5, 0.0], atol=1e-12)


def test_agent_validation():
    with pytest.raises(ValueError):
        Agent(center=(0, 0), radius=0.0)
    with pytest.raises(ValueError):
        Agent(center=(0, 0), radius=0.1, speed=-1.0)


def test_collision_strict_boundary():
    assert not in_collision(world([Agent(center=(0.5, 0), radius=0.3)]))
    assert in_collision(world([Agent(center=(0.4999, 0), radius=0.3)]))
    assert not in_collision(world(segments=[((0.2, -1), (0.2, 1))]))
    assert in_collision(world(segments=[((0.1999, -1), (0.1999, 1))]))


# --------------------------------------------------------------------------- episodes

def test_classify_outcomes():
    assert classify(True, 0) == "success" and classify(False, 0) == "timeout"
    assert classify(True, 2) == "failure" and classify(False, 1) == "failure+timeout"


def test_local_waypoint():
    np.testing.assert_allclose(local_waypoint((0, 0), (10, 0), (1, 0), 3.0), [4.0, 0.0])
    np.testing.assert_allclose(local_waypoint((0, 0), (10, 0), (9, 0), 3.0), [10.0, 0.0])
    np.testing.assert_allclose(local_waypoint((0, 0), (10, 0), (5, 8), 3.0), [5.0, 0.0])


def test_head_on_constant_command_collides():
    sc = scenario_from_dict(HEAD_ON)
    res = run_episode(sc, plan=False, constant_command=(1.0, 0.0))
    assert res.collisions >= 1 and res.outcome == "failure+timeout"


def test_halving_dt_keeps_collisions():
    sc = scenario_from_dict(HEAD_ON)
    coarse = run_episode(sc, plan=False, constant_command=(1.0, 0.0))
    fine = run_episode(sc, plan=False, constant_command=(1.0, 0.0), sim_dt=0.005)
    assert coarse.collisions >= 1 and fine.collisions >= coarse.collisions


def test_grazing_pass_counted_once_per_contact():
    data = dict(HEAD_ON, agents=[{"start": [3, 0.45], "waypoints": [[-5, 0.45]], "speed": 1.0,
                                  "radius": 0.3}])
    res = run_episode(scenario_from_dict(data), plan=False, constant_command=(1.0, 0.0))
    flags = [row["collision"] for row in res.trace]
    rising = sum(1 for a, b in zip([0] + flags, flags) if b and not a)
    assert res.collisions == rising == 1


def test_empty_world_reaches_goal():
    res = run_episode(load_builtin("empty"))
    assert res.outcome == "success" and res.collisions == 0
    assert 4.0 < res.time_to_goal < 6.5


def test_walled_off_times_out():
    res = run_episode(load_builtin("walled_off"))
    assert res.outcome == "timeout" and res.collisions == 0
    assert res.time == pytest.approx(180.0)


def test_episode_deterministic():
    sc = load_builtin("closing_reopening")
    a = run_episode(sc, seed=3)
    b = run_episode(sc, seed=3)
    assert a.trace == b.trace and a.outcome == b.outcome


def test_rate_contract(monkeypatch):
    calls = []
    real = episode_mod.raycast_scan

    def counting(*args, **kw):
        calls.append(1)
        return real(*args, **kw)

    monkeypatch.setattr(episode_mod, "raycast_scan", counting)
    marks = []
    sc = scenario_from_dict(dict(HEAD_ON, time_limit=2.0))
    run_episode(sc, on_plan=lambda t, res: marks.append(len(calls)))
    per_plan = np.diff(marks)
    assert len(per_plan) > 3 and np.all(per_plan == 5)


def test_episode_writes_outputs(tmp_path):
    res = run_episode(load_builtin("empty"))
    paths = res.write(tmp_path)
    assert all(p.exists() for p in paths.values())
    header = paths["trace"].read_text().splitlines()[0].split(",")
    assert header[:9] == ["t", "x", "y", "theta", "ux", "uy", "source", "idle", "collision"]


# --------------------------------------------------------------------------- scenario files

def test_builtin_scenarios_load():
    for name in ("empty", "walled_off", "closing_reopening", "receding_corridor", "approaching_corridor",
                 "four_way"):
        sc = load_builtin(name)
        assert sc.name == name and all(a.speed <= 1.0 for a in sc.agents)


def test_polygon_closed(tmp_path):
    f = tmp_path / "p.yaml"
    f.write_text("ego: {start: [0, 0]}\ngoal: [1, 0]\npolygons: [[[2, -1], [3, -1], [3, 1]]]\n")
    assert load_scenario(f).segments.shape == (3, 2, 2)


@pytest.mark.parametrize("text", ["ego: [unclosed", "goal: [1, 0]\n", "ego: {start: [0, 0]}\ngoal: [1]\n",
                                  "ego: {start: [0, 0]}\ngoal: [1, 0]\nagents: [{radius: 0.2}]\n",
                                  "ego: {start: [0, 0]}\ngoal: [1, 0]\nn_beams: 2\n", "- 1\n- 2\n"])
def test_malformed_scenarios(tmp_path, text):
    f = tmp_path / "bad.yaml"
    f.write_text(text)
    with pytest.raises(ScenarioError):
        load_scenario(f)


def test_unknown_builtin():
    with pytest.raises(ScenarioError):
        load_builtin("nope")
