import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dgap.config import PlannerConfig
from dgap.tracking import (GapTracker, PointModel, associate_points, gap_only_velocity, model_correct,
                           model_predict, solve_assignment)
from dgap.types import EgoState, Side

from helpers import gap, point

CFG = PlannerConfig()
_J = np.array([[0.0, -1.0], [1.0, 0.0]])


def brute_force_min(cost):
    n, m = cost.shape
    if n <= m:
        return min(sum(cost[i, c[i]] for i in range(n)) for c in itertools.permutations(range(m), n))
    return min(sum(cost[r[j], j] for j in range(m)) for r in itertools.permutations(range(n), m))


def total(cost, pairs):
    return sum(cost[i, j] for i, j in pairs)


def test_assignment_identity():
    cost = 1.0 - np.eye(3)
    assert solve_assignment(cost) == [(0, 0), (1, 1), (2, 2)]


def test_assignment_two_by_two():
    cost = np.array([[4.0, 1.0], [2.0, 8.0]])
    pairs = solve_assignment(cost)
    assert set(pairs) == {(0, 1), (1, 0)} and total(cost, pairs) == 3.0


def test_assignment_rectangular():
    cost = np.array([[1.0, 9.0, 9.0], [9.0, 1.0, 9.0]])
    pairs = solve_assignment(cost)
    assert set(pairs) == {(0, 0), (1, 1)} and total(cost, pairs) == 2.0


def test_assignment_empty_and_invalid():
    assert solve_assignment(np.zeros((0, 3))) == []
    with pytest.raises(ValueError):
        solve_assignment([[1.0, -1.0]])
    with pytest.raises(ValueError):
        solve_assignment([[1.0, np.inf]])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.integers(1, 6).flatmap(
    lambda m: arrays(float, (n, m), elements=st.integers(0, 20).map(float)))))
def test_assignment_matches_brute_force(cost):
    pairs = solve_assignment(cost)
    assert len(pairs) == min(cost.shape)
    assert len({i for i, _ in pairs}) == len(pairs) == len({j for _, j in pairs})
    assert total(cost, pairs) == brute_force_min(cost)


def test_associate_identical_points():
    pts = [point(1, 0, Side.RIGHT), point(0, 1, Side.LEFT), point(-1, 0, Side.RIGHT)]
    a = associate_points(pts, pts, CFG)
    assert a.matches == {0: 0, 1: 1, 2: 2} and a.new == []


def test_associate_severed_past_threshold():
    prev = [point(1, 0, Side.LEFT)]
    curr = [point(1 + CFG.tau_assoc + 0.01, 0, Side.LEFT)]
    a = associate_points(prev, curr, CFG)
    assert a.matches == {} and a.new == [0]
    curr = [point(1 + CFG.tau_assoc - 0.01, 0, Side.LEFT)]
    assert associate_points(prev, curr, CFG).matches == {0: 0}


def test_associate_four_to_three_jittered():
    rng = np.random.default_rng(3)
    ang = np.array([-2.0, -0.5, 1.0, 2.5])
    prev = [point(2 * math.cos(a), 2 * math.sin(a), Side.LEFT) for a in ang]
    keep = [0, 2, 3]
    curr = [point(*(prev[k].p + rng.uniform(-0.02, 0.02, 2)), Side.LEFT) for k in keep]
    a = associate_points(prev, curr, CFG)
    assert a.new == []
    assert [a.matches[j] for j in range(3)] == keep  # CCW order preserved
    cost = np.linalg.norm(np.array([p.p for p in prev])[:, None] - np.array([c.p for c in curr])[None], axis=2)
    assert total(cost, [(i, j) for j, i in a.matches.items()]) == pytest.approx(brute_force_min(cost))


def test_associate_never_crosses_sides():
    a = associate_points([point(1, 0, Side.LEFT)], [point(1, 0, Side.RIGHT)], CFG)
    assert a.matches == {} and a.new == [0]


def _rhs(x, omega, a):
    p, v = x[:2], x[2:]
    return np.concatenate([v - omega * (_J @ p), -np.asarray(a) - omega * (_J @ v)])


def rk4(x, omega, a, dt, h=1e-5):
    n = int(round(dt / h))
    for _ in range(n):
        k1 = _rhs(x, omega, a)
        k2 = _rhs(x + 0.5 * h * k1, omega, a)
        k3 = _rhs(x + 0.5 * h * k2, omega, a)
        k4 = _rhs(x + h * k3, omega, a)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def test_predict_inertial_constant_velocity():
    m = PointModel.new((1, 0), (0, 1), CFG)
    out = model_predict(m, EgoState(), 0.1)
    np.testing.assert_allclose(out.p, [1.0, 0.1], atol=1e-12)
    np.testing.assert_allclose(out.v, [0.0, 1.0], atol=1e-12)


def test_predict_spin_rotates_clockwise():
    m = PointModel.new((1, 0), (0, 0), CFG)
    out = model_predict(m, EgoState(omega=math.pi / 2), 1e-3)
    assert out.p[1] < 0.0
    assert out.p[1] == pytest.approx(-math.pi / 2 * 1e-3, rel=1e-5)


def test_predict_matches_rk4():
    m = PointModel.new((2, 1), (-0.5, 0.2), CFG)
    ego = EgoState(omega=0.3, a=(0.1, 0.0))
    out = model_predict(m, ego, 0.05)
    ref = rk4(m.x, 0.3, (0.1, 0.0), 0.05)
    np.testing.assert_allclose(out.x, ref, atol=1e-5)
    assert np.max(np.abs(out.x - ref)) < 1e-10


def test_predict_covariance_grows_symmetric():
    m = PointModel.new((2, 1), (-0.5, 0.2), CFG)
    out = model_predict(m, EgoState(omega=0.7), 0.04)
    assert np.trace(out.P) > np.trace(m.P)
    np.testing.assert_array_equal(out.P, out.P.T)


def test_correct_at_prediction_keeps_mean():
    m = model_predict(PointModel.new((2, 1), (0.3, 0.0), CFG), EgoState(), 0.04)
    out = model_correct(m, m.p)
    np.testing.assert_array_equal(out.x, m.x)
    assert np.trace(out.P) < np.trace(m.P)


def _converge(p_world, v_world, v_ego, frames=50, dt=0.04):
    m = PointModel.new(p_world, (0.0, 0.0), CFG)
    ego = EgoState(v=v_ego)
    for k in range(1, frames + 1):
        m = model_predict(m, ego, dt)
        z = np.asarray(p_world) + (np.asarray(v_world) - np.asarray(v_ego)) * k * dt
        m = model_correct(m, z)
    return m


def test_static_point_from_translating_ego():
    m = _converge((2.0, 1.0), (0.0, 0.0), (0.6, 0.2))
    assert np.linalg.norm(m.v - np.array([-0.6, -0.2])) < 0.05


def test_moving_agent_from_static_ego():
    m = _converge((2.0, 0.0), (0.5, 0.0), (0.0, 0.0))
    assert np.linalg.norm(m.v - np.array([0.5, 0.0])) < 0.05


def test_gap_only_velocity_examples():
    np.testing.assert_allclose(gap_only_velocity(np.array([-1.0, 0.0]), EgoState(v=(1, 0))), [0, 0])
    np.testing.assert_allclose(gap_only_velocity(np.zeros(2), EgoState(v=(0.5, 0))), [0.5, 0])


def test_covariance_symmetry_long_run():
    rng = np.random.default_rng(1)
    m = PointModel.new((1.5, -0.5), (0.2, 0.1), CFG)
    ego = EgoState(omega=0.8, a=(0.1, -0.05), v=(0.3, 0.0))
    for _ in range(10_000):
        m = model_predict(m, ego, 0.04)
        m = model_correct(m, m.p + rng.normal(0, 0.01, 2))
    assert np.max(np.abs(m.P - m.P.T)) < 1e-10
    assert np.all(np.linalg.eigvalsh(m.P) >= -1e-12)


def test_tracker_keeps_model_ids_and_spawns_with_static_prior():
    tr = GapTracker(CFG)
    ego = EgoState(v=(0.5, 0.0))
    g = gap((2.0, -1.0), (2.0, 1.0))
    first = tr.track_gaps([g], ego, 0.0)
    np.testing.assert_allclose(first[0].left.v, [-0.5, 0.0])
    moved = gap((1.98, -1.0), (1.98, 1.0))
    second = tr.track_gaps([moved], ego, 0.04)
    assert second[0].left.model_id == first[0].left.model_id
    assert second[0].right.model_id == first[0].right.model_id
    assert second[0].left.covariance is not None
