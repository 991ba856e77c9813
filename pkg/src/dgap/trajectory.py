"""Rollout, scan propagation, scoring, switching, tracking and the safety filter."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import PlannerConfig
from .feasibility import Leg, TubeFeasibility, pn_feasibility
from .goals import DegenerateGap, place_gap_goal  # noqa: F401  (re-exported)
from .manipulation import UntraversableGap, inflate_gap
from .types import (INFINITE_COST, IDLE_SOURCE, EgoState, GapPointState, Scan, SourceKind,
                    Trajectory, TrajectorySource, Ungap, rotate)


# --------------------------------------------------------------------------- rollout

def rollout_legs(legs: Sequence[Leg], cfg: PlannerConfig, source: TrajectorySource = IDLE_SOURCE,
                 gamma_e: float = 0.0, goal=None, intercept_time: float = math.inf,
                 idle_time: float = 0.0) -> Trajectory:
    """Integrate piecewise-constant velocity legs on the ``cfg.dt`` grid.

    The last sample sits exactly at the end of the final leg (or at the
    horizon if that comes first).
    """
    if not legs:
        return Trajectory.idle(0.0, cfg.dt)
    horizon = cfg.n_steps * cfg.dt
    t_end = min(legs[-1].t1, horizon)
    n = int(math.floor(t_end / cfg.dt + 1e-9))
    t = np.arange(n + 1) * cfg.dt
    if t_end - t[-1] > 1e-9:
        t = np.append(t, t_end)
    starts = np.array([leg.t0 for leg in legs])
    vels = np.array([leg.velocity for leg in legs])
    ends = np.array([leg.t1 for leg in legs])
    # position = sum of each leg's velocity times the time spent in it so far
    spent = np.clip(t[:, None] - starts[None, :], 0.0, (ends - starts)[None, :])
    p = spent @ vels
    idx = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(legs) - 1)
    v = vels[idx]
    v[t >= ends[-1] - 1e-12] = 0.0
    return Trajectory(t, p, v, source, gamma_e, None if goal is None else np.asarray(goal, float),
                      intercept_time, idle_time)


def rollout_pn_trajectory(feas: TubeFeasibility, cfg: PlannerConfig, index: int = 0) -> Trajectory:
    """PN rollout of a feasible tube: straight legs along each segment heading, idle while closed."""
    if not feas.feasible:
        raise ValueError("cannot roll out an infeasible tube")
    goal = feas.legs[-1].goal if feas.legs else None
    return rollout_legs(feas.legs, cfg, TrajectorySource(SourceKind.GAP_TUBE, index), feas.gamma_e,
                        goal, feas.t_intercept, feas.idle_time)


def ungap_trajectory(u: Ungap, cfg: PlannerConfig, waypoint=None, index: int = 0) -> Optional[Trajectory]:
    """Trail a receding ungap: PN toward a goal held inside the inflated ungap region."""
    try:
        g = inflate_gap(u.as_gap(), r_infl=cfg.r_infl)
        p_g, v_g = place_gap_goal(g, waypoint, True, cfg, depth=u.depth)
    except (UntraversableGap, DegenerateGap):
        return None
    res = pn_feasibility(p_g, v_g, cfg.v_nominal)
    if not res.feasible:
        return None
    vel = cfg.v_nominal * np.array([math.cos(res.gamma_e), math.sin(res.gamma_e)])
    leg = Leg(0.0, res.t_intercept, vel, p_g + v_g * res.t_intercept)
    return rollout_legs([leg], cfg, TrajectorySource(SourceKind.UNGAP, index), res.gamma_e, leg.goal,
                        res.t_intercept)


# --------------------------------------------------------------------------- scan propagation

@dataclass(frozen=True)
class PropagatedScanSet:
    scans: Tuple[Scan, ...]
    beta_dot: np.ndarray
    r_dot: np.ndarray
    dt: float

    def at(self, t: float) -> Scan:
        k = int(round(t / self.dt))
        return self.scans[min(max(k, 0), len(self.scans) - 1)]


def is_similar(v_i, v_j, v_min: float) -> bool:
    """Two gap points move together: both dynamic and with positively aligned velocities."""
    v_i, v_j = np.asarray(v_i, float), np.asarray(v_j, float)
    return (np.linalg.norm(v_i) >= v_min and np.linalg.norm(v_j) >= v_min and float(v_i @ v_j) > 0.0)


def polar_rates(p, v) -> Tuple[float, float]:
    """Bearing and range rates of a point moving with velocity ``v``."""
    x, y = float(p[0]), float(p[1])
    r2 = x * x + y * y
    return (x * v[1] - y * v[0]) / r2, (x * v[0] + y * v[1]) / math.sqrt(r2)


def propagate_scan(scan: Scan, raw_points: Sequence[GapPointState], cfg: PlannerConfig,
                   ego: Optional[EgoState] = None) -> PropagatedScanSet:
    """Extrapolate a scan over the horizon using the motion of bracketing gap points.

    Each hit beam lying between two consecutive (CCW) gap points that move
    alike inherits the mean of their polar rates; all other beams are held
    still. Moved returns are re-binned to the nearest beam, the nearer range
    winning any conflict, and bins they vacate read as no-return.
    """
    n_frames = cfg.n_steps + 1
    n = scan.n_beams
    beta_dot = np.zeros(n)
    r_dot = np.zeros(n)
    v_e = np.zeros(2) if ego is None else ego.v
    pts = sorted(raw_points, key=lambda q: q.bearing)
    if len(pts) >= 2:
        bear = np.array([q.bearing for q in pts])
        vels = [q.v + v_e for q in pts]
        rates = [polar_rates(q.p, v) for q, v in zip(pts, vels)]
        b = scan.bearings
        # CW neighbour = last point with bearing <= beam bearing (wrapping)
        cw = (np.searchsorted(bear, b, side="right") - 1) % len(pts)
        ccw = (cw + 1) % len(pts)
        hit = scan.hit_mask()
        for k in range(len(pts)):
            kn = (k + 1) % len(pts)
            if not is_similar(vels[k], vels[kn], cfg.v_min):
                continue
            sel = (cw == k) & (ccw == kn) & hit
            beta_dot[sel] = 0.5 * (rates[k][0] + rates[kn][0])
            r_dot[sel] = 0.5 * (rates[k][1] + rates[kn][1])

    moving = (beta_dot != 0.0) | (r_dot != 0.0)
    if not moving.any():
        scans = tuple(scan for _ in range(n_frames))
        return PropagatedScanSet(scans, beta_dot, r_dot, cfg.dt)

    base = np.array(scan.ranges)
    base_still = base.copy()
    base_still[moving] = scan.range_max
    idx_m = np.flatnonzero(moving)
    scans = [scan]
    for k in range(1, n_frames):
        t = k * cfg.dt
        r_new = np.clip(base[idx_m] + r_dot[idx_m] * t, 1e-3, scan.range_max)
        b_new = scan.bearings[idx_m] + beta_dot[idx_m] * t
        bins = np.round((b_new - scan.angle_min) / scan.angle_increment).astype(int) % n
        ranges = base_still.copy()
        np.minimum.at(ranges, bins, r_new)
        scans.append(Scan(ranges, scan.range_max, scan.angle_min, scan.angle_increment, scan.stamp + t))
    return PropagatedScanSet(tuple(scans), beta_dot, r_dot, cfg.dt)


# --------------------------------------------------------------------------- scoring

def obstacle_cost(d, cfg: PlannerConfig):
    """Piecewise clearance cost, vectorized over distances."""
    d = np.asarray(d, dtype=float)
    r_infl = cfg.r_infl
    c = np.where(d < cfg.r_max, cfg.c_obs * np.exp(-cfg.w_2 * (d - r_infl)), 0.0)
    return np.where(d <= r_infl, INFINITE_COST, c)


def _clearance(poses: np.ndarray, scan: Scan) -> np.ndarray:
    hits = scan.points()[scan.hit_mask()]
    if len(hits) == 0:
        return np.full(len(poses), np.inf)
    diff = poses[:, None, :] - hits[None, :, :]
    return np.sqrt(np.min(np.einsum("ijk,ijk->ij", diff, diff), axis=1))


def cost_at_pose(p, scan_k: Scan, cfg: PlannerConfig) -> float:
    d = _clearance(np.asarray(p, float).reshape(1, 2), scan_k)[0]
    return float(obstacle_cost(d, cfg))


@dataclass(frozen=True)
class ScoredTrajectory:
    traj: Trajectory
    cost: float
    terminal_cost: float
    mean_pose_cost: float
    social: float = 0.0
    deprioritized: bool = False

    @property
    def source(self) -> TrajectorySource:
        return self.traj.source


def social_cost(traj: Trajectory, agents: Sequence[Tuple[np.ndarray, np.ndarray]]) -> float:
    """Mean over poses of the summed relative-velocity penalty toward each agent.

    ``agents`` holds ``(p_h, v_h)`` pairs in the trajectory frame.
    """
    if not agents or len(traj) == 0:
        return 0.0
    total = np.zeros(len(traj))
    for p_h, v_h in agents:
        rel = np.asarray(p_h, float)[None, :] - traj.p
        dist = np.linalg.norm(rel, axis=1)
        v_rel = traj.v - np.asarray(v_h, float)[None, :]
        toward = np.maximum(np.einsum("ij,ij->i", v_rel, rel), 0.0)
        speed = np.linalg.norm(traj.v, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            term = np.where(dist > 0.0, (toward + speed) / np.where(dist > 0.0, dist, 1.0), INFINITE_COST)
        total += term
    return float(np.mean(total))


def score_trajectory(traj: Trajectory, scans: PropagatedScanSet, waypoint, cfg: PlannerConfig,
                     agents=None) -> ScoredTrajectory:
    """Terminal distance to the waypoint plus mean pose clearance cost over poses 1..N."""
    if len(traj) == 0:
        return ScoredTrajectory(traj, INFINITE_COST, INFINITE_COST, INFINITE_COST)
    waypoint = np.zeros(2) if waypoint is None else np.asarray(waypoint, float)
    terminal = cfg.w * float(np.linalg.norm(traj.p[-1] - waypoint))
    poses = traj.p[1:] if len(traj) > 1 else traj.p
    times = traj.t[1:] if len(traj) > 1 else traj.t
    keys = np.clip(np.round(times / scans.dt).astype(int), 0, len(scans.scans) - 1)
    costs = np.empty(len(poses))
    for k in np.unique(keys):
        sel = keys == k
        costs[sel] = obstacle_cost(_clearance(poses[sel], scans.scans[k]), cfg)
    mean_pose = float(np.mean(costs))
    social = 0.0
    if cfg.social_weight > 0 and agents:
        social = cfg.social_weight * social_cost(traj, agents)
    cost = terminal + mean_pose + social
    deprioritized = traj.idle_time > 0.5 * cfg.horizon
    return ScoredTrajectory(traj, cost, terminal, mean_pose, social, deprioritized)


# --------------------------------------------------------------------------- switching

def _rank(s: ScoredTrajectory):
    src = s.traj.source
    return (s.deprioritized, s.cost, s.traj.intercept_time, src.kind is not SourceKind.GAP_TUBE, src.index)


def select_trajectory(current: Optional[ScoredTrajectory], candidates: Sequence[ScoredTrajectory],
                      completed: bool = False, current_feasible: bool = True) -> Tuple[ScoredTrajectory, bool]:
    """Event-based switching.

    The current trajectory is kept unless it has been completed, now scores
    an infinite cost, or its tube became infeasible. Returns the selection
    and whether a switch happened.
    """
    healthy = (current is not None and not completed and current_feasible
               and math.isfinite(current.cost))
    if healthy:
        return current, False
    finite = [c for c in candidates if math.isfinite(c.cost)]
    if finite:
        return min(finite, key=_rank), True
    idle = Trajectory.idle()
    return ScoredTrajectory(idle, INFINITE_COST, INFINITE_COST, INFINITE_COST), True


# --------------------------------------------------------------------------- control

def track_trajectory(traj: Trajectory, p_ego, t: float, cfg: PlannerConfig) -> np.ndarray:
    """Holonomic feedback law ``clip(k_p (p_des - p) + v_des)`` with per-axis limits."""
    p_des, v_des = traj.sample(t)
    u = cfg.k_p * (p_des - np.asarray(p_ego, float)) + v_des
    return np.clip(u, -cfg.v_max, cfg.v_max)


def blending_potential(d: float, r_min: float, r_nom: float) -> float:
    if d <= 0.0:
        return 1.0
    psi = (r_min / d - r_min / r_nom) / (1.0 - r_min / r_nom)
    return min(max(psi, 0.0), 1.0)


def projection_operator_filter(u, scan: Scan, cfg: PlannerConfig) -> np.ndarray:
    """Attenuate the command component pointing at the nearest scan return."""
    u = np.asarray(u, dtype=float)
    hits = scan.points()[scan.hit_mask()]
    if len(hits) == 0:
        return u.copy()
    d2 = np.einsum("ij,ij->i", hits, hits)
    k = int(np.argmin(d2))
    d = math.sqrt(d2[k])
    if d >= cfg.r_nom_po or d == 0.0:
        return u.copy()
    n_hat = hits[k] / d
    inward = float(u @ n_hat)
    if inward <= 0.0:
        return u.copy()
    return u - blending_potential(d, cfg.r_min_po, cfg.r_nom_po) * inward * n_hat


# --------------------------------------------------------------------------- frames

def transform_trajectory(traj: Trajectory, d_p, d_theta: float, t_shift: float) -> Trajectory:
    """Re-express a trajectory in a frame displaced by ``d_p`` and rotated by ``d_theta``.

    ``d_p`` is the new origin in old-frame coordinates; ``t_shift`` seconds are
    dropped from the start so that time zero is now.
    """
    p = np.array([rotate(q - d_p, -d_theta) for q in traj.p]) if len(traj) else traj.p
    v = np.array([rotate(q, -d_theta) for q in traj.v]) if len(traj) else traj.v
    t = traj.t - t_shift
    goal = None if traj.goal is None else rotate(traj.goal - d_p, -d_theta)
    return Trajectory(t, p, v, traj.source, traj.gamma_e - d_theta, goal,
                      traj.intercept_time - t_shift, traj.idle_time)


def remaining(traj: Trajectory, dt: float) -> Trajectory:
    """Part of a (time-shifted) trajectory from now on, re-gridded to start at zero."""
    if len(traj) == 0 or traj.t[-1] <= 0.0:
        p, _ = traj.sample(0.0) if len(traj) else (np.zeros(2), None)
        return Trajectory(np.zeros(1), p.reshape(1, 2), np.zeros((1, 2)), traj.source, traj.gamma_e,
                          traj.goal, 0.0, traj.idle_time)
    t_end = float(traj.t[-1])
    n = int(math.floor(t_end / dt + 1e-9))
    t = np.arange(n + 1) * dt
    if t_end - t[-1] > 1e-9:
        t = np.append(t, t_end)
    samples = [traj.sample(tk) for tk in t]
    p = np.array([s[0] for s in samples])
    v = np.array([s[1] for s in samples])
    return Trajectory(t, p, v, traj.source, traj.gamma_e, traj.goal, traj.intercept_time, traj.idle_time)
