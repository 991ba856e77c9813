"""Gap propagation into gap tubes and parallel-navigation feasibility."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import PlannerConfig
from .goals import DegenerateGap, place_gap_goal
from .tracking import solve_assignment
from .types import (EgoState, Gap, GapPointState, GapTube, TubeSegment, bearing, ccw_span,
                    wrap_angle)


class Reason(enum.Enum):
    OK = "ok"
    SPEED_LIMITED = "speed_limited"
    CLOSES_BEFORE_INTERCEPT = "closes_before_intercept"


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    theta_e: float = 0.0
    gamma_e: float = 0.0
    t_intercept: float = math.inf
    reason: Reason = Reason.OK
    t_f: float = math.inf


@dataclass(frozen=True)
class PropagatedFrame:
    t_k: float
    gaps: Tuple[Gap, ...]
    points: Tuple[GapPointState, ...]
    pairs: Tuple[Tuple[int, int], ...] = ()


def pn_feasibility(p_g, v_g, v_e: float, t_f: float = math.inf) -> FeasibilityResult:
    """Constant-bearing intercept of a constant-velocity goal at ego speed ``v_e``.

    ``p_g`` and ``v_g`` are the goal position and velocity relative to the
    ego. The ego heading keeps the line-of-sight bearing fixed:
    ``v_e sin(theta_e) = v_g sin(theta_g)`` while closing the range.
    """
    p_g = np.asarray(p_g, dtype=float)
    v_g = np.asarray(v_g, dtype=float)
    r0 = float(np.linalg.norm(p_g))
    if r0 <= 0.0:
        raise ValueError("goal must not coincide with the ego")
    if v_e <= 0.0:
        raise ValueError("ego speed must be positive")
    beta_g = bearing(p_g)
    speed_g = float(np.linalg.norm(v_g))
    if speed_g == 0.0:
        t = r0 / v_e
        ok = t <= t_f
        return FeasibilityResult(ok, 0.0, beta_g, t, Reason.OK if ok else Reason.CLOSES_BEFORE_INTERCEPT, t_f)
    theta_g = wrap_angle(bearing(v_g) - beta_g)
    K = v_e / speed_g
    s = math.sin(theta_g) / K
    if abs(s) > 1.0:
        return FeasibilityResult(False, reason=Reason.SPEED_LIMITED, t_f=t_f)
    principal = math.asin(s)
    candidates = [principal, math.copysign(math.pi, principal) - principal]
    # normalized closing rate K cos(theta_e) - cos(theta_g) must be positive; a rounding-level
    # value is a tie (marginal intercept), which counts as infeasible
    valid = [th for th in candidates if K * math.cos(th) - math.cos(theta_g) > 1e-9]
    if not valid:
        return FeasibilityResult(False, reason=Reason.SPEED_LIMITED, t_f=t_f)
    theta_e = min(valid, key=abs)
    t = (r0 / speed_g) / (K * math.cos(theta_e) - math.cos(theta_g))
    gamma_e = wrap_angle(theta_e + beta_g)
    if t > t_f:
        return FeasibilityResult(False, theta_e, gamma_e, t, Reason.CLOSES_BEFORE_INTERCEPT, t_f)
    return FeasibilityResult(True, theta_e, gamma_e, t, Reason.OK, t_f)


def extract_propagated_gaps(points: Sequence[GapPointState]) -> List[Gap]:
    """Pair CCW-ordered propagated endpoints into available and unavailable gaps."""
    return [g for g, _ in _extract_pairs(points)]


def _extract_pairs(points: Sequence[GapPointState]):
    n = len(points)
    rights = [k for k, p in enumerate(points) if p.side.value == "right"]
    if not rights:
        return []
    i0 = rights[0]
    assigned = [False] * n
    out = []
    for i in range(n):
        a = (i0 + i) % n
        if assigned[a]:
            continue
        pa = points[a]
        for di in range(1, n):
            b = (i0 + (i + di) % n) % n
            if assigned[b]:
                continue
            pb = points[b]
            same_ungap = pa.ungap_id is not None and pa.ungap_id == pb.ungap_id
            if pa.side != pb.side and not same_ungap:
                available = pa.side.value == "right"
                out.append((Gap(left=pb, right=pa, available=available), (a, b)))
                assigned[a] = assigned[b] = True
                break
    return out


def gap_distance(a: Gap, b: Gap) -> float:
    return float(np.sum((a.left.p - b.left.p) ** 2) + np.sum((a.right.p - b.right.p) ** 2))


def associate_propagated_gaps(prev: Sequence[Gap], curr: Sequence[Gap]) -> Dict[int, int]:
    """Match gaps between consecutive propagation steps (prev index -> curr index)."""
    if not prev or not curr:
        return {}
    cost = np.array([[gap_distance(a, b) for b in curr] for a in prev])
    return {i: j for i, j in solve_assignment(cost)}


def _pair_key(g: Gap) -> Tuple[int, int]:
    r, l = (g.right, g.left) if g.right.side.value == "right" else (g.left, g.right)
    return r.model_id, l.model_id


def _signed_span(g: Gap) -> float:
    """CCW span from the right-labelled to the left-labelled point; negative when inverted."""
    r, l = (g.right, g.left) if g.right.side.value == "right" else (g.left, g.right)
    span = ccw_span(r.bearing, l.bearing)
    return span if g.available else span - 2.0 * math.pi


def _same_endpoints(a: Gap, b: Gap) -> bool:
    return a.left.model_id == b.left.model_id and a.right.model_id == b.right.model_id


@dataclass
class _TubeState:
    segments: list
    current: Optional[int]
    seg_gap: Gap
    seg_start: float


def propagate_gap_points(manip: Sequence[Gap], ego: Optional[EgoState], cfg: PlannerConfig,
                         return_frames: bool = False):
    """Propagate manipulated gap endpoints over the horizon and build one gap tube per gap.

    Endpoint velocities are relative to the ego; the ego velocity is added
    back so that only obstacle motion is propagated, with the ego frozen at
    the origin. Each propagated point gets a unique ``model_id`` so that
    gap identity can be compared across steps.
    """
    if not manip:
        return ([], []) if return_frames else []
    v_e = np.zeros(2) if ego is None else ego.v
    base: List[GapPointState] = []
    for g in manip:
        for q in (g.right, g.left):
            base.append(q.replace(v=q.v + v_e, model_id=len(base)))
    p0 = np.array([q.p for q in base])
    vel = np.array([q.v for q in base])

    gaps0 = [Gap(left=base[2 * k + 1], right=base[2 * k], kind=g.kind, available=g.available)
             for k, g in enumerate(manip)]
    tubes = [_TubeState([], k, gaps0[k], 0.0) for k in range(len(gaps0))]
    prev = gaps0
    prev_unwrapped = {_pair_key(g): (_signed_span(g), _signed_span(g)) for g in gaps0}
    frames = [PropagatedFrame(0.0, tuple(gaps0), tuple(sorted(base, key=lambda q: q.bearing)))]
    horizon = cfg.n_steps * cfg.dt

    for k in range(1, cfg.n_steps + 1):
        t = k * cfg.dt
        pos = p0 + vel * t
        pts = [q.replace(p=pos[i]) for i, q in enumerate(base)]
        order = sorted(range(len(pts)), key=lambda i: bearing(pts[i].p) if np.any(pts[i].p) else 0.0)
        ordered = [pts[i] for i in order]
        curr = [g for g, _ in _extract_pairs(ordered)]
        mapping = associate_propagated_gaps(prev, curr)

        # span continuity: a pair whose right-to-left span unwraps through zero has crossed
        curr_unwrapped = []
        for j, g in enumerate(curr):
            key = _pair_key(g)
            span = _signed_span(g)
            if key in prev_unwrapped:
                u = prev_unwrapped[key][0] + wrap_angle(span - prev_unwrapped[key][1])
            else:
                u = span
            curr_unwrapped.append((key, u, span))
            if g.available and u <= 0.0:
                curr[j] = g.replace(available=False)
        for ts in tubes:
            if ts.current is None:
                continue
            j = mapping.get(ts.current)
            if j is None:
                closed = ts.seg_gap.replace(available=False)
                _close_segment(ts, t, closed)
                ts.current = None
                continue
            g = curr[j]
            if not (_same_endpoints(ts.seg_gap, g) and g.available == ts.seg_gap.available):
                _close_segment(ts, t, g)
            ts.current = j
        prev = curr
        prev_unwrapped = {k: (u, sp) for k, u, sp in curr_unwrapped}
        frames.append(PropagatedFrame(t, tuple(curr), tuple(ordered)))

    out = []
    for idx, ts in enumerate(tubes):
        ts.segments.append(TubeSegment(ts.seg_gap, ts.seg_start, horizon - ts.seg_start))
        out.append(GapTube(tuple(ts.segments), horizon, idx))
    return (out, frames) if return_frames else out


def _close_segment(ts: _TubeState, t: float, next_gap: Gap) -> None:
    ts.segments.append(TubeSegment(ts.seg_gap, ts.seg_start, t - ts.seg_start))
    ts.seg_gap = next_gap
    ts.seg_start = t


@dataclass(frozen=True)
class Leg:
    """Constant-velocity piece of a planned motion."""

    t0: float
    t1: float
    velocity: np.ndarray
    goal: Optional[np.ndarray] = None


@dataclass(frozen=True)
class TubeFeasibility:
    feasible: bool
    segments: Tuple[FeasibilityResult, ...]
    legs: Tuple[Leg, ...] = ()
    goal: Optional[np.ndarray] = None
    goal_velocity: Optional[np.ndarray] = None
    t_intercept: float = math.inf
    idle_time: float = 0.0
    reason: Reason = Reason.OK

    @property
    def gamma_e(self) -> float:
        for r in reversed(self.segments):
            if r.feasible:
                return r.gamma_e
        return 0.0


def _segment_gap_at(seg: TubeSegment, t: float) -> Gap:
    dt = t - seg.start
    g = seg.gap
    return g.replace(left=g.left.replace(p=g.left.at(dt)), right=g.right.replace(p=g.right.at(dt)))


def _shift_gap(g: Gap, q) -> Gap:
    """Re-center a gap on the robot's position ``q``."""
    if not np.any(q):
        return g
    return g.replace(left=g.left.replace(p=g.left.p - q), right=g.right.replace(p=g.right.p - q))


def tube_feasible(tube: GapTube, ego: Optional[EgoState], cfg: PlannerConfig, waypoint=None,
                  v_e: Optional[float] = None, reach_waypoint: bool = False) -> TubeFeasibility:
    """Walk a tube's segments, steering with parallel navigation and idling while it is closed.

    An available segment is passed once its goal is intercepted before the
    segment ends. A segment that ends before the intercept only fails the
    tube when no later segment reopens it; a segment that is still open at
    the horizon is not known to close.
    """
    v_e = cfg.v_nominal if v_e is None else v_e
    q = np.zeros(2)
    t = 0.0
    legs: List[Leg] = []
    results: List[FeasibilityResult] = []
    idle = 0.0
    segs = tube.segments
    for k, seg in enumerate(segs):
        if seg.start < t - 1e-12:
            continue
        if not seg.gap.available:
            legs.append(Leg(t, seg.end, np.zeros(2)))
            idle += seg.duration
            t = seg.end
            continue
        gap = _segment_gap_at(seg, t)
        try:
            local_wp = None if waypoint is None else np.asarray(waypoint, float) - q
            p_g, v_g = place_gap_goal(_shift_gap(gap, q), local_wp, False, cfg,
                                      reach_waypoint=reach_waypoint)
            p_g = p_g + q
        except DegenerateGap:
            results.append(FeasibilityResult(False, reason=Reason.SPEED_LIMITED))
            return TubeFeasibility(False, tuple(results), tuple(legs), reason=Reason.SPEED_LIMITED)
        reopens = any(s.gap.available for s in segs[k + 1:])
        open_at_horizon = seg.end >= tube.horizon - 1e-9
        rel = p_g - q
        if np.linalg.norm(rel) < 1e-9:
            res = FeasibilityResult(True, 0.0, 0.0, 0.0, Reason.OK, seg.end - t)
            results.append(res)
            return TubeFeasibility(True, tuple(results), tuple(legs), p_g, v_g, t, idle)
        t_f = math.inf if (open_at_horizon or reopens) else seg.end - t
        res = pn_feasibility(rel, v_g, v_e, t_f)
        res = FeasibilityResult(res.feasible, res.theta_e, res.gamma_e, res.t_intercept, res.reason,
                                seg.end - t)
        results.append(res)
        if not res.feasible:
            return TubeFeasibility(False, tuple(results), tuple(legs), reason=res.reason)
        u = v_e * np.array([math.cos(res.gamma_e), math.sin(res.gamma_e)])
        t_hit = t + res.t_intercept
        if t_hit <= seg.end + 1e-12 or open_at_horizon and not reopens:
            legs.append(Leg(t, t_hit, u, p_g + v_g * res.t_intercept))
            return TubeFeasibility(True, tuple(results), tuple(legs), p_g, v_g, t_hit, idle)
        legs.append(Leg(t, seg.end, u))
        q = q + u * (seg.end - t)
        t = seg.end
    return TubeFeasibility(False, tuple(results), tuple(legs), reason=Reason.CLOSES_BEFORE_INTERCEPT)
