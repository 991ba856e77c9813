"""Gap goal placement: convex combinations of the gap endpoint states."""
from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from .config import PlannerConfig
from .types import Gap, bearing, ccw_span, polar_point, wrap_angle


class DegenerateGap(ValueError):
    pass


def reduce_span(g: Gap, max_span: float, waypoint=None) -> Gap:
    """Shrink a wide gap to a sub-span of ``max_span`` radians.

    The sub-span is slid to contain the waypoint bearing when possible and
    otherwise centered on the gap bisector. Endpoints keep their range and
    velocity.
    """
    span = g.span
    if span <= max_span:
        return g
    b_r = g.right.bearing
    half = 0.5 * max_span
    if waypoint is not None and np.linalg.norm(waypoint) > 1e-9:
        offset = ccw_span(b_r, bearing(waypoint)) % (2 * math.pi)
        if offset > span:
            # waypoint lies outside the gap: snap to the nearer edge
            offset = span if (offset - span) < (2 * math.pi - offset) else 0.0
        center = min(max(offset, half), span - half)
    else:
        center = 0.5 * span
    new_r = polar_point(g.right.range, wrap_angle(b_r + center - half))
    new_l = polar_point(g.left.range, wrap_angle(b_r + center + half))
    return g.replace(right=g.right.replace(p=new_r), left=g.left.replace(p=new_l))


def waypoint_in_gap(g: Gap, waypoint, margin: float = 0.0) -> bool:
    if waypoint is None:
        return False
    w = np.asarray(waypoint, dtype=float)
    r = float(np.linalg.norm(w))
    if r < 1e-9:
        return True
    if r >= min(g.left.range, g.right.range) - margin:
        return False
    return ccw_span(g.right.bearing, bearing(w)) < g.span


def optimal_kappa(p_l, p_r, waypoint, margin: float) -> float:
    """Convex weight on the left endpoint that brings the goal closest to ``waypoint``."""
    if waypoint is None:
        return 0.5
    d = np.asarray(p_l, float) - np.asarray(p_r, float)
    dd = float(d @ d)
    if dd < 1e-18:
        return 0.5
    k = float((np.asarray(waypoint, float) - p_r) @ d) / dd
    return min(max(k, margin), 1.0 - margin)


def place_gap_goal(g: Gap, waypoint=None, is_ungap: bool = False, cfg: Optional[PlannerConfig] = None,
                   depth: float = math.inf, max_span: Optional[float] = None,
                   reach_waypoint: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Goal position and velocity inside a (manipulated) gap.

    Returns ``(p_g, v_g)`` with ``p_g = k p_l + (1 - k) p_r`` for the clamped
    ``k`` nearest the waypoint. Ungap goals are pulled toward the ego by the
    inflated radius and kept that far in front of the closest return
    ``depth`` inside the ungap.

    With ``reach_waypoint`` a waypoint that lies inside the gap's angular
    span and nearer than both endpoints is used directly as a static goal.
    """
    cfg = cfg or PlannerConfig()
    if reach_waypoint and not is_ungap and waypoint_in_gap(g, waypoint, cfg.r_infl):
        return np.asarray(waypoint, dtype=float).copy(), np.zeros(2)
    max_span = cfg.goal_span_max if max_span is None else max_span
    g = reduce_span(g, min(max_span, math.pi), waypoint)
    p_l, p_r = g.left.p, g.right.p
    if np.linalg.norm(p_l - p_r) < 1e-9:
        raise DegenerateGap("coincident gap endpoints")
    k = optimal_kappa(p_l, p_r, waypoint, cfg.kappa_margin)
    p_g = k * p_l + (1.0 - k) * p_r
    v_g = k * g.left.v + (1.0 - k) * g.right.v
    if is_ungap:
        r = float(np.linalg.norm(p_g))
        r_goal = min(r - cfg.r_infl, depth - 2.0 * cfg.r_infl)
        if r_goal <= 1e-3:
            raise DegenerateGap("ungap goal would lie behind the robot")
        p_g = p_g * (r_goal / r)
    return p_g, v_g
