"""Radial gap conversion and inflation for the robot radius."""
from __future__ import annotations

import math
from typing import List, Optional, Sequence

import numpy as np

from .config import PlannerConfig
from .types import Gap, GapKind, GapPointState, Side, polar_point


class UntraversableGap(ValueError):
    """An endpoint lies inside the inflated robot radius or the gap collapsed."""


def convert_radial_gap(g: Gap) -> Gap:
    """Pivot a radial gap about its nearer endpoint into a swept gap.

    The far endpoint keeps its distance to the near endpoint and swings
    outward (widening the gap) until it sits at the near endpoint's range.
    When that distance exceeds the near range's diameter, the far endpoint
    lands diametrically opposite, giving a half-plane gap.
    """
    if g.kind is not GapKind.RADIAL:
        return g
    if g.left.ungap_id is not None or g.right.ungap_id is not None:
        return g
    near, far = (g.right, g.left) if g.right.range <= g.left.range else (g.left, g.right)
    r_n = near.range
    c = float(np.linalg.norm(far.p - near.p))
    phi = 2.0 * math.asin(min(c / (2.0 * r_n), 1.0))
    sign = 1.0 if near.side is Side.RIGHT else -1.0
    moved = far.replace(p=polar_point(r_n, near.bearing + sign * phi))
    if near.side is Side.RIGHT:
        return Gap(left=moved, right=near, kind=GapKind.SWEPT, available=g.available)
    return Gap(left=near, right=moved, kind=GapKind.SWEPT, available=g.available)


def inflate_point(p: GapPointState, r_infl: float, direction: float) -> GapPointState:
    """Rotate an endpoint by ``asin(r_infl/|p|)`` about the ego, staying tangent to its inflated circle.

    ``direction`` is +1 for counterclockwise (right endpoints) and -1 for
    clockwise (left endpoints). The inflated point is displaced by
    ``h = r_infl / sin(pi/2 - alpha)`` perpendicular to the line of sight.
    """
    r = p.range
    if r <= r_infl:
        raise UntraversableGap(f"endpoint at range {r:.3f} inside inflated radius {r_infl:.3f}")
    if r_infl <= 0.0:
        return p
    alpha = math.asin(r_infl / r)
    beta_s = 0.5 * math.pi - alpha
    h = r_infl / math.sin(beta_s)
    los = p.p / r
    normal = direction * np.array([-los[1], los[0]])
    return p.replace(p=p.p + h * normal)


def inflate_gap(g: Gap, ego=None, cfg: Optional[PlannerConfig] = None, r_infl: Optional[float] = None) -> Gap:
    """Shrink a gap inward to account for the robot's inflated radius."""
    if r_infl is None:
        cfg = cfg or PlannerConfig()
        r_infl = cfg.r_infl
    right = inflate_point(g.right, r_infl, +1.0)
    left = inflate_point(g.left, r_infl, -1.0)
    if r_infl > 0.0:
        a_r = math.asin(r_infl / g.right.range)
        a_l = math.asin(r_infl / g.left.range)
        if g.span - a_r - a_l <= 0.0:
            raise UntraversableGap("gap span inverted by inflation")
    out = g.replace(left=left, right=right)
    if out.chord < 1e-3 and out.span < math.pi:
        raise UntraversableGap("inflated gap degenerate")
    return out


def manipulate_gaps(gaps: Sequence[Gap], cfg: PlannerConfig) -> List[Gap]:
    """Radial conversion then inflation; untraversable gaps are dropped."""
    out = []
    for g in gaps:
        try:
            out.append(inflate_gap(convert_radial_gap(g), r_infl=cfg.r_infl))
        except UntraversableGap:
            continue
    return out
