"""Scan to gaps: detection, simplification and ungap detection."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import PlannerConfig
from .types import TWO_PI, Gap, GapKind, GapPointState, Scan, Side, Ungap, ccw_span


@dataclass(frozen=True)
class RawGapSet:
    gaps: Tuple[Gap, ...] = field(default_factory=tuple)
    stamp: float = 0.0

    def __len__(self):
        return len(self.gaps)

    def __iter__(self):
        return iter(self.gaps)


def _point(scan: Scan, i: int, side: Side) -> GapPointState:
    return GapPointState(scan.point(i), np.zeros(2), side, beam=int(i))


def _max_range_runs(is_max: np.ndarray) -> List[Tuple[int, int]]:
    """Maximal circular runs of True as ``(start, length)`` pairs."""
    n = len(is_max)
    # rotate so the sequence starts right after a non-max beam
    first_hit = int(np.flatnonzero(~is_max)[0])
    runs = []
    start = None
    for k in range(1, n + 1):
        i = (first_hit + k) % n
        if is_max[i]:
            if start is None:
                start = i
                length = 0
            length += 1
        elif start is not None:
            runs.append((start, length))
            start = None
    return runs


def detect_gaps(scan: Scan, cfg: PlannerConfig) -> RawGapSet:
    """Find radial (range discontinuity) and swept (no-return run) gaps in a scan.

    Swept gaps are bounded by the obstacle beams on either side of a run of
    at least ``cfg.min_swept_beams`` max-range beams. Radial gaps span a
    single beam pair whose ranges jump by more than ``cfg.tau_radial``.
    """
    r = scan.ranges
    n = len(r)
    is_max = r >= scan.range_max
    if is_max.all():
        # free space all around: one gap whose endpoints coincide
        p = _point(scan, 0, Side.RIGHT)
        return RawGapSet((Gap(left=p.replace(side=Side.LEFT), right=p, kind=GapKind.SWEPT),), scan.stamp)

    gaps = []
    for start, length in _max_range_runs(is_max):
        if length < cfg.min_swept_beams:
            continue
        right = (start - 1) % n
        left = (start + length) % n
        gaps.append(Gap(left=_point(scan, left, Side.LEFT), right=_point(scan, right, Side.RIGHT),
                        kind=GapKind.SWEPT))

    nxt = np.roll(r, -1)
    both_hit = ~is_max & ~np.roll(is_max, -1)
    jumps = np.flatnonzero(both_hit & (np.abs(nxt - r) > cfg.tau_radial))
    for i in jumps:
        j = (i + 1) % n
        gaps.append(Gap(left=_point(scan, j, Side.LEFT), right=_point(scan, i, Side.RIGHT),
                        kind=GapKind.RADIAL))

    gaps.sort(key=lambda g: g.right.bearing)
    return RawGapSet(tuple(gaps), scan.stamp)


def _admits_passage(gap: Gap, r_infl: float) -> bool:
    # a gap wider than a half-plane is passable regardless of its endpoint chord
    return gap.span >= math.pi or gap.chord >= 2.0 * r_infl


def _merge(a: Gap, b: Gap) -> Gap:
    kind = GapKind.SWEPT if GapKind.SWEPT in (a.kind, b.kind) else GapKind.RADIAL
    return Gap(left=b.left, right=a.right, kind=kind)


def simplify_gaps(raw, cfg: PlannerConfig) -> List[Gap]:
    """Merge gaps separated by untraversable slivers and drop gaps too narrow to pass."""
    gaps = list(raw.gaps if isinstance(raw, RawGapSet) else raw)
    if not gaps:
        return []
    limit = 2.0 * cfg.r_infl

    def separable(a: Gap, b: Gap) -> bool:
        sliver = ccw_span(a.left.bearing, b.right.bearing)
        combined = a.span + sliver + b.span
        return np.linalg.norm(a.left.p - b.right.p) >= limit or combined >= TWO_PI - 1e-9

    merged = [gaps[0]]
    for g in gaps[1:]:
        if not separable(merged[-1], g):
            merged[-1] = _merge(merged[-1], g)
        else:
            merged.append(g)
    while len(merged) > 1 and not separable(merged[-1], merged[0]):
        merged[0] = _merge(merged[-1], merged[0])
        merged.pop()
    merged.sort(key=lambda g: g.right.bearing)
    return [g for g in merged if _admits_passage(g, cfg.r_infl)]


def sorted_points(gaps: Sequence[Gap]) -> List[GapPointState]:
    """All gap endpoints in counterclockwise bearing order."""
    pts = list(itertools.chain.from_iterable((g.right, g.left) for g in gaps))
    return sorted(pts, key=lambda p: p.bearing)


def _scan_depth(scan: Optional[Scan], right: GapPointState, left: GapPointState) -> float:
    if scan is None:
        return min(right.range, left.range)
    b = scan.bearings
    span = ccw_span(right.bearing, left.bearing)
    inside = np.mod(b - right.bearing, TWO_PI) <= span
    return float(scan.ranges[inside].min()) if inside.any() else min(right.range, left.range)


def detect_ungaps(simplified: Sequence[Gap], cfg: PlannerConfig, ego_velocity=None,
                  scan: Optional[Scan] = None, first_id: int = 0) -> List[Ungap]:
    """Dynamic, co-moving occupied regions between adjacent gaps.

    Point velocities are taken relative to the ego; ``ego_velocity`` is added
    back so that the dynamic test looks at how the obstacle itself moves.
    """
    gaps = sorted(simplified, key=lambda g: g.right.bearing)
    if len(gaps) < 2:
        return []
    v_e = np.zeros(2) if ego_velocity is None else np.asarray(ego_velocity, dtype=float)
    out = []
    uid = first_id
    for prev, nxt in zip(gaps, gaps[1:] + gaps[:1]):
        pi, pj = prev.left, nxt.right
        vi, vj = pi.v + v_e, pj.v + v_e
        dynamic = np.linalg.norm(vi) >= cfg.v_min and np.linalg.norm(vj) >= cfg.v_min
        if not dynamic or float(vi @ vj) <= 0.0:
            continue
        receding = float(pi.p @ vi) > 0.0 and float(pj.p @ vj) > 0.0
        out.append(Ungap(right_of_next=pj.replace(ungap_id=uid), left_of_prev=pi.replace(ungap_id=uid),
                         receding=receding, ungap_id=uid, depth=_scan_depth(scan, pi, pj)))
        uid += 1
    return out


def attach_ungap_ids(gaps: Sequence[Gap], ungaps: Sequence[Ungap]) -> List[Gap]:
    """Copy ungap ids onto the matching gap endpoints."""
    labels = {}
    for u in ungaps:
        labels[id_key(u.left_of_prev)] = u.ungap_id
        labels[id_key(u.right_of_next)] = u.ungap_id
    out = []
    for g in gaps:
        left = g.left.replace(ungap_id=labels.get(id_key(g.left), g.left.ungap_id))
        right = g.right.replace(ungap_id=labels.get(id_key(g.right), g.right.ungap_id))
        out.append(g.replace(left=left, right=right))
    return out


def id_key(p: GapPointState):
    return (p.side, p.model_id, p.beam, float(p.p[0]), float(p.p[1]))
