"""Estimator-style front end wiring perception, tracking and planning together."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .config import PlannerConfig
from .feasibility import TubeFeasibility, propagate_gap_points, tube_feasible
from .manipulation import manipulate_gaps
from .perception import attach_ungap_ids, detect_gaps, detect_ungaps, simplify_gaps
from .tracking import GapTracker
from .trajectory import (PropagatedScanSet, ScoredTrajectory, projection_operator_filter,
                         propagate_scan, remaining, rollout_pn_trajectory, score_trajectory,
                         select_trajectory, track_trajectory, transform_trajectory, ungap_trajectory)
from .types import EgoState, Gap, GapTube, Scan, SourceKind, Trajectory, Ungap, rotate
from .validation import check_ego, check_scan, check_vector


@dataclass
class PlanResult:
    selected: ScoredTrajectory
    switched: bool
    command: np.ndarray
    candidates: List[ScoredTrajectory] = field(default_factory=list)
    tubes: List[GapTube] = field(default_factory=list)
    feasibility: List[TubeFeasibility] = field(default_factory=list)
    gaps: List[Gap] = field(default_factory=list)
    manipulated: List[Gap] = field(default_factory=list)
    ungaps: List[Ungap] = field(default_factory=list)
    scans: Optional[PropagatedScanSet] = None
    latency: Dict[str, float] = field(default_factory=dict)

    @property
    def source(self) -> str:
        return str(self.selected.traj.source)


def _resolve(config) -> PlannerConfig:
    if config is None:
        return PlannerConfig()
    if isinstance(config, PlannerConfig):
        return config
    return PlannerConfig.from_mapping(config)


class GapDetector(TransformerMixin, BaseEstimator):
    """Stateless scan-to-gaps transformer (detection and simplification only)."""

    def __init__(self, config=None):
        self.config = config

    def fit(self, X=None, y=None):
        self.config_ = _resolve(self.config)
        return self

    def transform(self, X: Sequence[Scan]) -> List[List[Gap]]:
        cfg = getattr(self, "config_", None) or _resolve(self.config)
        return [simplify_gaps(detect_gaps(check_scan(s), cfg), cfg) for s in X]


class DynamicGapPlanner(BaseEstimator):
    """Dynamic gap local planner.

    ``partial_fit`` consumes one scan (scan-rate work: gap detection and
    tracking); ``predict`` runs one plan-and-control cycle and returns the
    velocity command. All geometry passed in and out is egocentric.

    Args:
        config: ``PlannerConfig`` or a mapping of overrides.
    """

    def __init__(self, config=None):
        self.config = config

    # ---------------------------------------------------------------- scan thread
    def _init_state(self):
        self.config_ = _resolve(self.config)
        self.tracker_ = GapTracker(self.config_)
        self.scan_ = None
        self.ego_ = None
        self.raw_gaps_: List[Gap] = []
        self.gaps_: List[Gap] = []
        self.ungaps_: List[Ungap] = []
        self.current_: Optional[ScoredTrajectory] = None
        self.current_pose_ = None
        self.n_scans_ = 0

    def partial_fit(self, scan: Scan, ego: EgoState):
        if not hasattr(self, "config_"):
            self._init_state()
        cfg = self.config_
        scan = check_scan(scan)
        ego = check_ego(ego)
        raw = detect_gaps(scan, cfg)
        raw_gaps = self.tracker_.track_gaps(list(raw.gaps), ego, scan.stamp)
        gaps = simplify_gaps(raw_gaps, cfg)
        ungaps = detect_ungaps(gaps, cfg, ego.v, scan)
        self.scan_ = scan
        self.ego_ = ego
        self.raw_gaps_ = raw_gaps
        self.gaps_ = attach_ungap_ids(gaps, ungaps)
        self.ungaps_ = ungaps
        self.n_scans_ += 1
        return self

    def fit(self, scans: Sequence[Scan], egos: Sequence[EgoState]):
        """Reset and consume a sequence of scans."""
        self._init_state()
        for s, e in zip(scans, egos):
            self.partial_fit(s, e)
        return self

    # ---------------------------------------------------------------- plan thread
    def _carry_current(self, ego: EgoState, now: float):
        """Current trajectory re-expressed in the present ego frame, or None."""
        if self.current_ is None:
            return None, True
        p0, th0, t0 = self.current_pose_
        d_p = rotate(ego.p - p0, -th0)
        d_th = ego.theta - th0
        moved = transform_trajectory(self.current_.traj, d_p, d_th, now - t0)
        rest = remaining(moved, self.config_.dt)
        completed = (moved.t[-1] <= 1e-9 or float(np.linalg.norm(moved.p[-1])) < self.config_.eps_goal)
        return rest, completed

    def plan(self, ego: EgoState, waypoint=None, agents=None, now: Optional[float] = None) -> PlanResult:
        """Run one planning cycle against the latest scan."""
        if getattr(self, "scan_", None) is None:
            raise RuntimeError("partial_fit must be called with at least one scan before planning")
        cfg = self.config_
        ego = check_ego(ego)
        now = self.scan_.stamp if now is None else now
        wp = None if waypoint is None else check_vector(waypoint, "waypoint")
        lat = {}
        tic = time.perf_counter()

        manip = manipulate_gaps(self.gaps_, cfg)
        tubes = propagate_gap_points(manip, ego, cfg)
        feas = [tube_feasible(tb, ego, cfg, wp, reach_waypoint=True) for tb in tubes]
        lat["feasibility"] = time.perf_counter() - tic

        trajs: List[Trajectory] = []
        for k, f in enumerate(feas):
            if f.feasible:
                trajs.append(rollout_pn_trajectory(f, cfg, index=k))
        for u in self.ungaps_:
            if u.receding:
                tr = ungap_trajectory(u, cfg, wp, index=u.ungap_id)
                if tr is not None:
                    trajs.append(tr)
        tic2 = time.perf_counter()
        raw_points = [q for g in self.raw_gaps_ for q in (g.right, g.left)]
        scans = propagate_scan(self.scan_, raw_points, cfg, ego)
        scored = [score_trajectory(tr, scans, wp, cfg, agents) for tr in trajs]
        lat["scoring"] = time.perf_counter() - tic2

        current, completed = self._carry_current(ego, now)
        current_scored = None if current is None else score_trajectory(current, scans, wp, cfg, agents)
        selected, switched = select_trajectory(current_scored, scored, completed)
        self.current_ = selected
        self.current_pose_ = (ego.p.copy(), ego.theta, now)

        u = track_trajectory(selected.traj, np.zeros(2), 0.0, cfg)
        u = projection_operator_filter(u, self.scan_, cfg)
        lat["total"] = time.perf_counter() - tic
        return PlanResult(selected, switched, u, scored, tubes, feas, list(self.gaps_), manip,
                          list(self.ungaps_), scans, lat)

    def predict(self, ego: EgoState, waypoint=None, agents=None, now: Optional[float] = None) -> np.ndarray:
        return self.plan(ego, waypoint, agents, now).command
