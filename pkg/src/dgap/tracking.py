"""Frame-to-frame gap point association and rotating-frame Kalman filtering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm
from scipy.optimize import linear_sum_assignment

from .config import PlannerConfig
from .types import EgoState, Gap, GapPointState, Side

_J = np.array([[0.0, -1.0], [1.0, 0.0]])  # omega x u == omega * (J @ u)
_H = np.hstack([np.eye(2), np.zeros((2, 2))])


def solve_assignment(cost) -> List[Tuple[int, int]]:
    """Minimum-cost matching on a rectangular cost matrix.

    Returns ``min(n, m)`` ``(row, col)`` pairs sorted by row.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return []
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    if not np.all(np.isfinite(cost)) or np.any(cost < 0):
        raise ValueError("costs must be finite and non-negative")
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c)) for r, c in zip(rows, cols)]


@dataclass(frozen=True)
class PointModel:
    x: np.ndarray  # [p_x, p_y, v_x, v_y], ego frame
    P: np.ndarray
    last_update: float = 0.0
    model_id: int = 0
    age: int = 0

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(4)
        P = np.array(self.P, dtype=float).reshape(4, 4)
        x.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)

    @property
    def p(self) -> np.ndarray:
        return self.x[:2]

    @property
    def v(self) -> np.ndarray:
        return self.x[2:]

    @classmethod
    def new(cls, p, v, cfg: PlannerConfig, stamp: float = 0.0, model_id: int = 0) -> "PointModel":
        P = np.diag([cfg.r_meas, cfg.r_meas, cfg.p0_vel, cfg.p0_vel])
        return cls(np.concatenate([np.asarray(p, float), np.asarray(v, float)]), P, stamp, model_id)


def _flow(omega: float, a, dt: float):
    """Discrete transition ``F`` and input offset ``u`` for the relative dynamics over ``dt``."""
    A = np.zeros((5, 5))
    W = omega * _J
    A[:2, :2] = -W
    A[:2, 2:4] = np.eye(2)
    A[2:4, 2:4] = -W
    A[2:4, 4] = -np.asarray(a, dtype=float)
    E = expm(A * dt)
    return E[:4, :4], E[:4, 4]


def model_predict(m: PointModel, ego: EgoState, dt: float, cfg: Optional[PlannerConfig] = None) -> PointModel:
    """Propagate a gap point model through ``dt`` seconds of ego motion.

    The relative state obeys ``p' = v - w x p`` and ``v' = -a_e - w x v``.
    With the ego rates held constant over the step this flow is linear, so
    the transition is evaluated exactly with a matrix exponential.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfg = cfg or PlannerConfig()
    F, u = _flow(ego.omega, ego.a, dt)
    x = F @ m.x + u
    Q = np.diag([cfg.q_pos, cfg.q_pos, cfg.q_vel, cfg.q_vel]) * dt
    P = F @ m.P @ F.T + Q
    P = 0.5 * (P + P.T)
    return replace(m, x=x, P=P, last_update=m.last_update + dt)


def model_correct(m: PointModel, z, cfg: Optional[PlannerConfig] = None) -> PointModel:
    """Kalman update with a position measurement."""
    cfg = cfg or PlannerConfig()
    z = np.asarray(z, dtype=float)
    R = np.eye(2) * cfg.r_meas
    S = _H @ m.P @ _H.T + R
    K = np.linalg.solve(S, _H @ m.P).T
    x = m.x + K @ (z - _H @ m.x)
    IKH = np.eye(4) - K @ _H
    P = IKH @ m.P @ IKH.T + K @ R @ K.T
    P = 0.5 * (P + P.T)
    return replace(m, x=x, P=P, age=m.age + 1)


def gap_only_velocity(m, ego: EgoState) -> np.ndarray:
    """World-frame velocity of a gap point, expressed in the ego-aligned frame."""
    v = m.v if isinstance(m, (PointModel, GapPointState)) else np.asarray(m, dtype=float)
    return np.asarray(v, dtype=float) + ego.v


@dataclass
class Association:
    matches: Dict[int, int] = field(default_factory=dict)  # curr index -> prev index
    new: List[int] = field(default_factory=list)  # curr indices needing a fresh model


def associate_points(prev: Sequence[GapPointState], curr: Sequence[GapPointState],
                     cfg: PlannerConfig) -> Association:
    """Match current gap points to previous ones by Euclidean distance.

    Matches farther apart than ``cfg.tau_assoc`` are discarded. Points of
    opposite sides are never matched.
    """
    out = Association()
    if not curr:
        return out
    if not prev:
        out.new = list(range(len(curr)))
        return out
    P = np.array([p.p for p in prev])
    C = np.array([c.p for c in curr])
    cost = np.linalg.norm(P[:, None, :] - C[None, :, :], axis=2)
    cross = np.array([[p.side != c.side for c in curr] for p in prev])
    big = 10.0 * cfg.tau_assoc + float(cost.max())
    cost = np.where(cross, big, cost)
    for i, j in solve_assignment(cost):
        if cost[i, j] <= cfg.tau_assoc:
            out.matches[j] = i
    out.new = [j for j in range(len(curr)) if j not in out.matches]
    return out


class GapTracker:
    """Keeps one Kalman model per tracked gap point across scans."""

    def __init__(self, cfg: PlannerConfig):
        self.cfg = cfg
        self.models: Dict[int, PointModel] = {}
        self.points: List[GapPointState] = []
        self.stamp: Optional[float] = None
        self._next_id = 0

    def _spawn(self, p, v, stamp) -> PointModel:
        m = PointModel.new(p, v, self.cfg, stamp, self._next_id)
        self._next_id += 1
        return m

    def update(self, points: Sequence[GapPointState], ego: EgoState, stamp: float) -> List[GapPointState]:
        """Associate, predict and correct; return the points annotated with model state."""
        cfg = self.cfg
        if self.stamp is not None and stamp > self.stamp:
            dt = stamp - self.stamp
            predicted = {k: model_predict(m, ego, dt, cfg) for k, m in self.models.items()}
        else:
            predicted = dict(self.models)
        prev = [p.replace(p=predicted[p.model_id].p) for p in self.points]
        assoc = associate_points(prev, points, cfg)
        models: Dict[int, PointModel] = {}
        out = []
        for j, pt in enumerate(points):
            if j in assoc.matches:
                mid = prev[assoc.matches[j]].model_id
                m = model_correct(predicted[mid], pt.p, cfg)
            else:
                m = self._spawn(pt.p, -ego.v, stamp)
            m = replace(m, last_update=stamp)
            models[m.model_id] = m
            out.append(pt.replace(p=pt.p, v=m.v, model_id=m.model_id, covariance=m.P))
        self.models = models
        self.points = out
        self.stamp = stamp
        return out

    def track_gaps(self, gaps: Sequence[Gap], ego: EgoState, stamp: float) -> List[Gap]:
        pts = [q for g in gaps for q in (g.right, g.left)]
        tracked = self.update(pts, ego, stamp)
        return [g.replace(right=tracked[2 * k], left=tracked[2 * k + 1]) for k, g in enumerate(gaps)]
