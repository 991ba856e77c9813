"""Randomized single-gap passage trials.

Each trial samples one gap with constant-velocity endpoints, inflates it,
places a goal, solves for the parallel-navigation heading and rolls the
robot out until intercept. Trials end in exactly one bucket:

* ``passed``: intercept reached, the gap stayed open and the robot never
  touched an endpoint.
* ``speed_infeasible``: rejected before execution. The gap admits no
  passage after inflation, PN has no solution at the ego speed budget, or
  the rollout would bring the robot within the inflated radius of an
  endpoint (the scoring stage assigns it infinite cost).
* ``closed_before_pass``: the inflated endpoints cross before intercept.
* ``collisions``: an executed rollout overlapped an endpoint.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .config import PlannerConfig
from .feasibility import Reason, pn_feasibility
from .goals import DegenerateGap, place_gap_goal
from .manipulation import UntraversableGap, inflate_gap
from .perception import _admits_passage
from .types import Gap, GapPointState, Side

BUCKETS = ("passed", "speed_infeasible", "closed_before_pass", "collisions")

#: Ego speed budget for the trials; the source experiment does not publish it.
MC_EGO_SPEED = 0.5
CHECK_DT = 0.01


@dataclass(frozen=True)
class GapSample:
    beta_l: float
    r_l: float
    beta_r: float
    r_r: float
    v_l: tuple
    v_r: tuple

    def gap(self) -> Gap:
        p_l = self.r_l * np.array([math.cos(self.beta_l), math.sin(self.beta_l)])
        p_r = self.r_r * np.array([math.cos(self.beta_r), math.sin(self.beta_r)])
        return Gap(left=GapPointState(p_l, self.v_l, Side.LEFT), right=GapPointState(p_r, self.v_r, Side.RIGHT))


@dataclass
class TrialRecord:
    trial: int
    outcome: str
    detail: str
    sample: Dict[str, float]
    t_intercept: Optional[float] = None
    min_clearance: Optional[float] = None
    goal: Optional[List[float]] = None
    heading: Optional[float] = None


@dataclass
class MonteCarloResult:
    n_trials: int
    seed: int
    tally: Dict[str, int]
    details: Dict[str, int]
    records: List[TrialRecord] = field(default_factory=list)

    def fractions(self) -> Dict[str, float]:
        return {k: self.tally[k] / self.n_trials for k in BUCKETS}

    def summary(self) -> dict:
        return {"n_trials": self.n_trials, "seed": self.seed, "tally": self.tally,
                "fractions": self.fractions(), "details": self.details}

    def write(self, out_dir) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {"summary": out_dir / f"montecarlo_seed{self.seed}_summary.json",
                 "log": out_dir / f"montecarlo_seed{self.seed}_trials.jsonl"}
        paths["summary"].write_text(json.dumps(self.summary(), indent=2))
        with paths["log"].open("w") as fh:
            for r in self.records:
                fh.write(json.dumps(asdict(r)) + "\n")
        return paths


def sample_gaps(rng: np.random.Generator, n: int, r_range=(0.25, 1.0), v_max: float = 1.0) -> List[GapSample]:
    """Left bearings in [pi/2, 3pi/2], right bearings in [-pi/2, pi/2], uniform ranges and speeds."""
    beta_l = rng.uniform(math.pi / 2, 3 * math.pi / 2, n)
    beta_r = rng.uniform(-math.pi / 2, math.pi / 2, n)
    r_l = rng.uniform(*r_range, n)
    r_r = rng.uniform(*r_range, n)
    ang = rng.uniform(0.0, 2 * math.pi, (n, 2))
    mag = rng.uniform(0.0, v_max, (n, 2))
    v = np.stack((mag * np.cos(ang), mag * np.sin(ang)), axis=-1)  # (n, 2 sides, 2)
    return [GapSample(float(math.atan2(math.sin(beta_l[i]), math.cos(beta_l[i]))), float(r_l[i]),
                      float(beta_r[i]), float(r_r[i]), tuple(v[i, 0]), tuple(v[i, 1])) for i in range(n)]


def _unwrapped_span(right: np.ndarray, left: np.ndarray, span0: float) -> np.ndarray:
    """CCW right-to-left span along sampled endpoint tracks, unwrapped from ``span0``."""
    br = np.unwrap(np.arctan2(right[:, 1], right[:, 0]))
    bl = np.unwrap(np.arctan2(left[:, 1], left[:, 0]))
    return span0 + (bl - bl[0]) - (br - br[0])


def run_trial(sample: GapSample, cfg: PlannerConfig, v_e: float = MC_EGO_SPEED,
              check_dt: float = CHECK_DT, gate_hits: bool = True) -> TrialRecord:
    """Classify one sampled gap. ``gate_hits=False`` skips the scoring gate (diagnostic only)."""
    rec = TrialRecord(0, "", "", asdict(sample))
    g = sample.gap()
    if not _admits_passage(g, cfg.r_infl):
        rec.outcome, rec.detail = "speed_infeasible", "too_narrow"
        return rec
    try:
        gi = inflate_gap(g, r_infl=cfg.r_infl)
        p_g, v_g = place_gap_goal(gi, None, False, cfg)
    except (UntraversableGap, DegenerateGap):
        rec.outcome, rec.detail = "speed_infeasible", "inflation"
        return rec
    res = pn_feasibility(p_g, v_g, v_e)
    if not res.feasible:
        rec.outcome, rec.detail = "speed_infeasible", res.reason.value
        return rec
    t_i = res.t_intercept
    rec.t_intercept, rec.goal, rec.heading = t_i, list(map(float, p_g)), res.gamma_e

    n = max(int(math.ceil(t_i / check_dt)), 1)
    t = np.linspace(0.0, t_i, n + 1)
    u = v_e * np.array([math.cos(res.gamma_e), math.sin(res.gamma_e)])
    robot = t[:, None] * u[None, :]
    span = _unwrapped_span(gi.right.p + t[:, None] * gi.right.v, gi.left.p + t[:, None] * gi.left.v, gi.span)
    q_l = g.left.p + t[:, None] * g.left.v
    q_r = g.right.p + t[:, None] * g.right.v
    d = np.minimum(np.linalg.norm(robot - q_l, axis=1), np.linalg.norm(robot - q_r, axis=1))
    rec.min_clearance = float(d.min() - cfg.r_inscr)
    closed = np.flatnonzero(span <= 0.0)
    hit = np.flatnonzero(d <= cfg.r_infl)
    touch = np.flatnonzero(d < cfg.r_inscr)
    if closed.size and (not hit.size or closed[0] <= hit[0]):
        rec.outcome, rec.detail = "closed_before_pass", Reason.CLOSES_BEFORE_INTERCEPT.value
    elif gate_hits and hit.size:
        rec.outcome, rec.detail = "speed_infeasible", "infinite_cost"
    elif touch.size:
        rec.outcome, rec.detail = "collisions", "endpoint_contact"
    else:
        rec.outcome, rec.detail = "passed", "ok"
    return rec


def run_monte_carlo(n_trials: int = 10_000, seed: int = 0, cfg: Optional[PlannerConfig] = None,
                    v_e: float = MC_EGO_SPEED, gate_hits: bool = True, keep_records: bool = True) -> MonteCarloResult:
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    cfg = cfg or PlannerConfig()
    rng = np.random.default_rng(seed)
    tally = Counter({k: 0 for k in BUCKETS})
    details: Counter = Counter()
    records = []
    for i, s in enumerate(sample_gaps(rng, n_trials)):
        rec = run_trial(s, cfg, v_e, gate_hits=gate_hits)
        rec.trial = i
        tally[rec.outcome] += 1
        details[rec.detail] += 1
        if keep_records:
            records.append(rec)
    return MonteCarloResult(n_trials, seed, dict(tally), dict(details), records)
