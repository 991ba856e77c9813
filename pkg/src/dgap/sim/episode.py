"""Scan, plan and control loop over the simulated world."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..config import PlannerConfig
from ..planner import DynamicGapPlanner, PlanResult
from ..types import rotate
from .scenario import Scenario
from .world import WorldState, raycast_scan, step_world

SIM_DT = 0.01

OUTCOMES = ("success", "timeout", "failure", "failure+timeout")


def classify(reached: bool, collisions: int) -> str:
    if collisions == 0:
        return "success" if reached else "timeout"
    return "failure" if reached else "failure+timeout"


def local_waypoint(start, goal, p, lookahead: float) -> np.ndarray:
    """Farthest point of the start-goal segment within ``lookahead`` of ``p`` (world frame).

    Falls back to the segment point nearest ``p`` when the segment is out of reach.
    """
    a, b, p = (np.asarray(x, float) for x in (start, goal, p))
    e = b - a
    ee = float(e @ e)
    if ee == 0.0:
        return b.copy()
    # |a + s e - p|^2 = L^2  ->  quadratic in s
    ap = a - p
    qb = 2.0 * float(e @ ap)
    qc = float(ap @ ap) - lookahead ** 2
    disc = qb * qb - 4.0 * ee * qc
    if disc < 0.0:
        s = min(max(-float(ap @ e) / ee, 0.0), 1.0)
        return a + s * e
    s_hi = (-qb + math.sqrt(disc)) / (2.0 * ee)
    s_lo = (-qb - math.sqrt(disc)) / (2.0 * ee)
    if s_hi < 0.0 or s_lo > 1.0:
        s = min(max(-float(ap @ e) / ee, 0.0), 1.0)
        return a + s * e
    return a + min(s_hi, 1.0) * e


@dataclass
class EpisodeResult:
    scenario: str
    seed: int
    outcome: str
    reached: bool
    collisions: int
    time: float
    time_to_goal: Optional[float]
    trace: List[Dict[str, Any]] = field(default_factory=list)
    plan_log: List[Dict[str, Any]] = field(default_factory=list)
    latency: Dict[str, float] = field(default_factory=dict)

    def summary(self) -> Dict[str, Any]:
        return {"scenario": self.scenario, "seed": self.seed, "outcome": self.outcome,
                "reached": self.reached, "collisions": self.collisions, "time": self.time,
                "time_to_goal": self.time_to_goal, "latency": self.latency,
                "sources": sorted({r["source"] for r in self.plan_log})}

    def idle_intervals(self, min_duration: float = 0.2) -> List[tuple]:
        """Maximal runs of trace rows flagged idle, as ``(t_start, t_end)``."""
        out, start = [], None
        for row in self.trace:
            if row["idle"] and start is None:
                start = row["t"]
            elif not row["idle"] and start is not None:
                if row["t"] - start >= min_duration - 1e-9:
                    out.append((start, row["t"]))
                start = None
        if start is not None and self.trace and self.trace[-1]["t"] - start >= min_duration - 1e-9:
            out.append((start, self.trace[-1]["t"]))
        return out

    def write(self, out_dir) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"{self.scenario}_seed{self.seed}"
        paths = {"summary": out_dir / f"{stem}_summary.json", "trace": out_dir / f"{stem}_trace.csv",
                 "log": out_dir / f"{stem}_plans.jsonl"}
        paths["summary"].write_text(json.dumps(self.summary(), indent=2))
        write_trace(self.trace, paths["trace"])
        with paths["log"].open("w") as fh:
            for rec in self.plan_log:
                fh.write(json.dumps(rec) + "\n")
        return paths


def write_trace(rows: List[Dict[str, Any]], path) -> None:
    with Path(path).open("w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def _gap_record(g) -> List[float]:
    return [round(g.right.bearing, 6), round(g.right.range, 6), round(g.left.bearing, 6),
            round(g.left.range, 6), bool(g.available)]


def _plan_record(t: float, res: PlanResult) -> Dict[str, Any]:
    tr = res.selected.traj
    return {
        "t": round(t, 6),
        "source": str(tr.source),
        "switched": bool(res.switched),
        "cost": None if not math.isfinite(res.selected.cost) else res.selected.cost,
        "gaps": [_gap_record(g) for g in res.gaps],
        "manipulated": [_gap_record(g) for g in res.manipulated],
        "tubes": [[[s.start, s.duration, bool(s.gap.available)] for s in tb.segments] for tb in res.tubes],
        "feasible": [bool(f.feasible) for f in res.feasibility],
        "candidates": [str(c.traj.source) for c in res.candidates],
        "trajectory": {"t": tr.t.round(4).tolist(), "p": tr.p.round(4).tolist()},
        "ungaps": [[u.ungap_id, bool(u.receding)] for u in res.ungaps],
        "latency": res.latency,
    }


def run_episode(scenario: Scenario, cfg: Optional[PlannerConfig] = None, seed: int = 0,
                plan: bool = True, constant_command=None, sim_dt: float = SIM_DT,
                on_plan: Optional[Callable[[float, PlanResult], None]] = None) -> EpisodeResult:
    """Run one episode until the goal is reached or the time limit expires.

    With ``plan=False`` the ego executes ``constant_command`` (ego frame)
    throughout, which is useful to check the collision bookkeeping.
    """
    cfg = cfg or PlannerConfig()
    if scenario.planner:
        cfg = cfg.replace(**scenario.planner)
    cfg = cfg.replace(r_inscr=scenario.r_inscr, v_max=scenario.v_max) if (
        cfg.r_inscr != scenario.r_inscr or cfg.v_max != scenario.v_max) else cfg
    rng = np.random.default_rng(seed)
    steps_per_scan = int(round(1.0 / (cfg.scan_rate * sim_dt)))
    steps_per_plan = steps_per_scan * cfg.scans_per_plan
    n_steps = int(round(scenario.time_limit / sim_dt))

    world = scenario.initial_world()
    planner = DynamicGapPlanner(cfg)
    planner._init_state()
    u = np.zeros(2) if constant_command is None else np.asarray(constant_command, float)
    v_prev = np.zeros(2)
    active = "Idle"
    active_traj = None
    plan_t = 0.0
    trace: List[Dict[str, Any]] = []
    log: List[Dict[str, Any]] = []
    lat: Dict[str, List[float]] = {}
    collisions = 0
    was_colliding = False
    reached = False
    t_goal = None

    for k in range(n_steps):
        t = k * sim_dt
        if plan and k % steps_per_scan == 0:
            scan = raycast_scan(world, scenario.n_beams, scenario.range_max, scenario.noise_sigma, rng)
            ego = world.ego.replace(a=(world.ego.v - v_prev) * cfg.scan_rate)
            v_prev = world.ego.v.copy()
            planner.partial_fit(scan, ego)
        if plan and k % steps_per_plan == 0:
            ego = world.ego
            wp_world = local_waypoint(scenario.start, scenario.goal, ego.p, cfg.lookahead)
            wp = rotate(wp_world - ego.p, -ego.theta)
            agents = None
            if cfg.social_weight > 0:
                agents = [(rotate(a.center - ego.p, -ego.theta), rotate(a.velocity(t), -ego.theta))
                          for a in world.agents]
            res = planner.plan(ego, wp, agents, now=t)
            u = res.command
            active = str(res.selected.traj.source)
            active_traj = res.selected.traj
            plan_t = t
            rec = _plan_record(t, res)
            log.append(rec)
            for name, val in res.latency.items():
                lat.setdefault(name, []).append(val)
            if on_plan is not None:
                on_plan(t, res)

        idle = False
        if active_traj is not None and active != "Idle":
            tau = t - plan_t
            _, v_des = active_traj.sample(tau)
            idle = bool(tau < active_traj.t[-1] and not np.any(v_des))
        world = step_world(world, u, sim_dt)
        if world.collision and not was_colliding:
            collisions += 1
        was_colliding = world.collision
        row = {"t": round(world.t, 6), "x": world.ego.p[0], "y": world.ego.p[1], "theta": world.ego.theta,
               "ux": u[0], "uy": u[1], "source": active, "idle": int(idle), "collision": int(world.collision)}
        for i, a in enumerate(world.agents):
            row[f"agent{i}_x"] = a.center[0]
            row[f"agent{i}_y"] = a.center[1]
        trace.append(row)
        if float(np.linalg.norm(world.ego.p - scenario.goal)) < scenario.goal_radius:
            reached = True
            t_goal = world.t
            break

    latency = {k: float(np.mean(v)) for k, v in lat.items()}
    return EpisodeResult(scenario.name, seed, classify(reached, collisions), reached, collisions,
                         trace[-1]["t"] if trace else 0.0, t_goal, trace, log, latency)
