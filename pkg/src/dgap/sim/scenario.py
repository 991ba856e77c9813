"""Scenario files: YAML descriptions of static structure, agents, ego start and goal."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml

from ..types import EgoState
from .world import Agent, WorldState


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    start: np.ndarray
    goal: np.ndarray
    theta0: float = 0.0
    agents: Tuple[Agent, ...] = ()
    segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    n_beams: int = 360
    range_max: float = 5.0
    goal_radius: float = 0.3
    time_limit: float = 180.0
    r_inscr: float = 0.2
    v_max: float = 1.0
    noise_sigma: float = 0.0
    planner: Dict[str, Any] = field(default_factory=dict)

    def initial_world(self) -> WorldState:
        ego = EgoState(p=self.start, theta=self.theta0, r_inscr=self.r_inscr, v_max=self.v_max)
        return WorldState(ego, self.agents, self.segments, 0.0)


def _vec(x, what: str) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float).reshape(2)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{what} must be a 2-vector, got {x!r}") from exc
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{what} must be finite")
    return arr


def _segments(data: Dict[str, Any]) -> np.ndarray:
    segs: List[List[List[float]]] = []
    for k, s in enumerate(data.get("segments", []) or []):
        if len(s) != 2:
            raise ScenarioError(f"segment {k} needs two endpoints")
        segs.append([list(_vec(s[0], f"segment {k}")), list(_vec(s[1], f"segment {k}"))])
    for k, poly in enumerate(data.get("polygons", []) or []):
        pts = [_vec(p, f"polygon {k}") for p in poly]
        if len(pts) < 2:
            raise ScenarioError(f"polygon {k} needs at least two vertices")
        closed = len(pts) > 2
        for i in range(len(pts) - (0 if closed else 1)):
            segs.append([list(pts[i]), list(pts[(i + 1) % len(pts)])])
    return np.asarray(segs, dtype=float).reshape(-1, 2, 2)


def _agent(k: int, a: Dict[str, Any]) -> Agent:
    if not isinstance(a, dict):
        raise ScenarioError(f"agent {k} must be a mapping")
    try:
        return Agent(center=_vec(a["start"], f"agent {k} start"), radius=float(a.get("radius", 0.3)),
                     waypoints=tuple(tuple(_vec(w, f"agent {k} waypoint")) for w in a.get("waypoints", [])),
                     speed=float(a.get("speed", 0.0)), loop=bool(a.get("loop", False)),
                     delay=float(a.get("delay", 0.0)))
    except KeyError as exc:
        raise ScenarioError(f"agent {k} is missing {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(f"agent {k}: {exc}") from exc


def scenario_from_dict(data: Dict[str, Any], name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a mapping")
    try:
        ego = data["ego"]
        start = _vec(ego["start"], "ego start")
        goal = _vec(data["goal"], "goal")
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"scenario is missing {exc}") from exc
    agents = tuple(_agent(k, a) for k, a in enumerate(data.get("agents", []) or []))
    sc = Scenario(name=str(data.get("name", name)), start=start, goal=goal,
                  theta0=float(ego.get("theta", 0.0)), agents=agents, segments=_segments(data),
                  n_beams=int(data.get("n_beams", 360)), range_max=float(data.get("range_max", 5.0)),
                  goal_radius=float(data.get("goal_radius", 0.3)),
                  time_limit=float(data.get("time_limit", 180.0)),
                  r_inscr=float(ego.get("radius", 0.2)), v_max=float(ego.get("v_max", 1.0)),
                  noise_sigma=float(data.get("noise_sigma", 0.0)),
                  planner=dict(data.get("planner", {}) or {}))
    if sc.n_beams < 3 or sc.range_max <= 0 or sc.time_limit <= 0:
        raise ScenarioError("n_beams >= 3, range_max > 0 and time_limit > 0 are required")
    return sc


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"malformed scenario {path}: {exc}") from exc
    return scenario_from_dict(data, path.stem)


def builtin_scenarios() -> Dict[str, Path]:
    root = Path(__file__).resolve().parent.parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.yaml"))}


def load_builtin(name: str) -> Scenario:
    table = builtin_scenarios()
    if name not in table:
        raise ScenarioError(f"unknown scenario {name!r}; known: {sorted(table)}")
    return load_scenario(table[name])
