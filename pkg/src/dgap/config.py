"""Planner configuration."""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml


@dataclass(frozen=True)
class PlannerConfig:
    # geometry
    r_inscr: float = 0.2
    tau_infl: float = 1.2
    tau_radial: Optional[float] = None  # defaults to 4 * r_inscr
    min_swept_beams: int = 3
    # tracking
    tau_assoc: float = 0.8
    v_min: float = 0.1
    q_pos: float = 1e-4
    q_vel: float = 5e-2
    r_meas: float = 1e-3
    p0_vel: float = 1.0
    # propagation and guidance
    horizon: float = 3.0
    dt: float = 0.1
    v_max: float = 1.0
    v_nominal: float = 0.9
    goal_span_max: float = math.pi / 2
    kappa_margin: float = 0.1
    max_idle_fraction: float = 0.5
    # scoring
    w: float = 1.0
    c_obs: float = 1.0
    w_2: float = 5.0
    r_max: float = 1.0
    social_weight: float = 0.0
    lookahead: float = 3.0
    # switching, tracking, safety filter
    eps_goal: float = 0.15
    k_p: float = 2.0
    r_min_po: Optional[float] = None  # defaults to r_infl
    r_nom_po: Optional[float] = None  # defaults to 2 * r_infl
    # rates
    scan_rate: float = 25.0
    plan_rate: float = 5.0

    def __post_init__(self):
        if self.tau_radial is None:
            object.__setattr__(self, "tau_radial", 4.0 * self.r_inscr)
        if self.r_min_po is None:
            object.__setattr__(self, "r_min_po", self.r_infl)
        if self.r_nom_po is None:
            object.__setattr__(self, "r_nom_po", 2.0 * self.r_infl)
        if self.tau_infl < 1.0:
            raise ValueError("tau_infl must be >= 1")
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")
        if not self.r_min_po < self.r_nom_po:
            raise ValueError("r_min_po must be smaller than r_nom_po")
        for name in ("w", "c_obs", "w_2", "social_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.kappa_margin < 0.5:
            raise ValueError("kappa_margin must lie in [0, 0.5)")

    @property
    def r_infl(self) -> float:
        return self.tau_infl * self.r_inscr

    @property
    def n_steps(self) -> int:
        """Number of propagation steps after t = 0."""
        return int(round(self.horizon / self.dt))

    @property
    def scans_per_plan(self) -> int:
        return int(round(self.scan_rate / self.plan_rate))

    def replace(self, **changes) -> "PlannerConfig":
        base = dataclasses.asdict(self)
        if "r_inscr" in changes or "tau_infl" in changes:
            # radius-derived defaults follow the new radius
            for name in ("tau_radial", "r_min_po", "r_nom_po"):
                base[name] = None
        base.update(changes)
        return PlannerConfig(**base)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "PlannerConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown planner config keys: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def from_file(cls, path) -> "PlannerConfig":
        text = Path(path).read_text()
        data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
        return cls.from_mapping(data or {})
