"""Deterministic 2D kinematic world with disk agents, static segments and a raycast lidar."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..types import EgoState, Scan, rotate


@dataclass(frozen=True)
class Agent:
    """Disk agent following a waypoint path at constant speed.

    The agent waits at its first position for ``delay`` seconds. Without
    ``loop`` it stops at the last waypoint.
    """

    center: np.ndarray
    radius: float
    waypoints: Tuple[Tuple[float, float], ...] = ()
    speed: float = 0.0
    loop: bool = False
    delay: float = 0.0
    target: int = 0

    def __post_init__(self):
        object.__setattr__(self, "center", np.array(self.center, dtype=float).reshape(2))
        object.__setattr__(self, "waypoints", tuple(tuple(map(float, w)) for w in self.waypoints))
        if self.radius <= 0:
            raise ValueError("agent radius must be positive")
        if self.speed < 0:
            raise ValueError("agent speed must be non-negative")

    def velocity(self, t: float) -> np.ndarray:
        """Current world velocity (constant between waypoint events)."""
        if t < self.delay or self.target >= len(self.waypoints) or self.speed == 0.0:
            return np.zeros(2)
        d = np.asarray(self.waypoints[self.target]) - self.center
        n = float(np.linalg.norm(d))
        return np.zeros(2) if n == 0.0 else self.speed * d / n

    def advance(self, t: float, dt: float) -> "Agent":
        if self.speed == 0.0 or not self.waypoints:
            return self
        if t + dt <= self.delay:
            return self
        budget = self.speed * (dt - max(self.delay - t, 0.0))
        c = self.center.copy()
        target = self.target
        # bounded loop: a path shorter than the step would otherwise spin
        for _ in range(4 * len(self.waypoints) + 4):
            if target >= len(self.waypoints) or budget <= 0.0:
                break
            w = np.asarray(self.waypoints[target])
            d = w - c
            n = float(np.linalg.norm(d))
            if n > budget:
                c = c + d * (budget / n)
                budget = 0.0
                break
            c = w.copy()
            budget -= n
            target += 1
            if target >= len(self.waypoints) and self.loop:
                target = 0
        return replace(self, center=c, target=target)


@dataclass(frozen=True)
class WorldState:
    ego: EgoState
    agents: Tuple[Agent, ...] = ()
    segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 2, 2)))
    t: float = 0.0
    collision: bool = False

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 2, 2)
        object.__setattr__(self, "segments", seg)
        object.__setattr__(self, "agents", tuple(self.agents))


def _ray_disk(origin, dirs, centers, radii) -> np.ndarray:
    """Distance along each ray to the nearest disk boundary (inf on miss)."""
    if len(centers) == 0:
        return np.full(len(dirs), np.inf)
    oc = origin[None, :] - centers  # (M, 2)
    b = dirs @ oc.T  # (N, M)
    c = np.einsum("ij,ij->i", oc, oc) - radii ** 2  # (M,)
    disc = b * b - c[None, :]
    with np.errstate(invalid="ignore"):
        s = np.sqrt(disc)
    t1 = -b - s
    t2 = -b + s
    t = np.where(t1 > 1e-9, t1, np.where(t2 > 1e-9, t2, np.inf))
    t = np.where(disc >= 0.0, t, np.inf)
    return t.min(axis=1)


def _ray_segments(origin, dirs, segs) -> np.ndarray:
    if len(segs) == 0:
        return np.full(len(dirs), np.inf)
    a = segs[:, 0, :]
    e = segs[:, 1, :] - a  # (M, 2)
    oa = a - origin[None, :]
    # solve origin + t d = a + s e
    den = dirs[:, 0:1] * e[None, :, 1] - dirs[:, 1:2] * e[None, :, 0]  # (N, M)
    num_t = oa[None, :, 0] * e[None, :, 1] - oa[None, :, 1] * e[None, :, 0]
    num_s = oa[None, :, 0] * dirs[:, 1:2] - oa[None, :, 1] * dirs[:, 0:1]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num_t / den
        s = num_s / den
    ok = (np.abs(den) > 1e-12) & (t > 1e-9) & (s >= 0.0) & (s <= 1.0)
    return np.where(ok, t, np.inf).min(axis=1)


def raycast_scan(world: WorldState, n_beams: int, range_max: float, noise_sigma: float = 0.0,
                 rng: Optional[np.random.Generator] = None) -> Scan:
    """Full field-of-view scan from the ego pose, clipped to ``range_max``."""
    if n_beams < 3:
        raise ValueError("n_beams must be at least 3")
    inc = 2.0 * math.pi / n_beams
    bearings = -math.pi + inc * np.arange(n_beams)
    ang = bearings + world.ego.theta
    dirs = np.column_stack((np.cos(ang), np.sin(ang)))
    o = world.ego.p
    if world.agents:
        centers = np.array([a.center for a in world.agents])
        radii = np.array([a.radius for a in world.agents])
    else:
        centers, radii = np.zeros((0, 2)), np.zeros(0)
    r = np.minimum(_ray_disk(o, dirs, centers, radii), _ray_segments(o, dirs, world.segments))
    if noise_sigma > 0.0:
        rng = rng or np.random.default_rng(0)
        r = r + rng.normal(0.0, noise_sigma, n_beams)
    r = np.clip(r, 1e-3, range_max)
    return Scan(r, float(range_max), -math.pi, inc, world.t)


def point_segment_distance(p, segs) -> np.ndarray:
    if len(segs) == 0:
        return np.zeros(0)
    a = segs[:, 0, :]
    e = segs[:, 1, :] - a
    ee = np.einsum("ij,ij->i", e, e)
    s = np.clip(np.einsum("ij,ij->i", p[None, :] - a, e) / np.where(ee > 0, ee, 1.0), 0.0, 1.0)
    q = a + s[:, None] * e
    return np.linalg.norm(p[None, :] - q, axis=1)


def in_collision(world: WorldState) -> bool:
    """Strict overlap of the ego disk with any agent or static segment."""
    p = world.ego.p
    r = world.ego.r_inscr
    for a in world.agents:
        if float(np.linalg.norm(p - a.center)) < r + a.radius:
            return True
    d = point_segment_distance(p, world.segments)
    return bool(len(d) and d.min() < r)


def step_world(world: WorldState, u, dt: float, omega: float = 0.0) -> WorldState:
    """Advance the world by ``dt``: ego integrates the ego-frame command ``u`` exactly."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    u = np.asarray(u, dtype=float)
    ego = world.ego
    if omega == 0.0:
        dp = rotate(u, ego.theta) * dt
    else:
        # exact integration of a body-frame velocity under constant turn rate
        th0, th1 = ego.theta, ego.theta + omega * dt
        sx = (math.sin(th1) - math.sin(th0)) / omega
        cx = (math.cos(th0) - math.cos(th1)) / omega
        dp = np.array([u[0] * sx - u[1] * cx, u[0] * cx + u[1] * sx])
    new_ego = ego.replace(p=ego.p + dp, theta=ego.theta + omega * dt, v=u, omega=omega)
    agents = tuple(a.advance(world.t, dt) for a in world.agents)
    out = WorldState(new_ego, agents, world.segments, world.t + dt)
    return replace(out, collision=in_collision(out))
