"""Shared geometric and planning types.

Every planner-side quantity is egocentric: positions and velocities are
expressed in the robot frame at the time they were measured. Only the
simulator knows about a world frame.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

#: Cost value used for poses that violate the inflated robot radius.
INFINITE_COST = math.inf

TWO_PI = 2.0 * math.pi


def _frozen_vec(x, n: int = 2) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(n)
    arr.setflags(write=False)
    return arr


def bearing(p) -> float:
    """Four-quadrant bearing of a 2-vector, in ``(-pi, pi]``."""
    x, y = float(p[0]), float(p[1])
    if x == 0.0 and y == 0.0:
        raise ValueError("bearing of the zero vector is undefined")
    b = math.atan2(y, x)
    # atan2 returns -pi for (-x, -0.0); fold onto +pi.
    if b == -math.pi:
        b = math.pi
    return b


def wrap_angle(a: float) -> float:
    """Normalize an angle to ``(-pi, pi]``."""
    a = math.fmod(a + math.pi, TWO_PI)
    if a <= 0.0:
        a += TWO_PI
    return a - math.pi


def ccw_span(beta_right: float, beta_left: float) -> float:
    """Counterclockwise angle from ``beta_right`` to ``beta_left`` in ``(0, 2pi]``.

    Coincident bearings are treated as a full circle.
    """
    d = math.fmod(beta_left - beta_right, TWO_PI)
    if d < 0.0:
        d += TWO_PI
    if d <= 1e-15:
        return TWO_PI
    return d


def polar_point(r: float, beta: float) -> np.ndarray:
    return np.array([r * math.cos(beta), r * math.sin(beta)])


def rotate(v, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


class Side(enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class GapKind(enum.Enum):
    RADIAL = "radial"
    SWEPT = "swept"


class SourceKind(enum.Enum):
    GAP_TUBE = "tube"
    UNGAP = "ungap"
    IDLE = "idle"


@dataclass(frozen=True)
class Scan:
    """Full field-of-view range scan.

    Beam ``i`` points along ``angle_min + i * angle_increment``; ranges with no
    return are stored as ``range_max``.
    """

    ranges: np.ndarray
    range_max: float
    angle_min: float = -math.pi
    angle_increment: float = 0.0
    stamp: float = 0.0

    def __post_init__(self):
        ranges = np.array(self.ranges, dtype=float).ravel()
        ranges.setflags(write=False)
        object.__setattr__(self, "ranges", ranges)
        if self.angle_increment == 0.0 and len(ranges):
            object.__setattr__(self, "angle_increment", TWO_PI / len(ranges))

    @classmethod
    def full_fov(cls, ranges: Sequence[float], range_max: float, stamp: float = 0.0) -> "Scan":
        n = len(ranges)
        return cls(np.asarray(ranges, dtype=float), float(range_max), -math.pi, TWO_PI / n, float(stamp))

    @property
    def n_beams(self) -> int:
        return len(self.ranges)

    @property
    def bearings(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.n_beams)

    def points(self) -> np.ndarray:
        """Beam endpoints as an ``(N, 2)`` array."""
        b = self.bearings
        return np.column_stack((self.ranges * np.cos(b), self.ranges * np.sin(b)))

    def hit_mask(self) -> np.ndarray:
        return self.ranges < self.range_max

    def beam_index(self, beta: float) -> int:
        """Index of the beam nearest to bearing ``beta``."""
        k = round((beta - self.angle_min) / self.angle_increment)
        return int(k) % self.n_beams

    def point(self, i: int) -> np.ndarray:
        b = self.angle_min + self.angle_increment * i
        return polar_point(self.ranges[i], b)

    def with_ranges(self, ranges) -> "Scan":
        return Scan(np.asarray(ranges, dtype=float), self.range_max, self.angle_min,
                    self.angle_increment, self.stamp)


@dataclass(frozen=True)
class GapPointState:
    """Egocentric state of one gap side: position, velocity and bookkeeping ids."""

    p: np.ndarray
    v: np.ndarray
    side: Side
    model_id: int = -1
    ungap_id: Optional[int] = None
    covariance: Optional[np.ndarray] = None
    beam: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "p", _frozen_vec(self.p))
        object.__setattr__(self, "v", _frozen_vec(self.v))
        if self.covariance is not None:
            cov = np.array(self.covariance, dtype=float).reshape(4, 4)
            cov.setflags(write=False)
            object.__setattr__(self, "covariance", cov)

    @property
    def bearing(self) -> float:
        return bearing(self.p)

    @property
    def range(self) -> float:
        return float(math.hypot(self.p[0], self.p[1]))

    def at(self, t: float) -> np.ndarray:
        """Position after ``t`` seconds of constant-velocity motion."""
        return self.p + self.v * t

    def replace(self, **changes) -> "GapPointState":
        return replace(self, **changes)


@dataclass(frozen=True)
class Gap:
    left: GapPointState
    right: GapPointState
    kind: GapKind = GapKind.SWEPT
    available: bool = True

    @property
    def span(self) -> float:
        return ccw_span(self.right.bearing, self.left.bearing)

    @property
    def chord(self) -> float:
        return float(np.linalg.norm(self.left.p - self.right.p))

    def points(self):
        return (self.right, self.left)

    def replace(self, **changes) -> "Gap":
        return replace(self, **changes)


@dataclass(frozen=True)
class Ungap:
    """Occupied region between the left point of one gap and the right point of the next."""

    right_of_next: GapPointState
    left_of_prev: GapPointState
    receding: bool
    ungap_id: int = 0
    depth: float = math.inf

    def as_gap(self) -> Gap:
        """View the ungap as a gap: CCW from the previous gap's left point to the next gap's right point."""
        right = self.left_of_prev.replace(side=Side.RIGHT)
        left = self.right_of_next.replace(side=Side.LEFT)
        return Gap(left=left, right=right, kind=GapKind.SWEPT)


@dataclass(frozen=True)
class TubeSegment:
    gap: Gap
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class GapTube:
    segments: tuple
    horizon: float
    index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def idle_time(self) -> float:
        return sum(s.duration for s in self.segments if not s.gap.available)


@dataclass(frozen=True)
class TrajectorySource:
    kind: SourceKind
    index: int = -1

    def __str__(self) -> str:
        if self.kind is SourceKind.IDLE:
            return "Idle"
        name = "GapTube" if self.kind is SourceKind.GAP_TUBE else "Ungap"
        return f"{name}:{self.index}"


IDLE_SOURCE = TrajectorySource(SourceKind.IDLE)


@dataclass(frozen=True)
class Trajectory:
    """Timestamped egocentric positions and velocities."""

    t: np.ndarray
    p: np.ndarray
    v: np.ndarray
    source: TrajectorySource = IDLE_SOURCE
    gamma_e: float = 0.0
    goal: Optional[np.ndarray] = None
    intercept_time: float = math.inf
    idle_time: float = 0.0

    def __post_init__(self):
        for name, shape in (("t", (-1,)), ("p", (-1, 2)), ("v", (-1, 2))):
            arr = np.array(getattr(self, name), dtype=float).reshape(shape)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1]) if len(self.t) else 0.0

    @classmethod
    def idle(cls, duration: float = 0.0, dt: float = 0.1) -> "Trajectory":
        n = max(int(round(duration / dt)), 0) + 1
        t = np.arange(n) * dt
        return cls(t, np.zeros((n, 2)), np.zeros((n, 2)), IDLE_SOURCE)

    def sample(self, t: float):
        """Desired position and velocity at time ``t`` (clamped to the span)."""
        if len(self.t) == 1 or t <= self.t[0]:
            return self.p[0].copy(), self.v[0].copy()
        if t >= self.t[-1]:
            return self.p[-1].copy(), np.zeros(2)
        k = int(np.searchsorted(self.t, t, side="right")) - 1
        frac = (t - self.t[k]) / (self.t[k + 1] - self.t[k])
        p = self.p[k] + frac * (self.p[k + 1] - self.p[k])
        return p, self.v[k].copy()


@dataclass(frozen=True)
class EgoState:
    """Robot state. ``p`` and ``theta`` are world-frame and only used as odometry."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(2))
    theta: float = 0.0
    v: np.ndarray = field(default_factory=lambda: np.zeros(2))
    omega: float = 0.0
    a: np.ndarray = field(default_factory=lambda: np.zeros(2))
    r_inscr: float = 0.2
    v_max: float = 1.0

    def __post_init__(self):
        for name in ("p", "v", "a"):
            object.__setattr__(self, name, _frozen_vec(getattr(self, name)))
        if self.r_inscr <= 0:
            raise ValueError("r_inscr must be positive")

    def replace(self, **changes) -> "EgoState":
        return replace(self, **changes)
