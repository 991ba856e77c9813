"""Small builders shared by the test modules."""
import math

import numpy as np

from dgap.sim.world import Agent, WorldState, raycast_scan
from dgap.types import EgoState, Gap, GapKind, GapPointState, Scan, Side


def point(x, y, side, v=(0.0, 0.0), **kw):
    return GapPointState(np.array([x, y], float), np.array(v, float), side, **kw)


def gap(right, left, v_r=(0.0, 0.0), v_l=(0.0, 0.0), kind=GapKind.SWEPT, **kw):
    return Gap(left=point(*left, Side.LEFT, v_l), right=point(*right, Side.RIGHT, v_r), kind=kind, **kw)


def disk_world(disks, segments=(), n_beams=360, range_max=5.0):
    """Scan from the origin of a world holding static disks ``(x, y, r)``."""
    agents = tuple(Agent(center=(x, y), radius=r) for x, y, r in disks)
    world = WorldState(EgoState(), agents, np.asarray(segments, float).reshape(-1, 2, 2))
    return raycast_scan(world, n_beams, range_max)


def arc_scan(blocks, n_beams=360, range_max=5.0, fill=None):
    """Scan with ``blocks`` of ``(first_beam, n, range)`` set and the rest at ``fill`` or max range."""
    r = np.full(n_beams, range_max if fill is None else fill, float)
    for start, n, rng in blocks:
        r[np.arange(start, start + n) % n_beams] = rng
    return Scan(r, range_max, -math.pi, 2 * math.pi / n_beams)
