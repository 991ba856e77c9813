"""Input validation helpers shared by the estimators and the harness."""
from __future__ import annotations

import math

import numpy as np

from .types import EgoState, Scan


def check_vector(x, name: str = "vector", n: int = 2) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def check_scan(scan) -> Scan:
    """Validate a scan (or a bare range array, interpreted as full FOV)."""
    if not isinstance(scan, Scan):
        raise TypeError(f"expected Scan, got {type(scan).__name__}")
    r = scan.ranges
    if r.ndim != 1 or len(r) < 3:
        raise ValueError("a scan needs at least 3 beams")
    if not np.all(np.isfinite(r)):
        raise ValueError("scan ranges must be finite (clip no-returns to range_max)")
    if np.any(r <= 0) or np.any(r > scan.range_max * (1 + 1e-12)):
        raise ValueError("scan ranges must lie in (0, range_max]")
    if not math.isclose(scan.angle_increment * len(r), 2 * math.pi, rel_tol=1e-6):
        raise ValueError("scan must cover the full field of view")
    return scan


def check_ego(ego) -> EgoState:
    if not isinstance(ego, EgoState):
        raise TypeError(f"expected EgoState, got {type(ego).__name__}")
    return ego
