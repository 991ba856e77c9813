"""Dynamic gap local planner with a deterministic 2D simulator and experiment harness."""
from .config import PlannerConfig
from .feasibility import FeasibilityResult, pn_feasibility, propagate_gap_points, tube_feasible
from .perception import detect_gaps, detect_ungaps, simplify_gaps
from .planner import DynamicGapPlanner, GapDetector, PlanResult
from .types import EgoState, Gap, GapPointState, GapTube, Scan, Trajectory, Ungap

__all__ = [
    "DynamicGapPlanner", "EgoState", "FeasibilityResult", "Gap", "GapDetector", "GapPointState",
    "GapTube", "PlanResult", "PlannerConfig", "Scan", "Trajectory", "Ungap", "detect_gaps",
    "detect_ungaps", "pn_feasibility", "propagate_gap_points", "simplify_gaps", "tube_feasible",
]
__version__ = "0.1.0"
