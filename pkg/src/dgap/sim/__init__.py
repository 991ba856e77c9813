"""Deterministic kinematic simulator."""
from .episode import EpisodeResult, run_episode
from .scenario import Scenario, load_scenario
from .world import Agent, WorldState, raycast_scan, step_world

__all__ = ["Agent", "EpisodeResult", "Scenario", "WorldState", "load_scenario", "raycast_scan",
           "run_episode", "step_world"]
