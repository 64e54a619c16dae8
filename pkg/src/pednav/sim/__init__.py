from .geometry import PolylinePath, normalize_angle
from .scenarios import SimParams, Simulator, road_points, spawn_scenario
from .sensor import observe, virtual_offset_observe
from .world import (
    CENTER_STEER_BIN,
    MAX_SPEED,
    MAX_STEER_DEG,
    N_SPEED,
    N_STEER,
    SPEEDS,
    STOP_ACTION,
    Action,
    EventKind,
    Observation,
    PedBehavior,
    PedestrianSpec,
    PedState,
    Pose,
    ScenarioId,
    StepOutcome,
    World,
    WorldConfig,
    mirror_observation,
    pedestrian_in_corridor,
    steer_bin_for_angle,
)

__all__ = [
    "Action",
    "CENTER_STEER_BIN",
    "EventKind",
    "MAX_SPEED",
    "MAX_STEER_DEG",
    "N_SPEED",
    "N_STEER",
    "Observation",
    "PedBehavior",
    "PedState",
    "PedestrianSpec",
    "PolylinePath",
    "Pose",
    "ScenarioId",
    "SimParams",
    "Simulator",
    "SPEEDS",
    "STOP_ACTION",
    "StepOutcome",
    "World",
    "WorldConfig",
    "mirror_observation",
    "normalize_angle",
    "observe",
    "pedestrian_in_corridor",
    "road_points",
    "spawn_scenario",
    "steer_bin_for_angle",
    "virtual_offset_observe",
]
