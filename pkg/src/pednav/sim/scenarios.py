"""Seeded scenario generation for the four scenario categories.

A road (gently curved polyline) is derived from a road seed; pedestrian
placement and timing are derived from the episode seed. Same (scenario,
seed, road_seed) always yields a bit-identical WorldConfig.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import PolylinePath, normalize_angle
from .world import (
    PedBehavior,
    PedestrianSpec,
    Pose,
    ScenarioId,
    World,
    WorldConfig,
)

_SCENARIO_INDEX = {s: i for i, s in enumerate(ScenarioId)}

# speed bands per pedestrian role, in m/s
_CONFRONT_SPEED = (0.80, 1.00)
_FOLLOW_SPEED = (0.60, 0.80)
_CROSS_SPEED = (0.90, 1.10)


@dataclass(frozen=True)
class SimParams:
    """World-level knobs shared by every spawned scenario."""

    half_width: float = 1.5
    time_step: float = 0.1
    horizon: int = 400
    raster_size: int = 32
    sensing_range: float = 8.0
    path_segments: int = 8
    segment_length: float = 2.0
    max_bend_deg: float = 9.0


def _rng_for(*keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(keys))))


def road_points(road_seed: int, params: SimParams = SimParams()) -> tuple:
    """Polyline centerline for a seeded road: gentle cumulative bends."""
    rng = _rng_for(road_seed, 0x0AD)
    pts = [(0.0, 0.0)]
    heading = 0.0
    x, y = 0.0, 0.0
    for _ in range(params.path_segments):
        bend = math.radians(rng.uniform(-params.max_bend_deg, params.max_bend_deg))
        heading = max(-0.35, min(0.35, heading + bend))
        x += params.segment_length * math.cos(heading)
        y += params.segment_length * math.sin(heading)
        pts.append((x, y))
    return tuple(pts)


def spawn_scenario(scenario: ScenarioId, seed: int, road_seed: int | None = None,
                   params: SimParams = SimParams()) -> WorldConfig:
    """Deterministic world config realizing one of the four scenario kinds."""
    if road_seed is None:
        road_seed = seed
    pts = road_points(road_seed, params)
    path = PolylinePath(pts, params.half_width)
    rng = _rng_for(seed, _SCENARIO_INDEX[scenario], road_seed, 0x5CE)

    start_tangent = path.tangent_angle_at(0.0)
    robot_start = Pose(pts[0][0], pts[0][1], start_tangent)

    peds: list[PedestrianSpec] = []
    if scenario is ScenarioId.CONFRONT:
        s_ped = rng.uniform(11.0, 13.5)
        lat = rng.uniform(-0.1, 0.1)
        speed = rng.uniform(*_CONFRONT_SPEED)
        peds.append(_on_path_ped(path, s_ped, lat, speed, PedBehavior.AGAINST_PATH))
    elif scenario is ScenarioId.PED_FOLLOW:
        s_ped = rng.uniform(3.0, 4.5)
        lat = rng.uniform(-0.15, 0.15)
        speed = rng.uniform(*_FOLLOW_SPEED)
        peds.append(_on_path_ped(path, s_ped, lat, speed, PedBehavior.ALONG_PATH))
    elif scenario is ScenarioId.CROSS:
        s_cross = rng.uniform(7.0, 10.0)
        side = 1.0 if rng.random() < 0.5 else -1.0
        speed = rng.uniform(*_CROSS_SPEED)
        t_robot = s_cross / 1.5  # unobstructed arrival at normal speed
        t_ped = t_robot + rng.uniform(-0.2, 0.5)
        d_start = speed * t_ped
        cx, cy = path.point_at(s_cross)
        tangent = path.tangent_angle_at(s_cross)
        nx, ny = -math.sin(tangent), math.cos(tangent)  # left normal
        px = float(cx + side * nx * d_start)
        py = float(cy + side * ny * d_start)
        heading = math.atan2(-side * ny, -side * nx)
        peds.append(PedestrianSpec(PedBehavior.STRAIGHT, px, py, heading, float(speed)))

    world_seed = int(np.random.SeedSequence([seed, _SCENARIO_INDEX[scenario],
                                             road_seed, 0x0E1]).generate_state(1)[0])
    return WorldConfig(
        path_points=pts,
        robot_start=robot_start,
        pedestrian_specs=tuple(peds),
        half_width=params.half_width,
        time_step=params.time_step,
        horizon=params.horizon,
        rng_seed=world_seed,
        scenario=scenario,
        sensing_range=params.sensing_range,
        raster_size=params.raster_size,
    )


def _on_path_ped(path: PolylinePath, s: float, lateral: float, speed: float,
                 behavior: PedBehavior) -> PedestrianSpec:
    cx, cy = path.point_at(s)
    tangent = path.tangent_angle_at(s)
    nx, ny = -math.sin(tangent), math.cos(tangent)
    heading = tangent if behavior is PedBehavior.ALONG_PATH else normalize_angle(tangent + math.pi)
    return PedestrianSpec(behavior, float(cx + lateral * nx), float(cy + lateral * ny),
                          heading, float(speed))


class Simulator:
    """Factory binding SimParams so callers spawn worlds uniformly."""

    def __init__(self, params: SimParams = SimParams()):
        self.params = params

    def config(self, scenario: ScenarioId, seed: int,
               road_seed: int | None = None) -> WorldConfig:
        return spawn_scenario(scenario, seed, road_seed, self.params)

    def spawn(self, scenario: ScenarioId, seed: int,
              road_seed: int | None = None) -> World:
        return World(self.config(scenario, seed, road_seed))

    def with_horizon(self, horizon: int) -> "Simulator":
        return Simulator(replace(self.params, horizon=horizon))
