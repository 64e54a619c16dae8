"""Deterministic 2D world: unicycle robot, scripted pedestrians, events.

The robot is a unicycle driven by a discrete (steer_bin, speed_bin) action.
Steering decodes to a heading rate (degrees per second mapped linearly over
the bins); the heading only changes while the robot is moving. Pedestrians
advance by scripted constant-velocity behaviors with small seeded heading
noise. Everything is a pure function of (config, action sequence): replaying
the same actions on a world rebuilt from the same config is bit-exact.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import PolylinePath, normalize_angle

# Discrete action space. Steering bins map linearly over +-MAX_STEER_DEG with
# an odd bin count so a zero-steer center bin exists; speed bins are
# {stop, slow, normal}.
N_STEER = 7
N_SPEED = 3
MAX_STEER_DEG = 50.0
SPEEDS = (0.0, 1.2, 1.5)
CENTER_STEER_BIN = N_STEER // 2
MAX_SPEED = SPEEDS[-1]


class ScenarioId(enum.Enum):
    PATH_FOLLOW = "path_follow"
    CONFRONT = "confront"
    PED_FOLLOW = "ped_follow"
    CROSS = "cross"


class EventKind(enum.Enum):
    COLLISION = "collision"
    OFF_PATH = "off_path"
    GOAL_REACHED = "goal_reached"
    HORIZON_EXHAUSTED = "horizon_exhausted"


class PedBehavior(enum.Enum):
    ALONG_PATH = "along_path"          # walks the path direction, re-aiming at the tangent
    AGAINST_PATH = "against_path"      # walks opposite the path direction
    STRAIGHT = "straight"              # keeps its own heading


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_angle(self.heading))


@dataclass(frozen=True)
class Action:
    steer_bin: int
    speed_bin: int

    def __post_init__(self):
        if not (0 <= self.steer_bin < N_STEER):
            raise ValueError(f"steer_bin {self.steer_bin} outside [0, {N_STEER})")
        if not (0 <= self.speed_bin < N_SPEED):
            raise ValueError(f"speed_bin {self.speed_bin} outside [0, {N_SPEED})")

    @property
    def steer_deg(self) -> float:
        return -MAX_STEER_DEG + self.steer_bin * (2.0 * MAX_STEER_DEG / (N_STEER - 1))

    @property
    def speed(self) -> float:
        return SPEEDS[self.speed_bin]


def steer_bin_for_angle(angle_deg: float) -> int:
    """Nearest steering bin for a continuous angle (clipped to the range)."""
    step = 2.0 * MAX_STEER_DEG / (N_STEER - 1)
    k = round((min(max(angle_deg, -MAX_STEER_DEG), MAX_STEER_DEG) + MAX_STEER_DEG) / step)
    return int(min(max(k, 0), N_STEER - 1))


STOP_ACTION = Action(CENTER_STEER_BIN, 0)


@dataclass(frozen=True)
class PedestrianSpec:
    behavior: PedBehavior
    x: float
    y: float
    heading: float
    speed: float


@dataclass(frozen=True)
class WorldConfig:
    path_points: tuple            # polyline centerline, ((x, y), ...)
    robot_start: Pose
    pedestrian_specs: tuple = ()
    half_width: float = 1.5
    time_step: float = 0.1
    horizon: int = 400
    rng_seed: int = 0
    scenario: ScenarioId = ScenarioId.PATH_FOLLOW
    robot_radius: float = 0.3
    ped_radius: float = 0.3
    sensing_range: float = 8.0
    raster_size: int = 32
    goal_margin: float = 0.3
    ped_heading_noise: float = 0.01   # rad std per step

    def __post_init__(self):
        if self.time_step <= 0:
            raise ValueError("time_step must be positive")
        if self.half_width <= self.robot_radius:
            raise ValueError("path half-width must exceed the robot radius")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")


@dataclass
class PedState:
    behavior: PedBehavior
    x: float
    y: float
    heading: float
    speed: float


@dataclass(frozen=True)
class StepOutcome:
    observation: "Observation"
    events: frozenset
    ground_truth_scenario: ScenarioId

    @property
    def terminal(self) -> bool:
        return bool(self.events)


@dataclass(frozen=True)
class Observation:
    """Egocentric sensor frame: raster channels plus scalar features.

    raster is (H, W, 3) float64 in [0, 1] with axis 0 = forward, axis 1 =
    lateral (index 0 leftmost). Channels: path occupancy, pedestrian
    occupancy, goal-direction field. scalars = (lateral offset / half-width,
    heading error / pi, speed / max speed).
    """

    raster: np.ndarray
    scalars: np.ndarray

    def flat(self) -> np.ndarray:
        return np.concatenate([self.raster.ravel(), self.scalars])

    @property
    def dim(self) -> int:
        return self.raster.size + self.scalars.size


def mirror_observation(obs: Observation) -> Observation:
    """Reflect an observation about the robot's forward axis (an involution)."""
    raster = obs.raster[:, ::-1, :].copy()
    scalars = obs.scalars * np.array([-1.0, -1.0, 1.0])
    return Observation(raster=raster, scalars=scalars)


class World:
    """Mutable episode state. Build from a config; step with actions."""

    def __init__(self, config: WorldConfig):
        self.config = config
        self.path = PolylinePath(config.path_points, config.half_width)
        self.robot = config.robot_start
        self.robot_speed = 0.0
        self.peds = [
            PedState(s.behavior, s.x, s.y, normalize_angle(s.heading), s.speed)
            for s in config.pedestrian_specs
        ]
        self.t = 0
        self.terminated = False
        self._rng = np.random.Generator(np.random.PCG64(config.rng_seed))

    def clone_config(self) -> WorldConfig:
        return self.config

    def robot_projection(self) -> tuple[float, float, float]:
        return self.path.project(self.robot.x, self.robot.y)

    def step(self, action: Action) -> StepOutcome:
        if self.terminated:
            raise RuntimeError("step() called on a terminated episode")
        cfg = self.config
        dt = cfg.time_step

        v = action.speed
        omega = math.radians(action.steer_deg) if v > 0 else 0.0
        h = self.robot.heading
        nx = self.robot.x + v * math.cos(h) * dt
        ny = self.robot.y + v * math.sin(h) * dt
        self.robot = Pose(nx, ny, h + omega * dt)
        self.robot_speed = v

        for ped in self.peds:
            self._advance_ped(ped, dt)

        self.t += 1
        events = self._compute_events()
        self.terminated = bool(events)
        from .sensor import observe

        return StepOutcome(
            observation=observe(self),
            events=frozenset(events),
            ground_truth_scenario=cfg.scenario,
        )

    def _advance_ped(self, ped: PedState, dt: float) -> None:
        if ped.behavior is not PedBehavior.STRAIGHT:
            s, _, tangent = self.path.project(ped.x, ped.y)
            aim = tangent if ped.behavior is PedBehavior.ALONG_PATH else tangent + math.pi
            ped.heading = normalize_angle(aim)
        noise = self._rng.normal(0.0, self.config.ped_heading_noise)
        ped.heading = normalize_angle(ped.heading + noise)
        ped.x += ped.speed * math.cos(ped.heading) * dt
        ped.y += ped.speed * math.sin(ped.heading) * dt

    def _compute_events(self) -> set:
        cfg = self.config
        events: set = set()
        r_sum = cfg.robot_radius + cfg.ped_radius
        for ped in self.peds:
            if math.hypot(ped.x - self.robot.x, ped.y - self.robot.y) < r_sum:
                events.add(EventKind.COLLISION)
                break
        s, lateral, _ = self.robot_projection()
        if abs(lateral) > cfg.half_width:
            events.add(EventKind.OFF_PATH)
        if s >= self.path.total_length - cfg.goal_margin:
            if EventKind.COLLISION not in events:
                events.add(EventKind.GOAL_REACHED)
        if self.t >= cfg.horizon and not events:
            events.add(EventKind.HORIZON_EXHAUSTED)
        return events


def pedestrian_in_corridor(world: World, ahead: float, half_width: float,
                           ped: PedState | None = None,
                           at: tuple[float, float] | None = None) -> bool:
    """Is a pedestrian (or an arbitrary point) inside the robot's forward corridor?

    The corridor is the strip of the path within `half_width` of the
    centerline, from the robot's current arc position to `ahead` meters on.
    """
    s_r, _, _ = world.robot_projection()
    candidates = [(ped.x, ped.y)] if ped is not None else []
    if at is not None:
        candidates = [at]
    elif ped is None:
        candidates = [(p.x, p.y) for p in world.peds]
    for x, y in candidates:
        s_p, lat_p, _ = world.path.project(x, y)
        if s_r <= s_p <= s_r + ahead and abs(lat_p) <= half_width:
            return True
    return False
