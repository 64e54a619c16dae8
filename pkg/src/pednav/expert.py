"""Scripted oracle expert: scenario labels, per-scenario actions, intervention detector.

Stands in for the human operator so the full intervention-learning loop can
run unattended. The three operations are pure functions of their inputs; the
InterventionMonitor adds the per-episode memory (divergence history, reaction
delay) and hands it to check_intervention explicitly.
"""
from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

from .sim.geometry import normalize_angle
from .sim.world import (
    Action,
    PedBehavior,
    PedState,
    ScenarioId,
    World,
    steer_bin_for_angle,
)

NORMAL_BIN = 2
SLOW_BIN = 1
STOP_BIN = 0


class InterventionReason(enum.Enum):
    NONE = "none"
    LATERAL_EXCESS = "lateral_excess"
    COLLISION_IMMINENT = "collision_imminent"
    POLICY_DIVERGENCE = "policy_divergence"


@dataclass(frozen=True)
class InterventionVerdict:
    intervene: bool
    reason: InterventionReason = InterventionReason.NONE

    def __post_init__(self):
        if self.intervene == (self.reason is InterventionReason.NONE):
            raise ValueError("reason must be NONE exactly when intervene is false")


QUIET = InterventionVerdict(False, InterventionReason.NONE)


@dataclass(frozen=True)
class ExpertConfig:
    lookahead_distance: float = 1.5
    yield_distance: float = 1.0
    max_lateral_frac: float = 0.8
    collision_ttc: float = 1.5
    ttc_margin: float = 0.0       # optional pad on the contact radius
    divergence_bins: int = 3
    divergence_steps: int = 5
    reaction_delay: int = 2
    # behavior margins beyond the bare thresholds. The expert's rules are
    # position-determined (no velocity terms) so a single-frame observation
    # carries everything the demonstrated mapping depends on, and every
    # stop/steer threshold sits at least one raster cell away from the
    # detector's trigger so an imitator's quantization error stays safe.
    confront_clearance: float = 1.1       # target lateral separation from the ped
    confront_side_deadband: float = 0.25  # relative offset below this is ambiguous
    confront_ped_deadband: float = 0.15   # then the ped's own lateral decides
    confront_pass_range: float = 2.5      # keep the label through the pass
    follow_stop_margin: float = 1.0      # stop gap = yield_distance + this
    follow_slow_gap: float = 2.8
    corridor_half_width: float = 0.9
    cross_stop_band: float = 2.6         # lateral band around the path that holds a stop
    cross_stop_ahead: float = 4.3        # how far ahead of the robot the band extends
    frontal_cone: float = math.radians(40.0)
    follow_cone: float = math.radians(45.0)
    cross_meta_horizon: float = 8.0

    def __post_init__(self):
        if not (0 < self.max_lateral_frac < 1):
            raise ValueError("max_lateral_frac must lie in (0, 1)")
        for name in ("lookahead_distance", "yield_distance", "collision_ttc",
                     "divergence_bins", "divergence_steps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _ped_relation(world: World, ped: PedState, cfg: ExpertConfig):
    """Geometric features of one pedestrian relative to the robot."""
    r = world.robot
    dx, dy = ped.x - r.x, ped.y - r.y
    dist = math.hypot(dx, dy)
    bearing = normalize_angle(math.atan2(dy, dx) - r.heading)
    rel_heading = normalize_angle(ped.heading - r.heading)
    return dist, bearing, rel_heading


def _crosses_path_ahead(world: World, ped: PedState, cfg: ExpertConfig) -> bool:
    """Does the pedestrian's straight-line track cross the path ahead soon?"""
    if ped.speed <= 0:
        return False
    s_r, _, _ = world.robot_projection()
    vx = ped.speed * math.cos(ped.heading)
    vy = ped.speed * math.sin(ped.heading)
    horizon = cfg.cross_meta_horizon
    steps = 16
    for i in range(steps + 1):
        tau = horizon * i / steps
        px, py = ped.x + vx * tau, ped.y + vy * tau
        s_p, lat_p, _ = world.path.project(px, py)
        if abs(lat_p) <= cfg.corridor_half_width and s_r < s_p <= s_r + world.config.sensing_range:
            return True
    return False


def meta_label(world: World, cfg: ExpertConfig = ExpertConfig()) -> ScenarioId:
    """Ground-truth scenario from geometric rules (Cross > Confront > PedFollow)."""
    sensing = world.config.sensing_range
    candidates = []
    for ped in world.peds:
        dist, bearing, rel_heading = _ped_relation(world, ped, cfg)
        if dist > sensing:
            continue
        if abs(rel_heading) > math.radians(45.0) and abs(rel_heading) < math.radians(135.0) \
                and _crosses_path_ahead(world, ped, cfg):
            candidates.append((0, ScenarioId.CROSS))
        elif abs(rel_heading) >= math.radians(135.0) and (
                abs(bearing) <= cfg.frontal_cone
                or (dist <= cfg.confront_pass_range
                    and abs(bearing) <= math.radians(100.0))):
            candidates.append((1, ScenarioId.CONFRONT))
        elif abs(rel_heading) <= cfg.follow_cone and abs(bearing) <= cfg.follow_cone:
            candidates.append((2, ScenarioId.PED_FOLLOW))
    if not candidates:
        return ScenarioId.PATH_FOLLOW
    return min(candidates)[1]


def _pure_pursuit_bin(world: World, cfg: ExpertConfig, speed: float,
                      lateral_shift: float = 0.0) -> int:
    r = world.robot
    s_r, _, _ = world.robot_projection()
    target = world.path.point_at(s_r + cfg.lookahead_distance)
    if lateral_shift != 0.0:
        tangent = world.path.tangent_angle_at(s_r + cfg.lookahead_distance)
        target = (target[0] - lateral_shift * math.sin(tangent),
                  target[1] + lateral_shift * math.cos(tangent))
    alpha = normalize_angle(math.atan2(target[1] - r.y, target[0] - r.x) - r.heading)
    reach = max(math.hypot(target[0] - r.x, target[1] - r.y), 0.3)
    omega = 2.0 * max(speed, 0.6) * math.sin(alpha) / reach
    return steer_bin_for_angle(math.degrees(omega))


def _nearest_ped(world: World, wanted=None) -> PedState | None:
    best, best_d = None, float("inf")
    for ped in world.peds:
        d = math.hypot(ped.x - world.robot.x, ped.y - world.robot.y)
        if d < best_d:
            best, best_d = ped, d
    return best


def _ped_in_stop_band(world: World, ped: PedState, cfg: ExpertConfig) -> bool:
    """Is the pedestrian inside the hold-a-stop band around the path ahead?

    A position-only superset of "will occupy the swept corridor within the
    TTC window": any pedestrian that could enter the corridor that soon at
    walking speed is inside the band, and the rule is observable from a
    single frame (no velocity term), so the demonstrated stop is imitable.
    """
    s_r, _, _ = world.robot_projection()
    s_p, lat_p, _ = world.path.project(ped.x, ped.y)
    return (abs(lat_p) <= cfg.cross_stop_band
            and s_r - 0.3 <= s_p <= s_r + cfg.cross_stop_ahead)


def expert_action(world: World, scenario: ScenarioId,
                  cfg: ExpertConfig = ExpertConfig()) -> Action:
    """Per-scenario scripted action, snapped to the nearest discrete bins."""
    if scenario is ScenarioId.PATH_FOLLOW:
        return Action(_pure_pursuit_bin(world, cfg, 1.5), NORMAL_BIN)

    if scenario is ScenarioId.CONFRONT:
        ped = _nearest_ped(world)
        max_lat = world.config.half_width - world.config.robot_radius - 0.2
        shift = min(cfg.confront_clearance, max_lat)
        if ped is not None:
            # pass on the side of the pedestrian the robot already occupies;
            # when that is ambiguous (below raster resolution), pass on the
            # side of the path the pedestrian is not on; dead-center commits
            # left. Every threshold is resolvable from the observation, so
            # the demonstrated choice is a consistent function of it. The
            # shifted lookahead targets an absolute clearance from the ped.
            _, lat_r, _ = world.robot_projection()
            _, lat_p, _ = world.path.project(ped.x, ped.y)
            delta = lat_r - lat_p
            if abs(delta) > cfg.confront_side_deadband:
                side = 1.0 if delta > 0 else -1.0
            elif abs(lat_p) > cfg.confront_ped_deadband:
                side = -1.0 if lat_p > 0 else 1.0
            else:
                side = 1.0
            shift = min(max(lat_p + side * cfg.confront_clearance, -max_lat), max_lat)
        return Action(_pure_pursuit_bin(world, cfg, 1.2, lateral_shift=shift), SLOW_BIN)

    if scenario is ScenarioId.PED_FOLLOW:
        ped = _nearest_ped(world)
        steer = _pure_pursuit_bin(world, cfg, 1.2)
        if ped is None:
            return Action(steer, NORMAL_BIN)
        gap = math.hypot(ped.x - world.robot.x, ped.y - world.robot.y)
        if gap < cfg.yield_distance + cfg.follow_stop_margin:
            return Action(steer, STOP_BIN)
        if gap < cfg.follow_slow_gap:
            return Action(steer, SLOW_BIN)
        return Action(steer, NORMAL_BIN)

    # Cross: hold a stop while any pedestrian sits in the band around the
    # path ahead; proceed once it has cleared
    steer = _pure_pursuit_bin(world, cfg, 1.5)
    if any(_ped_in_stop_band(world, ped, cfg) for ped in world.peds):
        return Action(steer, STOP_BIN)
    return Action(steer, NORMAL_BIN)


def _ttc_below(world: World, action: Action, cfg: ExpertConfig) -> bool:
    """Constant-velocity extrapolation: contact sooner than collision_ttc?

    The robot extrapolates at its commanded velocity, pedestrians at their
    current velocity; the earliest approach below the contact radius within
    the window triggers.
    """
    r = world.robot
    v = action.speed
    rvx = v * math.cos(r.heading)
    rvy = v * math.sin(r.heading)
    r_sum = world.config.robot_radius + world.config.ped_radius + cfg.ttc_margin
    for ped in world.peds:
        px = ped.x - r.x
        py = ped.y - r.y
        vx = ped.speed * math.cos(ped.heading) - rvx
        vy = ped.speed * math.sin(ped.heading) - rvy
        c = px * px + py * py - r_sum * r_sum
        if c <= 0:
            return True
        a = vx * vx + vy * vy
        b = 2.0 * (px * vx + py * vy)
        if a <= 1e-12:
            continue
        disc = b * b - 4.0 * a * c
        if disc < 0:
            continue
        t_hit = (-b - math.sqrt(disc)) / (2.0 * a)
        if 0.0 <= t_hit < cfg.collision_ttc:
            return True
    return False


def raw_trigger(world: World, learner_action: Action, history,
                cfg: ExpertConfig = ExpertConfig()) -> InterventionVerdict:
    """Instantaneous trigger check (before reaction delay is applied).

    history: iterable of absolute steer-bin differences between learner and
    expert for the most recent steps, newest last.
    """
    if _ttc_below(world, learner_action, cfg):
        return InterventionVerdict(True, InterventionReason.COLLISION_IMMINENT)
    _, lateral, _ = world.robot_projection()
    if abs(lateral) > cfg.max_lateral_frac * world.config.half_width:
        return InterventionVerdict(True, InterventionReason.LATERAL_EXCESS)
    diffs = list(history)[-cfg.divergence_steps:]
    if len(diffs) >= cfg.divergence_steps and all(d >= cfg.divergence_bins for d in diffs):
        return InterventionVerdict(True, InterventionReason.POLICY_DIVERGENCE)
    return QUIET


@dataclass
class InterventionMonitor:
    """Per-episode detector state: divergence history plus reaction delay.

    check() must be called exactly once per simulation step. The verdict
    returned at step t reflects the trigger condition at step t -
    reaction_delay, modeling the expert's reaction time.
    """

    cfg: ExpertConfig = field(default_factory=ExpertConfig)
    _diffs: deque = field(default_factory=deque)
    _pipeline: deque = field(default_factory=deque)

    def check(self, world: World, learner_action: Action,
              expert_act: Action | None = None) -> InterventionVerdict:
        if expert_act is None:
            expert_act = expert_action(world, meta_label(world, self.cfg), self.cfg)
        self._diffs.append(abs(learner_action.steer_bin - expert_act.steer_bin))
        while len(self._diffs) > self.cfg.divergence_steps:
            self._diffs.popleft()
        verdict = raw_trigger(world, learner_action, self._diffs, self.cfg)
        self._pipeline.append(verdict)
        if len(self._pipeline) > self.cfg.reaction_delay:
            return self._pipeline.popleft()
        return QUIET

    def reset(self) -> None:
        self._diffs.clear()
        self._pipeline.clear()


def check_intervention(world: World, learner_action: Action, history,
                       cfg: ExpertConfig = ExpertConfig()) -> InterventionVerdict:
    """Pure single-shot form: history carries the divergence record."""
    return raw_trigger(world, learner_action, history, cfg)
