import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pednav.expert import ExpertConfig, expert_action, meta_label
from pednav.sim import (
    Action,
    EventKind,
    MAX_SPEED,
    N_SPEED,
    N_STEER,
    PedBehavior,
    PedestrianSpec,
    Pose,
    ScenarioId,
    Simulator,
    SimParams,
    World,
    WorldConfig,
    spawn_scenario,
    steer_bin_for_angle,
)

STRAIGHT = tuple((float(x), 0.0) for x in range(0, 18, 2))


def straight_config(**kw):
    defaults = dict(path_points=STRAIGHT, robot_start=Pose(0.0, 0.0, 0.0),
                    horizon=50, rng_seed=1)
    defaults.update(kw)
    return WorldConfig(**defaults)


def test_action_decoding_bounds():
    assert Action(0, 0).steer_deg == pytest.approx(-50.0)
    assert Action(N_STEER - 1, 0).steer_deg == pytest.approx(50.0)
    assert Action(N_STEER // 2, 0).steer_deg == pytest.approx(0.0)
    assert [Action(3, b).speed for b in range(N_SPEED)] == [0.0, 1.2, 1.5]
    with pytest.raises(ValueError):
        Action(N_STEER, 0)
    with pytest.raises(ValueError):
        Action(0, -1)


@given(st.floats(-80, 80))
def test_steer_bin_round_trip(angle):
    k = steer_bin_for_angle(angle)
    assert 0 <= k < N_STEER
    clipped = min(max(angle, -50.0), 50.0)
    assert abs(Action(k, 0).steer_deg - clipped) <= 50.0 / (N_STEER - 1) + 1e-9


def test_zero_speed_keeps_robot_pose_but_pedestrians_advance():
    ped = PedestrianSpec(PedBehavior.ALONG_PATH, 5.0, 0.0, 0.0, 1.0)
    world = World(straight_config(pedestrian_specs=(ped,)))
    before = world.robot
    world.step(Action(0, 0))  # hard steer at zero speed
    assert world.robot == before
    assert world.peds[0].x > 5.0


def test_center_steer_on_centerline_stays_centered():
    world = World(straight_config())
    for _ in range(20):
        out = world.step(Action(N_STEER // 2, 2))
        if out.terminal:
            break
    _, lat, _ = world.robot_projection()
    assert lat == pytest.approx(0.0, abs=1e-12)


def test_replay_is_bit_exact():
    cfg = spawn_scenario(ScenarioId.CONFRONT, 9)
    actions = [Action((3 + t) % N_STEER, (t % 2) + 1) for t in range(60)]
    traces = []
    for _ in range(2):
        world = World(cfg)
        trace = []
        for a in actions:
            out = world.step(a)
            trace.append((world.robot, tuple((p.x, p.y, p.heading) for p in world.peds),
                          out.events))
            if out.terminal:
                break
        traces.append(trace)
    assert traces[0] == traces[1]


def test_kinematic_bound_per_step():
    world = World(straight_config(horizon=200))
    rng = np.random.default_rng(3)
    prev = world.robot
    for _ in range(100):
        a = Action(int(rng.integers(N_STEER)), int(rng.integers(N_SPEED)))
        out = world.step(a)
        moved = math.hypot(world.robot.x - prev.x, world.robot.y - prev.y)
        assert moved <= MAX_SPEED * world.config.time_step + 1e-9
        prev = world.robot
        if out.terminal:
            break


def test_collision_matches_brute_force_distance():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n_ped = int(rng.integers(1, 4))
        peds = tuple(
            PedestrianSpec(PedBehavior.STRAIGHT, float(rng.uniform(0, 6)),
                           float(rng.uniform(-2, 2)), float(rng.uniform(-3, 3)),
                           0.0)
            for _ in range(n_ped))
        world = World(straight_config(pedestrian_specs=peds,
                                      robot_start=Pose(float(rng.uniform(0, 6)),
                                                       float(rng.uniform(-1.2, 1.2)),
                                                       0.0)))
        out = world.step(Action(3, 0))
        r_sum = world.config.robot_radius + world.config.ped_radius
        brute = any(
            math.hypot(p.x - world.robot.x, p.y - world.robot.y) < r_sum
            for p in world.peds)
        assert (EventKind.COLLISION in out.events) == brute


def test_collision_and_goal_mutually_exclusive():
    ped = PedestrianSpec(PedBehavior.STRAIGHT, 15.9, 0.0, 0.0, 0.0)
    world = World(straight_config(pedestrian_specs=(ped,),
                                  robot_start=Pose(15.5, 0.0, 0.0)))
    out = world.step(Action(3, 2))
    assert EventKind.COLLISION in out.events
    assert EventKind.GOAL_REACHED not in out.events


def test_off_path_event():
    world = World(straight_config(robot_start=Pose(5.0, 1.45, math.pi / 2)))
    out = world.step(Action(3, 2))
    assert EventKind.OFF_PATH in out.events
    assert world.terminated


def test_stepping_terminated_episode_raises():
    world = World(straight_config(horizon=1))
    world.step(Action(3, 0))
    assert world.terminated
    with pytest.raises(RuntimeError):
        world.step(Action(3, 0))


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        straight_config(time_step=0.0)
    with pytest.raises(ValueError):
        straight_config(horizon=0)
    with pytest.raises(ValueError):
        straight_config(half_width=0.2)  # below the robot radius


# -- scenario spawning --------------------------------------------------------

def test_path_follow_spawns_no_pedestrians():
    cfg = spawn_scenario(ScenarioId.PATH_FOLLOW, 123)
    assert cfg.pedestrian_specs == ()


def test_spawn_is_deterministic():
    a = spawn_scenario(ScenarioId.CONFRONT, 7)
    b = spawn_scenario(ScenarioId.CONFRONT, 7)
    assert a == b


def test_spawn_pedestrian_roles():
    confront = spawn_scenario(ScenarioId.CONFRONT, 5)
    assert len(confront.pedestrian_specs) == 1
    assert confront.pedestrian_specs[0].behavior is PedBehavior.AGAINST_PATH

    follow = spawn_scenario(ScenarioId.PED_FOLLOW, 5)
    assert follow.pedestrian_specs[0].behavior is PedBehavior.ALONG_PATH
    assert follow.pedestrian_specs[0].speed < MAX_SPEED

    cross = spawn_scenario(ScenarioId.CROSS, 5)
    assert cross.pedestrian_specs[0].behavior is PedBehavior.STRAIGHT


def test_cross_timing_forces_a_yield():
    """The crossing pedestrian reaches the centerline near the unobstructed
    robot's arrival time (oracle-simulated), within the episode window."""
    expert_cfg = ExpertConfig()
    for seed in (3, 8, 21):
        cfg = spawn_scenario(ScenarioId.CROSS, seed)
        dt = cfg.time_step

        # simulate the pedestrian alone: when and where does it hit the centerline?
        ped_world = World(cfg)
        ped_arrival = None
        s_cross = None
        for t in range(cfg.horizon):
            if ped_world.terminated:
                break
            ped_world.step(Action(3, 0))  # robot parked
            ped = ped_world.peds[0]
            _, lat_p, _ = ped_world.path.project(ped.x, ped.y)
            if abs(lat_p) < 0.2:
                ped_arrival = (t + 1) * dt
                s_cross, _, _ = ped_world.path.project(ped.x, ped.y)
                break
        assert ped_arrival is not None
        assert 1.0 <= ped_arrival <= cfg.horizon * dt

        # oracle robot on the same road with the pedestrian removed
        free = World(dataclasses.replace(cfg, pedestrian_specs=(),
                                         scenario=ScenarioId.PATH_FOLLOW))
        robot_arrival = None
        t = 0
        while not free.terminated:
            free.step(expert_action(free, meta_label(free, expert_cfg), expert_cfg))
            t += 1
            s_now, _, _ = free.robot_projection()
            if s_now >= s_cross:
                robot_arrival = t * dt
                break
        assert robot_arrival is not None
        assert abs(ped_arrival - robot_arrival) < 2.0
