import math

import numpy as np
import pytest

from pednav.sim import (
    Action,
    PedBehavior,
    PedestrianSpec,
    Pose,
    ScenarioId,
    Simulator,
    World,
    WorldConfig,
    mirror_observation,
    observe,
    spawn_scenario,
    virtual_offset_observe,
)

STRAIGHT = tuple((float(x), 0.0) for x in range(0, 18, 2))


def straight_world(peds=(), robot=Pose(4.0, 0.0, 0.0), **kw):
    cfg = dict(path_points=STRAIGHT, robot_start=robot,
               pedestrian_specs=tuple(peds), horizon=50, rng_seed=1)
    cfg.update(kw)
    return World(WorldConfig(**cfg))


def test_observation_shape_and_range():
    world = Simulator().spawn(ScenarioId.CROSS, 2)
    obs = observe(world)
    n = world.config.raster_size
    assert obs.raster.shape == (n, n, 3)
    assert np.all(np.isfinite(obs.raster))
    assert obs.raster.min() >= 0.0 and obs.raster.max() <= 1.0
    assert np.all(np.isfinite(obs.scalars))
    assert obs.dim == n * n * 3 + 3


def test_on_centerline_scalars_zero():
    obs = observe(straight_world())
    assert obs.scalars[0] == pytest.approx(0.0, abs=1e-12)
    assert obs.scalars[1] == pytest.approx(0.0, abs=1e-12)


def test_no_pedestrians_channel_empty():
    obs = observe(straight_world())
    assert np.all(obs.raster[:, :, 1] == 0.0)


def test_pedestrian_channel_sees_pedestrian():
    ped = PedestrianSpec(PedBehavior.STRAIGHT, 6.0, 0.5, math.pi, 1.0)
    obs = observe(straight_world(peds=[ped]))
    assert obs.raster[:, :, 1].max() > 0.5


def test_speed_scalar_tracks_last_action():
    world = straight_world()
    world.step(Action(3, 2))
    obs = observe(world)
    assert obs.scalars[2] == pytest.approx(1.0)
    world.step(Action(3, 1))
    assert observe(world).scalars[2] == pytest.approx(1.2 / 1.5)


def test_mirror_is_involution():
    world = Simulator().spawn(ScenarioId.CONFRONT, 5)
    for _ in range(7):
        world.step(Action(4, 1))
    obs = observe(world)
    twice = mirror_observation(mirror_observation(obs))
    assert np.array_equal(twice.raster, obs.raster)
    assert np.array_equal(twice.scalars, obs.scalars)


def _mirrored_world(world: World) -> World:
    """Reflect a straight-x-axis world about the centerline."""
    cfg = world.config
    specs = tuple(
        PedestrianSpec(p.behavior, p.x, -p.y, -p.heading, p.speed)
        for p in cfg.pedestrian_specs)
    r = cfg.robot_start
    mirrored = WorldConfig(
        path_points=cfg.path_points,
        robot_start=Pose(r.x, -r.y, -r.heading),
        pedestrian_specs=specs,
        horizon=cfg.horizon,
        rng_seed=cfg.rng_seed,
    )
    return World(mirrored)


def test_world_mirrored_about_centerline_mirrors_observation():
    ped = PedestrianSpec(PedBehavior.STRAIGHT, 7.0, 0.8, -2.0, 0.9)
    world = straight_world(peds=[ped], robot=Pose(3.0, 0.4, 0.25))
    mirrored = _mirrored_world(world)
    direct = observe(mirrored)
    reflected = mirror_observation(observe(world))
    assert np.array_equal(direct.raster, reflected.raster)
    assert np.array_equal(direct.scalars, reflected.scalars)


def test_virtual_offset_zero_is_identity():
    world = Simulator().spawn(ScenarioId.PED_FOLLOW, 4)
    world.step(Action(3, 1))
    a = observe(world)
    b = virtual_offset_observe(world, 0.0, 0.0)
    assert np.array_equal(a.raster, b.raster)
    assert np.array_equal(a.scalars, b.scalars)


def test_virtual_offsets_mirror_each_other_on_symmetric_scene():
    world = straight_world()
    left = virtual_offset_observe(world, +0.5, 0.0)
    right = virtual_offset_observe(world, -0.5, 0.0)
    assert np.array_equal(mirror_observation(left).raster, right.raster)
    assert np.allclose(mirror_observation(left).scalars, right.scalars)


def test_virtual_offset_beyond_half_width_rejected():
    world = straight_world()
    with pytest.raises(ValueError):
        virtual_offset_observe(world, 1.5, 0.0)
    with pytest.raises(ValueError):
        virtual_offset_observe(world, -2.0, 0.0)


def test_virtual_offset_does_not_touch_world():
    world = Simulator().spawn(ScenarioId.CROSS, 6)
    before = (world.robot, world.robot_speed, world.t)
    virtual_offset_observe(world, 0.7, 0.1)
    assert (world.robot, world.robot_speed, world.t) == before


def test_observe_is_pure():
    world = Simulator().spawn(ScenarioId.CONFRONT, 8)
    a = observe(world)
    b = observe(world)
    assert np.array_equal(a.raster, b.raster)
    assert np.array_equal(a.scalars, b.scalars)
