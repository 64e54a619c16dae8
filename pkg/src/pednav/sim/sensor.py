"""Egocentric raster + scalar sensor model.

The raster spans +-sensing_range meters around the robot, heading-aligned:
axis 0 runs backward-to-forward, axis 1 left-to-right. Cell centers are
symmetric about the robot so a lateral mirror of the world produces an
exact lateral flip of the raster.
"""
from __future__ import annotations

import math

import numpy as np

from .world import MAX_SPEED, Observation, Pose, World


def _render(world: World, pose: Pose, speed: float) -> Observation:
    cfg = world.config
    n = cfg.raster_size
    extent = cfg.sensing_range
    cell = 2.0 * extent / n
    centers = -extent + (np.arange(n) + 0.5) * cell
    fwd = centers[:, None]            # axis 0: behind -> ahead
    lat = centers[None, ::-1]         # axis 1: left -> right (+lat is left)

    cos_h = math.cos(pose.heading)
    sin_h = math.sin(pose.heading)
    wx = pose.x + fwd * cos_h - lat * sin_h
    wy = pose.y + fwd * sin_h + lat * cos_h

    path_chan = (world.path.distance_to_centerline(wx, wy) <= cfg.half_width).astype(float)

    ped_chan = np.zeros((n, n))
    sigma = max(cfg.ped_radius, cell)
    for ped in world.peds:
        d2 = (wx - ped.x) ** 2 + (wy - ped.y) ** 2
        np.maximum(ped_chan, np.exp(-d2 / (2.0 * sigma * sigma)), out=ped_chan)

    gx, gy = world.path.goal
    goal_range = world.path.total_length + extent
    d_goal = np.sqrt((wx - gx) ** 2 + (wy - gy) ** 2)
    goal_chan = np.clip(1.0 - d_goal / goal_range, 0.0, 1.0)

    raster = np.stack([path_chan, ped_chan, goal_chan], axis=-1)

    _, lateral, tangent = world.path.project(pose.x, pose.y)
    heading_err = _signed_heading_error(pose.heading, tangent)
    scalars = np.array([
        lateral / cfg.half_width,
        heading_err / math.pi,
        speed / MAX_SPEED,
    ])
    return Observation(raster=raster, scalars=scalars)


def _signed_heading_error(heading: float, tangent: float) -> float:
    # wrap to (-pi, pi] while negating exactly under (heading, tangent) sign flips
    err = heading - tangent
    if err > math.pi:
        err -= 2.0 * math.pi
    elif err < -math.pi:
        err += 2.0 * math.pi
    return err


def observe(world: World) -> Observation:
    """Sensor frame at the robot's current pose (pure; renders nothing stateful)."""
    return _render(world, world.robot, world.robot_speed)


def virtual_offset_observe(world: World, lateral_offset: float,
                           heading_offset: float = 0.0) -> Observation:
    """Observation from a virtually displaced viewpoint; the world is untouched.

    The displacement is in the robot frame: positive lateral_offset moves the
    viewpoint to the robot's left. Stands in for side-mounted cameras when
    synthesizing recovery-from-drift training views.
    """
    if abs(lateral_offset) >= world.config.half_width:
        raise ValueError(
            f"virtual lateral offset {lateral_offset} must stay inside the "
            f"path half-width {world.config.half_width}"
        )
    r = world.robot
    pose = Pose(
        r.x - lateral_offset * math.sin(r.heading),
        r.y + lateral_offset * math.cos(r.heading),
        r.heading + heading_offset,
    )
    return _render(world, pose, world.robot_speed)
