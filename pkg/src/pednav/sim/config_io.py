"""World and expert config files: JSON objects with a documented schema.

See docs/world_config_format.md. Same file may carry both sections:
  {"world": {...}, "expert": {...}}
or a bare world object for compatibility with hand-written scenario files.
"""
from __future__ import annotations

import json
from dataclasses import asdict, fields
from pathlib import Path
from typing import TYPE_CHECKING

from .world import PedBehavior, PedestrianSpec, Pose, ScenarioId, WorldConfig

if TYPE_CHECKING:
    from ..expert import ExpertConfig


def world_config_to_dict(cfg: WorldConfig) -> dict:
    return {
        "path_points": [[float(x), float(y)] for x, y in cfg.path_points],
        "robot_start": {"x": cfg.robot_start.x, "y": cfg.robot_start.y,
                        "heading": cfg.robot_start.heading},
        "pedestrians": [
            {"behavior": p.behavior.value, "x": p.x, "y": p.y,
             "heading": p.heading, "speed": p.speed}
            for p in cfg.pedestrian_specs
        ],
        "half_width": cfg.half_width,
        "time_step": cfg.time_step,
        "horizon": cfg.horizon,
        "rng_seed": cfg.rng_seed,
        "scenario": cfg.scenario.value,
        "robot_radius": cfg.robot_radius,
        "ped_radius": cfg.ped_radius,
        "sensing_range": cfg.sensing_range,
        "raster_size": cfg.raster_size,
        "goal_margin": cfg.goal_margin,
        "ped_heading_noise": cfg.ped_heading_noise,
    }


def world_config_from_dict(raw: dict, source: str = "<config>") -> WorldConfig:
    try:
        behaviors = {b.value: b for b in PedBehavior}
        scenarios = {s.value: s for s in ScenarioId}
        peds = tuple(
            PedestrianSpec(behaviors[p["behavior"]], float(p["x"]), float(p["y"]),
                           float(p["heading"]), float(p["speed"]))
            for p in raw.get("pedestrians", ()))
        start = raw["robot_start"]
        known = {f.name for f in fields(WorldConfig)}
        extras = {k: v for k, v in raw.items()
                  if k in known and k not in ("path_points", "robot_start",
                                              "pedestrian_specs", "scenario")}
        return WorldConfig(
            path_points=tuple((float(x), float(y)) for x, y in raw["path_points"]),
            robot_start=Pose(float(start["x"]), float(start["y"]),
                             float(start["heading"])),
            pedestrian_specs=peds,
            scenario=scenarios[raw.get("scenario", "path_follow")],
            **extras,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{source}: bad world config: {exc}") from exc


def expert_config_from_dict(raw: dict, source: str = "<config>") -> "ExpertConfig":
    from ..expert import ExpertConfig

    known = {f.name for f in fields(ExpertConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{source}: unknown expert config fields {sorted(unknown)}")
    try:
        return ExpertConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{source}: bad expert config: {exc}") from exc


def save_configs(path, world: WorldConfig | None = None,
                 expert: "ExpertConfig | None" = None) -> None:
    doc: dict = {}
    if world is not None:
        doc["world"] = world_config_to_dict(world)
    if expert is not None:
        doc["expert"] = asdict(expert)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_configs(path) -> "tuple[WorldConfig | None, ExpertConfig | None]":
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    if "world" not in raw and "expert" not in raw:
        return world_config_from_dict(raw, str(path)), None
    world = None
    expert = None
    if "world" in raw:
        world = world_config_from_dict(raw["world"], str(path))
    if "expert" in raw:
        expert = expert_config_from_dict(raw["expert"], str(path))
    return world, expert
