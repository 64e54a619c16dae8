"""End-to-end experiment orchestration with persisted, replayable records.

An experiment is: behavior-cloning warm start, then N learn-from-intervention
iterations, each followed by the attempt and TWI protocols on every road.
Everything derives from the config's seeds, so re-running a config reproduces
byte-identical metric tables, and any persisted checkpoint re-evaluates to
the recorded numbers.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .evalharness import (
    ATTEMPT_SCENARIOS,
    TWI_SCENARIOS,
    eval_attempts,
    eval_twi,
    growth_report,
    median,
    success_count,
)
from .expert import ExpertConfig
from .imitation import (
    AugmentConfig,
    BacktrackSchedule,
    DaggerConfig,
    run_hbc,
    run_lfi_dagger,
    run_vanilla_dagger,
)
from .policy import TrainConfig
from .sim.scenarios import SimParams, Simulator
from .sim.world import ScenarioId

RECORD_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    roads: tuple = (0, 1, 2, 3)
    twi_roads: tuple = (0, 1, 2, 3, 4)
    attempts_per_road: int = 20
    iterations: int = 5
    episodes_per_iteration: int = 6
    hbc_episodes: int = 1
    queue_len: int = 50
    schedule: str = "linear"
    resume_after_intervention: bool = False
    baseline_vanilla: bool = False
    mirror: bool = True
    mirror_jitter_std: float = 0.25
    virtual_offsets: tuple = ((0.6, 0.0), (-0.6, 0.0))
    randomize_speed_scalar: bool = True
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 30
    anneal_epochs: int = 20
    anneal_lr: float = 0.005
    soft_label_sigma: float = 0.5
    horizon: int = 400
    raster_size: int = 32
    out_dir: str = "experiment_out"

    def sim_params(self) -> SimParams:
        return SimParams(horizon=self.horizon, raster_size=self.raster_size)

    def train_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate,
                           batch_size=self.batch_size, epochs=self.epochs,
                           anneal_epochs=self.anneal_epochs,
                           anneal_lr=self.anneal_lr,
                           soft_label_sigma=self.soft_label_sigma,
                           rng_seed=self.seed)

    def augment_config(self) -> AugmentConfig:
        return AugmentConfig(mirror=self.mirror,
                             mirror_jitter_std=self.mirror_jitter_std,
                             virtual_offsets=tuple(tuple(v) for v in self.virtual_offsets),
                             randomize_speed_scalar=self.randomize_speed_scalar)

    def dagger_config(self) -> DaggerConfig:
        return DaggerConfig(
            iterations=1,
            episodes_per_iteration=self.episodes_per_iteration,
            queue_len=self.queue_len,
            schedule=BacktrackSchedule(self.schedule, self.queue_len),
            resume_after_intervention=self.resume_after_intervention,
            augmentation=self.augment_config(),
            road_seeds=tuple(self.roads),
            base_seed=self.seed,
            train=self.train_config(),
        )


_TUPLE_FIELDS = ("roads", "twi_roads", "virtual_offsets")


def load_experiment_config(path) -> ExperimentConfig:
    """Read a config file (JSON object), reporting bad fields by path."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    known = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    for key in raw:
        if key not in known:
            raise ValueError(f"{path}: unknown config field {key!r}")
    for key in _TUPLE_FIELDS:
        if key in raw:
            raw[key] = tuple(tuple(v) if isinstance(v, list) else v for v in raw[key])
    try:
        cfg = ExperimentConfig(**raw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from exc
    if cfg.schedule not in ("linear", "log", "exp"):
        raise ValueError(f"{path}: schedule: must be linear, log, or exp")
    if cfg.iterations < 1:
        raise ValueError(f"{path}: iterations: must be at least 1")
    return cfg


def _attempt_seeds(cfg: ExperimentConfig, scenario: ScenarioId, road: int) -> list:
    return [cfg.seed * 1_000_003 + road * 10_007 + k for k in range(cfg.attempts_per_road)]


def _evaluate(bundle, cfg: ExperimentConfig, sim: Simulator,
              expert_cfg: ExpertConfig) -> dict:
    attempts = {}
    for scenario in ATTEMPT_SCENARIOS:
        per_road = {}
        for road in cfg.roads:
            seeds = _attempt_seeds(cfg, scenario, road)
            results = eval_attempts(bundle, scenario, cfg.attempts_per_road,
                                    seeds, sim, road)
            per_road[str(road)] = {
                "successes": success_count(results),
                "n": len(results),
                "failures": [r.failure_reason for r in results if not r.success],
            }
        attempts[scenario.value] = per_road
    twi = {}
    for scenario in TWI_SCENARIOS:
        records = eval_twi(bundle, scenario, expert_cfg, cfg.twi_roads, sim)
        twi[scenario.value] = [
            {"road": r.road_seed, "twi": round(r.twi_seconds, 6),
             "course": round(r.course_time_seconds, 6)}
            for r in records
        ]
    return {"attempts": attempts, "twi": twi}


def run_experiment(cfg: ExperimentConfig, out_dir=None,
                   expert_cfg: ExpertConfig = ExpertConfig()) -> dict:
    """Warm start, iterate LfI-DAgger with evaluation after every iteration,
    persist checkpoints + record + metric tables; returns the record."""
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = Simulator(cfg.sim_params())

    store, bundle = run_hbc(
        expert_cfg, sim, episodes=cfg.hbc_episodes,
        augmentation=cfg.augment_config(), road_seeds=tuple(cfg.roads),
        base_seed=cfg.seed, train_cfg=cfg.train_config())

    record = {
        "version": RECORD_VERSION,
        "config": asdict(cfg),
        "iterations": [],
        "collisions_during_collection": 0,
    }

    def checkpoint_and_eval(iteration: int, collect_stats=None):
        ckpt = out / f"ckpt_{iteration:03d}.bin"
        digest = save_checkpoint(bundle, ckpt)
        entry = {
            "iteration": iteration,
            "checkpoint": ckpt.name,
            "checkpoint_hash": digest,
            "sizes": store.size_log[-1],
            "collect_stats": collect_stats,
        }
        entry.update(_evaluate(bundle, cfg, sim, expert_cfg))
        record["iterations"].append(entry)

    checkpoint_and_eval(0)
    dagger_cfg = cfg.dagger_config()
    for it in range(1, cfg.iterations + 1):
        _, _, reports = run_lfi_dagger(bundle, expert_cfg, sim, dagger_cfg,
                                       store=store, start_iteration=it)
        stats = reports[0]
        record["collisions_during_collection"] += stats["collisions"]
        checkpoint_and_eval(it, collect_stats=_clean_stats(stats))

    if cfg.baseline_vanilla:
        record["vanilla"] = _run_vanilla_arm(cfg, sim, expert_cfg, out)

    record["growth"] = growth_report(store.size_log)
    (out / "record.json").write_text(dump_record(record))
    (out / "tables.txt").write_text(metric_tables(record))
    return record


def _run_vanilla_arm(cfg: ExperimentConfig, sim: Simulator,
                     expert_cfg: ExpertConfig, out: Path) -> dict:
    store, bundle = run_hbc(
        expert_cfg, sim, episodes=cfg.hbc_episodes,
        augmentation=cfg.augment_config(), road_seeds=tuple(cfg.roads),
        base_seed=cfg.seed, train_cfg=cfg.train_config())
    arm = {"iterations": []}
    dagger_cfg = cfg.dagger_config()
    for it in range(1, cfg.iterations + 1):
        _, _, reports = run_vanilla_dagger(bundle, expert_cfg, sim, dagger_cfg,
                                           store=store, start_iteration=it)
        ckpt = out / f"vanilla_ckpt_{it:03d}.bin"
        digest = save_checkpoint(bundle, ckpt)
        entry = {"iteration": it, "checkpoint": ckpt.name,
                 "checkpoint_hash": digest, "sizes": store.size_log[-1]}
        entry.update(_evaluate(bundle, cfg, sim, expert_cfg))
        arm["iterations"].append(entry)
    return arm


def _clean_stats(stats: dict) -> dict:
    keep = ("iteration", "interventions", "backtrack_calls", "meta_mismatches",
            "episodes", "collisions", "off_path", "reasons")
    return {k: stats[k] for k in keep}


def dump_record(record: dict) -> str:
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def load_record(path) -> dict:
    return json.loads(Path(path).read_text())


def metric_tables(record: dict) -> str:
    """Aligned text tables for attempts, TWI, and dataset growth."""
    lines = []
    iterations = record["iterations"]
    its = [e["iteration"] for e in iterations]
    header = ["road"] + [f"it{i}" for i in its]

    lines.append("== successful attempts (out of %d) ==" %
                 record["config"]["attempts_per_road"])
    for scenario in ("confront", "cross"):
        lines.append(f"[{scenario}]")
        roads = sorted(iterations[0]["attempts"][scenario], key=int)
        rows = [[road] + [str(e["attempts"][scenario][road]["successes"])
                          for e in iterations] for road in roads]
        lines.extend(_align([header] + rows))

    lines.append("")
    lines.append("== time without intervention (seconds) ==")
    for scenario in ("path_follow", "ped_follow"):
        lines.append(f"[{scenario}]")
        n_roads = len(iterations[0]["twi"][scenario])
        rows = []
        for idx in range(n_roads):
            road = iterations[0]["twi"][scenario][idx]["road"]
            course = iterations[0]["twi"][scenario][idx]["course"]
            row = [f"{road} (course {course:.1f}s)"]
            row += [f"{e['twi'][scenario][idx]['twi']:.1f}" for e in iterations]
            rows.append(row)
        lines.extend(_align([header] + rows))

    lines.append("")
    lines.append("== dataset growth (new action samples per iteration) ==")
    growth = record.get("growth", {})
    grow_header = ["scenario"] + [f"it{i}" for i in its[1:]] + ["cumulative"]
    rows = []
    for scenario in ("path_follow", "confront", "ped_follow", "cross"):
        if scenario not in growth:
            continue
        g = growth[scenario]
        rows.append([scenario] + [str(v) for v in g["increments"]]
                    + [str(g["cumulative"])])
    lines.extend(_align([grow_header] + rows))
    lines.append("")
    lines.append("collisions during data collection: %d" %
                 record["collisions_during_collection"])
    return "\n".join(lines) + "\n"


def _align(rows: list) -> list:
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(rows[0]))]
    return ["  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in rows]


def replay_experiment(record_path) -> tuple[bool, str]:
    """Re-evaluate every persisted checkpoint on the recorded seeds.

    Returns (ok, message); ok means attempts and TWI reproduce exactly.
    """
    record = load_record(record_path)
    base = Path(record_path).parent
    cfg = ExperimentConfig(**{
        k: (tuple(tuple(x) if isinstance(x, list) else x for x in v)
            if k in _TUPLE_FIELDS else v)
        for k, v in record["config"].items()})
    sim = Simulator(cfg.sim_params())
    expert_cfg = ExpertConfig()
    for entry in record["iterations"]:
        bundle = load_checkpoint(base / entry["checkpoint"])
        fresh = _evaluate(bundle, cfg, sim, expert_cfg)
        if fresh["attempts"] != entry["attempts"] or fresh["twi"] != entry["twi"]:
            return False, f"iteration {entry['iteration']}: metrics diverge from record"
    return True, f"replayed {len(record['iterations'])} checkpoints, all metrics match"


def compare_schedules(cfg: ExperimentConfig, out_dir,
                      expert_cfg: ExpertConfig = ExpertConfig()) -> str:
    """Run the experiment once per backtrack schedule under identical seeds
    and emit a deterministic comparison table."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [["schedule", "interventions", "final D_g", "confront it%d" % cfg.iterations,
             "cross it%d" % cfg.iterations, "median TWI frac"]]
    for kind in ("linear", "log", "exp"):
        sub_cfg = replace(cfg, schedule=kind)
        record = run_experiment(sub_cfg, out / kind, expert_cfg)
        last = record["iterations"][-1]
        interventions = sum(e["collect_stats"]["interventions"]
                            for e in record["iterations"] if e["collect_stats"])
        final_dg = sum(last["sizes"]["actions"].values())
        confront = sum(v["successes"] for v in last["attempts"]["confront"].values())
        cross = sum(v["successes"] for v in last["attempts"]["cross"].values())
        fracs = []
        for scen in ("path_follow", "ped_follow"):
            for r in last["twi"][scen]:
                fracs.append(r["twi"] / r["course"] if r["course"] else 0.0)
        rows.append([kind, str(interventions), str(final_dg), str(confront),
                     str(cross), f"{median(fracs):.3f}"])
    table = "\n".join(_align(rows)) + "\n"
    (out / "schedule_comparison.txt").write_text(table)
    return table
