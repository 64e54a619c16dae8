"""Command-line tool: collect, train, dagger, eval, replay, serve."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .datasets import load_store, save_store
from .evalharness import eval_attempts, eval_twi, growth_report, success_count
from .expert import ExpertConfig
from .experiment import (
    ExperimentConfig,
    compare_schedules,
    load_experiment_config,
    load_record,
    metric_tables,
    replay_experiment,
    run_experiment,
)
from .imitation import run_hbc, train_bundle
from .policy import PolicyBundle, TrainConfig
from .sim.scenarios import SimParams, Simulator
from .sim.world import ScenarioId

_SCENARIOS = {s.value: s for s in ScenarioId}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pednav",
        description="pedestrian-navigation imitation learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="collect expert demonstrations to a dataset file")
    p.add_argument("--out", required=True)
    p.add_argument("--episodes", type=int, default=1,
                   help="expert episodes per (scenario, road)")
    p.add_argument("--roads", type=int, nargs="+", default=[0, 1, 2, 3])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-mirror", action="store_true")
    _sim_flags(p)

    p = sub.add_parser("train", help="train a policy bundle from a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--learning-rate", type=float, default=0.05)

    p = sub.add_parser("dagger", help="run the full experiment "
                                      "(warm start + DAgger iterations + evaluation)")
    p.add_argument("--config", help="experiment config file (JSON)")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--queue-len", type=int, default=None)
    p.add_argument("--backtrack", choices=["linear", "log", "exp"], default=None)
    p.add_argument("--resume-after-intervention", action="store_true")
    p.add_argument("--baseline", choices=["vanilla"], default=None)
    p.add_argument("--compare-schedules", action="store_true",
                   help="run all three backtrack schedules under identical seeds")

    p = sub.add_parser("eval", help="evaluate a checkpoint or a recorded experiment")
    p.add_argument("--protocol", choices=["attempts", "twi", "growth"], required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--record", help="record.json (required for growth)")
    p.add_argument("--scenario", choices=sorted(_SCENARIOS))
    p.add_argument("--roads", type=int, nargs="+", default=[0, 1, 2, 3])
    p.add_argument("--attempts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    _sim_flags(p)

    p = sub.add_parser("replay", help="re-evaluate a persisted experiment record")
    p.add_argument("--record", required=True)

    p = sub.add_parser("serve", help="serve a live intervention session")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenario", choices=sorted(_SCENARIOS), default="cross")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--road-seed", type=int, default=None)
    p.add_argument("--log", default=None, help="session log file")
    p.add_argument("--rate", type=float, default=10.0, help="tick rate in Hz")
    p.add_argument("--static-dir", default=None,
                   help="also serve the web console from this directory over HTTP")
    _sim_flags(p)
    return parser


def _sim_flags(p) -> None:
    p.add_argument("--raster-size", type=int, default=32)
    p.add_argument("--horizon", type=int, default=400)


def _sim_from(args) -> Simulator:
    return Simulator(SimParams(raster_size=args.raster_size, horizon=args.horizon))


def cmd_collect(args) -> int:
    from .imitation import AugmentConfig

    aug = AugmentConfig(mirror=not args.no_mirror)
    store, _ = run_hbc(ExpertConfig(), _sim_from(args), episodes=args.episodes,
                       augmentation=aug, road_seeds=tuple(args.roads),
                       base_seed=args.seed, train_cfg=TrainConfig(rng_seed=args.seed),
                       train=False)
    save_store(store, args.out)
    sizes = store.sizes()
    print(f"wrote {args.out}: {sizes['meta']} meta samples, "
          f"{sum(sizes['actions'].values())} action samples")
    return 0


def cmd_train(args) -> int:
    store = load_store(args.data)
    first = store.meta[0] if store.meta else next(
        s for g in ScenarioId for s in store.actions[g])
    cfg = TrainConfig(learning_rate=args.learning_rate, batch_size=args.batch_size,
                      epochs=args.epochs, rng_seed=args.seed)
    bundle = PolicyBundle(first.observation.dim, rng_seed=args.seed)
    reports = train_bundle(bundle, store, cfg, seed=args.seed)
    digest = save_checkpoint(bundle, args.out)
    for head, rep in reports.items():
        print(f"{head}: {rep.n_samples} samples, "
              f"loss {rep.epoch_losses[0]:.4f} -> {rep.epoch_losses[-1]:.4f}")
    print(f"wrote {args.out} ({digest[:12]})")
    return 0


def cmd_dagger(args) -> int:
    cfg = load_experiment_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.queue_len is not None:
        overrides["queue_len"] = args.queue_len
    if args.backtrack is not None:
        overrides["schedule"] = args.backtrack
    if args.resume_after_intervention:
        overrides["resume_after_intervention"] = True
    if args.baseline == "vanilla":
        overrides["baseline_vanilla"] = True
    if args.out is not None:
        overrides["out_dir"] = args.out
    cfg = replace(cfg, **overrides)
    if args.compare_schedules:
        print(compare_schedules(cfg, cfg.out_dir), end="")
        return 0
    record = run_experiment(cfg)
    print(metric_tables(record), end="")
    print(f"record: {Path(cfg.out_dir) / 'record.json'}")
    return 0


def cmd_eval(args) -> int:
    if args.protocol == "growth":
        if not args.record:
            print("growth protocol needs --record", file=sys.stderr)
            return 2
        record = load_record(args.record)
        print(json.dumps(record["growth"], indent=2, sort_keys=True))
        return 0
    if not args.checkpoint or not args.scenario:
        print("attempts/twi protocols need --checkpoint and --scenario", file=sys.stderr)
        return 2
    bundle = load_checkpoint(args.checkpoint)
    sim = _sim_from(args)
    scenario = _SCENARIOS[args.scenario]
    if args.protocol == "attempts":
        for road in args.roads:
            seeds = [args.seed * 1_000_003 + road * 10_007 + k
                     for k in range(args.attempts)]
            results = eval_attempts(bundle, scenario, args.attempts, seeds, sim, road)
            print(f"road {road}: {success_count(results)}/{len(results)} successes")
    else:
        records = eval_twi(bundle, scenario, ExpertConfig(), args.roads, sim)
        for r in records:
            print(f"road {r.road_seed}: TWI {r.twi_seconds:.1f}s "
                  f"(course {r.course_time_seconds:.1f}s)")
    return 0


def cmd_replay(args) -> int:
    ok, message = replay_experiment(args.record)
    print(message)
    return 0 if ok else 1


def cmd_serve(args) -> int:
    from .gateway import serve_session

    serve_session(
        checkpoint=args.checkpoint,
        scenario=_SCENARIOS[args.scenario],
        seed=args.seed,
        road_seed=args.road_seed,
        port=args.port,
        sim=_sim_from(args),
        log_path=args.log,
        tick_rate=args.rate,
        static_dir=args.static_dir,
    )
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "collect": cmd_collect,
        "train": cmd_train,
        "dagger": cmd_dagger,
        "eval": cmd_eval,
        "replay": cmd_replay,
        "serve": cmd_serve,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
