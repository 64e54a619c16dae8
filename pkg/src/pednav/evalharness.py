"""Evaluation protocols: successful attempts, time-without-intervention, growth.

All protocols run the policy fully autonomously and never mutate datasets or
parameters; the intervention detector only ever scores passively here.
"""
from __future__ import annotations

from dataclasses import dataclass

from .expert import ExpertConfig, InterventionMonitor
from .imitation import bundle_policy, oracle_policy
from .sim.scenarios import Simulator
from .sim.sensor import observe
from .sim.world import EventKind, ScenarioId, World, pedestrian_in_corridor

ATTEMPT_SCENARIOS = (ScenarioId.CONFRONT, ScenarioId.CROSS)
TWI_SCENARIOS = (ScenarioId.PATH_FOLLOW, ScenarioId.PED_FOLLOW)

# corridor used to score a Cross yield: pedestrian inside the forward strip,
# robot commanding zero speed for a sustained stretch (a momentary stop from
# a flailing policy is not a yield)
YIELD_AHEAD = 4.5
YIELD_HALF_WIDTH = 0.9
YIELD_MIN_STEPS = 5


@dataclass(frozen=True)
class AttemptResult:
    scenario: ScenarioId
    seed: int
    road_seed: int
    success: bool
    failure_reason: str | None = None

    def __post_init__(self):
        if self.success == (self.failure_reason is not None):
            raise ValueError("exactly one of success/failure_reason must hold")


@dataclass(frozen=True)
class TwiRecord:
    scenario: ScenarioId
    road_seed: int
    twi_seconds: float
    course_time_seconds: float


def classify_attempt(scenario: ScenarioId, collided: bool, off_path: bool,
                     goal: bool, yielded: bool) -> tuple[bool, str | None]:
    """Success rule as a pure function of the episode's event trace.

    Confront succeeds by reaching the goal cleanly; Cross succeeds by a
    sustained yield with no collision. Timeout covers every other end.
    """
    if scenario is ScenarioId.CONFRONT:
        success = goal and not collided and not off_path
    elif scenario is ScenarioId.CROSS:
        success = yielded and not collided
    else:
        raise ValueError(f"no attempt rule for {scenario}")
    if success:
        return True, None
    return False, "collision" if collided else ("off_path" if off_path else "timeout")


def _rollout_attempt(policy, world: World) -> AttemptResult:
    cfg = world.config
    collided = False
    off_path = False
    goal = False
    yielded = False
    stop_streak = 0
    while not world.terminated:
        obs = observe(world)
        _, action = policy(world, obs)
        if (action.speed_bin == 0
                and pedestrian_in_corridor(world, YIELD_AHEAD, YIELD_HALF_WIDTH)):
            stop_streak += 1
            if stop_streak >= YIELD_MIN_STEPS:
                yielded = True
        else:
            stop_streak = 0
        out = world.step(action)
        collided = collided or EventKind.COLLISION in out.events
        off_path = off_path or EventKind.OFF_PATH in out.events
        goal = goal or EventKind.GOAL_REACHED in out.events
    success, reason = classify_attempt(cfg.scenario, collided, off_path, goal, yielded)
    return AttemptResult(cfg.scenario, cfg.rng_seed, 0, success, reason)


def eval_attempts(bundle, scenario: ScenarioId, n_attempts: int, seeds,
                  sim: Simulator, road_seed: int,
                  policy=None) -> list[AttemptResult]:
    """Seeded autonomous attempts on one road; success per the scenario's rule."""
    if scenario not in ATTEMPT_SCENARIOS:
        raise ValueError(f"attempt protocol applies to {ATTEMPT_SCENARIOS}, "
                         f"not {scenario}")
    if n_attempts < 1:
        raise ValueError("n_attempts must be at least 1")
    seeds = list(seeds)[:n_attempts]
    if len(seeds) < n_attempts:
        raise ValueError("not enough seeds for the requested attempts")
    act_fn = policy or bundle_policy(bundle)
    results = []
    for seed in seeds:
        world = sim.spawn(scenario, seed, road_seed=road_seed)
        res = _rollout_attempt(act_fn, world)
        results.append(AttemptResult(res.scenario, seed, road_seed,
                                     res.success, res.failure_reason))
    return results


def eval_twi(bundle, scenario: ScenarioId, expert_cfg: ExpertConfig, road_seeds,
             sim: Simulator, policy=None) -> list[TwiRecord]:
    """Time without intervention per road, with the detector scoring passively.

    course_time comes from an oracle run of the same seeded course.
    """
    if scenario not in TWI_SCENARIOS:
        raise ValueError(f"TWI protocol applies to {TWI_SCENARIOS}, not {scenario}")
    act_fn = policy or bundle_policy(bundle)
    oracle_fn = oracle_policy(expert_cfg)
    records = []
    for road in road_seeds:
        course_steps = _run_until_done(oracle_fn, sim.spawn(scenario, road, road_seed=road),
                                       expert_cfg, passive_monitor=False)
        twi_steps = _run_until_done(act_fn, sim.spawn(scenario, road, road_seed=road),
                                    expert_cfg, passive_monitor=True)
        dt = sim.params.time_step
        records.append(TwiRecord(scenario, road, twi_steps * dt, course_steps * dt))
    return records


def _run_until_done(policy, world: World, expert_cfg: ExpertConfig,
                    passive_monitor: bool) -> int:
    monitor = InterventionMonitor(expert_cfg) if passive_monitor else None
    steps = 0
    while not world.terminated:
        obs = observe(world)
        _, action = policy(world, obs)
        if monitor is not None:
            verdict = monitor.check(world, action)
            if verdict.intervene:
                return steps
        world.step(action)
        steps += 1
    return steps


def growth_report(size_log: list) -> dict:
    """Per-scenario increment series and convergence flags from a size log.

    Convergence at an iteration means the increment fell below 5% of the
    cumulative size at that point.
    """
    if len(size_log) < 2:
        raise ValueError("growth report needs at least two size snapshots")
    report = {}
    scenarios = size_log[0]["actions"].keys()
    for name in scenarios:
        increments = []
        converged_at = None
        for prev, cur in zip(size_log, size_log[1:]):
            inc = cur["actions"][name] - prev["actions"][name]
            increments.append(inc)
            cum = cur["actions"][name]
            if converged_at is None and cum > 0 and inc < 0.05 * cum:
                converged_at = cur["iteration"]
            if converged_at is None and cum == 0:
                converged_at = cur["iteration"]
        report[name] = {"increments": increments, "converged_at": converged_at,
                        "cumulative": size_log[-1]["actions"][name]}
    report["meta"] = {
        "increments": [cur["meta"] - prev["meta"]
                       for prev, cur in zip(size_log, size_log[1:])],
        "cumulative": size_log[-1]["meta"],
    }
    return report


def success_count(results: list) -> int:
    return sum(1 for r in results if r.success)


def median(values: list) -> float:
    vals = sorted(values)
    n = len(vals)
    if n == 0:
        raise ValueError("median of empty list")
    mid = n // 2
    if n % 2:
        return float(vals[mid])
    return (vals[mid - 1] + vals[mid]) / 2.0
