"""Hierarchical behavior cloning, vanilla DAgger, and learn-from-intervention DAgger.

The intervention variant keeps a fixed-length trace queue of the learner's
recent (state, action) pairs; when the expert seizes control, a backtrack
function relabels those states with a schedule-weighted mixture of the
learner's and expert's targets and scales each sample's loss by the size of
the intervention-time error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import policy as pol
from .expert import (
    ExpertConfig,
    InterventionMonitor,
    expert_action,
    meta_label,
    raw_trigger,
)
from .policy import (
    LabeledSample,
    PolicyBundle,
    SoftTarget,
    TrainConfig,
    discretized_gaussian,
    soft_label,
)
from .sim.scenarios import Simulator
from .sim.sensor import observe, virtual_offset_observe
from .sim.world import (
    N_STEER,
    Action,
    EventKind,
    Observation,
    Pose,
    ScenarioId,
    World,
    mirror_observation,
)

PROV_EXPERT = "expert"
PROV_BACKTRACK = "learner-backtracked"
PROV_AUGMENTED = "augmented"


@dataclass(frozen=True)
class TraceEntry:
    observation: Observation
    action: Action
    step_index: int


class TraceQueue:
    """FIFO of the last <= capacity (state, action) pairs, oldest first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("queue capacity must be at least 1")
        self.capacity = capacity
        self._items: list[TraceEntry] = []

    def append(self, entry: TraceEntry) -> None:
        if len(self._items) >= self.capacity:
            self.pop()
        self._items.append(entry)

    def pop(self) -> TraceEntry:
        if not self._items:
            raise IndexError("pop from an empty trace queue")
        return self._items.pop(0)

    def clear(self) -> None:
        self._items.clear()

    def entries(self) -> list[TraceEntry]:
        return list(self._items)

    def __len__(self) -> int:
        return len(self._items)


@dataclass(frozen=True)
class BacktrackSchedule:
    """Decaying relabel weight over steps before an intervention.

    weight(0) = 1, non-increasing, in [0, 1], and 0 from the horizon on.
    """

    kind: str = "linear"          # linear | log | exp
    horizon: int = 50

    def __post_init__(self):
        if self.kind not in ("linear", "log", "exp"):
            raise ValueError(f"unknown backtrack schedule kind {self.kind!r}")
        if self.horizon < 1:
            raise ValueError("schedule horizon must be at least 1")

    def weight(self, k: int) -> float:
        if k < 0:
            raise ValueError("k must be non-negative")
        length = self.horizon
        if k >= length:
            return 0.0
        if self.kind == "linear":
            return 1.0 - k / length
        if self.kind == "log":
            return 1.0 - math.log1p(k) / math.log1p(length)
        return math.exp(-3.0 * k / length)


@dataclass(frozen=True)
class AugmentConfig:
    mirror: bool = True
    mirror_jitter_std: float = 0.25   # bins, on the reflected steer center
    virtual_offsets: tuple = ((0.6, 0.0), (-0.6, 0.0))
    # The expert's decisions never depend on the robot's current speed, but
    # most stop-labeled demo frames have speed 0 (the robot is already
    # stopped), which teaches a "keep doing what you're doing" shortcut that
    # collides in closed loop. Randomizing the speed scalar in demo samples
    # encodes the invariance and kills the shortcut.
    randomize_speed_scalar: bool = True

    @property
    def multiplier(self) -> int:
        base = 1 + len(self.virtual_offsets)
        return base * 2 if self.mirror else base


NO_AUGMENT = AugmentConfig(mirror=False, virtual_offsets=(),
                           randomize_speed_scalar=False)


class DatasetStore:
    """Append-only D_h / per-scenario D_g buffers with an iteration size log."""

    def __init__(self):
        self.meta: list[LabeledSample] = []
        self.actions: dict[ScenarioId, list[LabeledSample]] = {
            s: [] for s in ScenarioId}
        self.size_log: list[dict] = []

    def append_meta(self, sample: LabeledSample) -> None:
        if not sample.is_meta:
            raise ValueError("meta buffer takes meta-target samples")
        self.meta.append(sample)

    def append_action(self, sample: LabeledSample) -> None:
        if sample.target is None:
            raise ValueError("action buffer takes action-target samples")
        self.actions[sample.scenario].append(sample)

    def sizes(self) -> dict:
        return {
            "meta": len(self.meta),
            "actions": {s.value: len(self.actions[s]) for s in ScenarioId},
        }

    def log_sizes(self, iteration: int) -> dict:
        snap = {"iteration": iteration, **self.sizes()}
        self.size_log.append(snap)
        return snap

    def increments(self) -> list[dict]:
        """Per-iteration growth between consecutive size-log snapshots."""
        out = []
        for prev, cur in zip(self.size_log, self.size_log[1:]):
            out.append({
                "iteration": cur["iteration"],
                "meta": cur["meta"] - prev["meta"],
                "actions": {k: cur["actions"][k] - prev["actions"][k]
                            for k in cur["actions"]},
            })
        return out


def mirror_augment(sample: LabeledSample, jitter_std: float = 0.0,
                   sigma: float = 0.5, rng: np.random.Generator | None = None) -> LabeledSample:
    """Horizontal flip: mirrored observation, steer target reflected about center.

    With jitter_std > 0 the reflected steer center gets zero-mean Gaussian
    noise and is re-discretized at the given sigma; with zero jitter the
    distribution is index-reversed exactly, making the op an involution.
    """
    if sample.target is None:
        raise ValueError("mirror_augment applies to action-target samples")
    if jitter_std > 0:
        if rng is None:
            raise ValueError("jitter requires an rng")
        center = (N_STEER - 1) - int(np.argmax(sample.target.steer_dist))
        center += float(rng.normal(0.0, jitter_std))
        steer = discretized_gaussian(center, N_STEER, sigma)
    else:
        steer = sample.target.steer_dist[::-1].copy()
    return LabeledSample(
        observation=mirror_observation(sample.observation),
        scenario=sample.scenario,
        target=SoftTarget(steer_dist=steer,
                          speed_dist=sample.target.speed_dist.copy(),
                          weight=sample.target.weight),
        provenance=PROV_AUGMENTED,
        iteration=sample.iteration,
    )


def backtrack(queue: TraceQueue, expert_act: Action, learner_action_at_t: Action,
              schedule: BacktrackSchedule, scenario: ScenarioId | None = None,
              sigma: float = 0.5, w_floor: float = 0.05,
              iteration: int = 0) -> list[LabeledSample]:
    """Relabel the queued pre-intervention trace.

    The newest entry must be the intervention step. The entry k steps before
    it gets target (1-w_k) * soft(learner's recorded action) + w_k *
    soft(expert action) and loss weight e * max(w_k, w_floor), where e is the
    normalized bin distance between the learner's and expert's action at the
    intervention step. Zero error means every emitted weight is zero.
    """
    entries = queue.entries()
    if not entries:
        raise ValueError("backtrack on an empty trace queue")
    e_steer = abs(learner_action_at_t.steer_bin - expert_act.steer_bin) / (N_STEER - 1)
    e_speed = abs(learner_action_at_t.speed_bin - expert_act.speed_bin) / (pol.N_SPEED - 1)
    error = (e_steer + e_speed) / 2.0
    expert_target = soft_label(expert_act, sigma)
    out = []
    horizon = schedule.horizon
    for k, entry in enumerate(reversed(entries)):
        if k >= horizon:
            break
        w = schedule.weight(k)
        learner_target = soft_label(entry.action, sigma)
        steer = (1.0 - w) * learner_target.steer_dist + w * expert_target.steer_dist
        speed = (1.0 - w) * learner_target.speed_dist + w * expert_target.speed_dist
        target = SoftTarget(steer_dist=steer, speed_dist=speed,
                            weight=error * max(w, w_floor))
        out.append(LabeledSample(
            observation=entry.observation,
            scenario=scenario if scenario is not None else ScenarioId.PATH_FOLLOW,
            target=target,
            provenance=PROV_BACKTRACK,
            iteration=iteration,
        ))
    return out


@dataclass(frozen=True)
class DaggerConfig:
    iterations: int = 5
    episodes_per_iteration: int = 1      # per (scenario, road)
    queue_len: int = 50
    schedule: BacktrackSchedule = BacktrackSchedule("linear", 50)
    resume_after_intervention: bool = False
    augmentation: AugmentConfig = AugmentConfig()
    road_seeds: tuple = (0, 1, 2, 3)
    base_seed: int = 1000
    train: TrainConfig = TrainConfig()
    w_floor: float = 0.05
    max_recovery_steps: int = 100
    fresh_fit: bool = True   # refit the aggregate from scratch each iteration

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.queue_len < 1:
            raise ValueError("queue length must be at least 1")


def _episode_seed(base: int, iteration: int, scenario: ScenarioId,
                  road_seed: int, episode: int) -> int:
    idx = pol.SCENARIO_INDEX[scenario]
    return int(np.random.SeedSequence(
        [base, iteration, idx, road_seed, episode]).generate_state(1)[0])


def bundle_policy(bundle: PolicyBundle):
    """Rollout adapter: the learned policy, acting from observations only."""
    def act_fn(world: World, obs: Observation):
        return pol.act(bundle, obs)
    return act_fn


def oracle_policy(expert_cfg: ExpertConfig):
    """Rollout adapter: the scripted expert standing in as the learner."""
    def act_fn(world: World, obs: Observation):
        g = meta_label(world, expert_cfg)
        return g, expert_action(world, g, expert_cfg)
    return act_fn


def _expert_samples_at(world: World, expert_cfg: ExpertConfig, sigma: float,
                       augmentation: AugmentConfig, rng: np.random.Generator,
                       iteration: int = 0):
    """Meta sample plus (possibly augmented) action samples for the current state."""
    obs = observe(world)
    g = meta_label(world, expert_cfg)
    a = expert_action(world, g, expert_cfg)
    meta_obs = obs
    if augmentation.randomize_speed_scalar:
        meta_obs = _with_random_speed(obs, rng)
    meta = LabeledSample(meta_obs, g, meta_target=pol.SCENARIO_INDEX[g],
                         provenance=PROV_EXPERT, iteration=iteration)
    action_samples = [LabeledSample(meta_obs, g, target=soft_label(a, sigma),
                                    provenance=PROV_EXPERT, iteration=iteration)]
    for lat, head in augmentation.virtual_offsets:
        obs_v = virtual_offset_observe(world, lat, head)
        if augmentation.randomize_speed_scalar:
            obs_v = _with_random_speed(obs_v, rng)
        with _displaced_robot(world, lat, head):
            g_v = meta_label(world, expert_cfg)
            a_v = expert_action(world, g_v, expert_cfg)
        action_samples.append(LabeledSample(
            obs_v, g_v, target=soft_label(a_v, sigma),
            provenance=PROV_AUGMENTED, iteration=iteration))
    if augmentation.mirror:
        action_samples += [
            mirror_augment(s, augmentation.mirror_jitter_std, sigma, rng)
            for s in list(action_samples)]
    return meta, action_samples, g, a


def _with_random_speed(obs: Observation, rng: np.random.Generator) -> Observation:
    scalars = obs.scalars.copy()
    scalars[2] = rng.uniform(0.0, 1.0)
    return Observation(raster=obs.raster, scalars=scalars)


class _displaced_robot:
    """Temporarily shift the robot pose to evaluate the expert at a virtual view."""

    def __init__(self, world: World, lateral: float, heading: float):
        self.world = world
        self.lateral = lateral
        self.heading = heading

    def __enter__(self):
        r = self.world.robot
        self._saved = r
        self.world.robot = Pose(
            r.x - self.lateral * math.sin(r.heading),
            r.y + self.lateral * math.cos(r.heading),
            r.heading + self.heading,
        )
        return self.world

    def __exit__(self, *exc):
        self.world.robot = self._saved
        return False


def train_bundle(bundle: PolicyBundle, store: DatasetStore, cfg: TrainConfig,
                 seed: int, fresh_init: bool = False) -> dict:
    """Train every non-empty head for cfg.epochs, one epoch per head per round.

    The trunk is shared, so a long uninterrupted block for one head drags it
    away from the others; interleaving keeps all heads adapted to the trunk
    they will actually run on. Each head's epoch sees a fresh seeded shuffle.

    fresh_init refits from the warm-start initialization instead of
    continuing from the current parameters; successive refits of a growing
    aggregate are far more stable than compounding SGD passes.
    """
    if fresh_init:
        pristine = PolicyBundle(bundle.in_dim, bundle.hidden,
                                rng_seed=cfg.rng_seed)
        bundle.w_trunk[:] = pristine.w_trunk
        bundle.b_trunk[:] = pristine.b_trunk
        bundle.w_meta[:] = pristine.w_meta
        bundle.b_meta[:] = pristine.b_meta
        for g in range(len(bundle.w_sub)):
            bundle.w_sub[g][:] = pristine.w_sub[g]
            bundle.b_sub[g][:] = pristine.b_sub[g]
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x7A])))
    heads = []
    if store.meta:
        heads.append((pol.META_HEAD, "meta", store.meta))
    heads += [(g, g.value, store.actions[g]) for g in ScenarioId if store.actions[g]]
    reports = {name: pol.TrainReport(head=name, n_samples=len(buf))
               for _, name, buf in heads}
    phases = [(cfg.epochs, cfg.learning_rate)]
    if cfg.anneal_epochs:
        phases.append((cfg.anneal_epochs, cfg.anneal_lr))
    for epochs, lr in phases:
        one_epoch = replace(cfg, epochs=1, learning_rate=lr)
        for _ in range(epochs):
            for head, name, buf in heads:
                order = rng.permutation(len(buf))
                rep = pol.train(bundle, [buf[i] for i in order], head, one_epoch)
                reports[name].epoch_losses.extend(rep.epoch_losses)
    return reports


def run_hbc(expert_cfg: ExpertConfig, sim: Simulator, episodes: int = 1,
            augmentation: AugmentConfig = AugmentConfig(),
            road_seeds: tuple = (0, 1, 2, 3), base_seed: int = 500,
            train_cfg: TrainConfig = TrainConfig(),
            store: DatasetStore | None = None,
            train: bool = True) -> tuple[DatasetStore, PolicyBundle]:
    """Hierarchical behavior cloning: expert rollouts, then train both levels.

    episodes counts expert rollouts per (scenario, road) pair; scenarios are
    cycled round-robin within each road.
    """
    if store is None:
        store = DatasetStore()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([base_seed, 0xA6])))
    in_dim = None
    for road in road_seeds:
        for scenario in ScenarioId:
            for ep in range(episodes):
                seed = _episode_seed(base_seed, 0, scenario, road, ep)
                world = sim.spawn(scenario, seed, road_seed=road)
                while not world.terminated:
                    meta, action_samples, _, a = _expert_samples_at(
                        world, expert_cfg, train_cfg.soft_label_sigma,
                        augmentation, rng)
                    store.append_meta(meta)
                    for s in action_samples:
                        store.append_action(s)
                    if in_dim is None:
                        in_dim = meta.observation.dim
                    world.step(a)
    store.log_sizes(0)
    bundle = PolicyBundle(in_dim, rng_seed=train_cfg.rng_seed)
    if train:
        empty = [g.value for g in ScenarioId if not store.actions[g]]
        if empty:
            raise RuntimeError(f"behavior cloning collected no samples for: {empty}")
        train_bundle(bundle, store, train_cfg, seed=train_cfg.rng_seed)
    return store, bundle


def run_vanilla_dagger(bundle: PolicyBundle, expert_cfg: ExpertConfig,
                       sim: Simulator, config: DaggerConfig,
                       store: DatasetStore | None = None,
                       policy=None, start_iteration: int = 1
                       ) -> tuple[DatasetStore, PolicyBundle, list]:
    """Baseline DAgger: learner rollouts, every state labeled by the expert.

    The simulator tolerates unsafe rollouts, so no intervention machinery is
    involved; datasets aggregate across iterations and both levels retrain
    after each one.
    """
    if store is None:
        store = DatasetStore()
        store.log_sizes(start_iteration - 1)
    reports = []
    for it in range(start_iteration, start_iteration + config.iterations):
        act_fn = policy or bundle_policy(bundle)
        events: dict = {"collision": 0, "off_path": 0}
        for road in config.road_seeds:
            for scenario in ScenarioId:
                for ep in range(config.episodes_per_iteration):
                    seed = _episode_seed(config.base_seed, it, scenario, road, ep)
                    world = sim.spawn(scenario, seed, road_seed=road)
                    while not world.terminated:
                        obs = observe(world)
                        g_star = meta_label(world, expert_cfg)
                        a_star = expert_action(world, g_star, expert_cfg)
                        store.append_meta(LabeledSample(
                            obs, g_star, meta_target=pol.SCENARIO_INDEX[g_star],
                            provenance=PROV_EXPERT, iteration=it))
                        store.append_action(LabeledSample(
                            obs, g_star, target=soft_label(
                                a_star, config.train.soft_label_sigma),
                            provenance=PROV_EXPERT, iteration=it))
                        _, a_learner = act_fn(world, obs)
                        out = world.step(a_learner)
                        if EventKind.COLLISION in out.events:
                            events["collision"] += 1
                        if EventKind.OFF_PATH in out.events:
                            events["off_path"] += 1
        snap = store.log_sizes(it)
        if bundle is not None:
            train_bundle(bundle, store, config.train,
                         seed=_train_seed(config.base_seed, it),
                         fresh_init=config.fresh_fit)
        reports.append({"iteration": it, "sizes": snap, "events": events})
    return store, bundle, reports


def _train_seed(base: int, iteration: int) -> int:
    return int(np.random.SeedSequence([base, iteration, 0x7E]).generate_state(1)[0])


def run_lfi_dagger(bundle: PolicyBundle, expert_cfg: ExpertConfig, sim: Simulator,
                   config: DaggerConfig, store: DatasetStore | None = None,
                   policy=None, start_iteration: int = 1
                   ) -> tuple[DatasetStore, PolicyBundle, list]:
    """Hierarchical learn-from-intervention DAgger.

    Per episode the learner drives while its meta decision matches the
    oracle's; the detector (with reaction delay) hands control to the expert
    on impending mistakes, at which point the trace queue is backtracked into
    weighted training samples. On a meta mismatch the expert's action is
    executed and the state goes to the meta buffer. After each iteration both
    levels retrain on the aggregated datasets.
    """
    if store is None:
        store = DatasetStore()
        store.log_sizes(start_iteration - 1)
    reports = []
    for it in range(start_iteration, start_iteration + config.iterations):
        act_fn = policy or bundle_policy(bundle)
        stats = {
            "iteration": it,
            "interventions": 0,
            "backtrack_calls": 0,
            "meta_mismatches": 0,
            "episodes": 0,
            "collisions": 0,
            "off_path": 0,
            "reasons": {},
        }
        for road in config.road_seeds:
            for scenario in ScenarioId:
                for ep in range(config.episodes_per_iteration):
                    seed = _episode_seed(config.base_seed, it, scenario, road, ep)
                    _lfi_episode(bundle, expert_cfg, sim, config, store, act_fn,
                                 scenario, seed, road, it, stats)
        snap = store.log_sizes(it)
        stats["sizes"] = snap
        if bundle is not None:
            train_bundle(bundle, store, config.train,
                         seed=_train_seed(config.base_seed, it),
                         fresh_init=config.fresh_fit)
        reports.append(stats)
    return store, bundle, reports


def _lfi_episode(bundle, expert_cfg, sim, config, store, act_fn, scenario,
                 seed, road, iteration, stats) -> int:
    world = sim.spawn(scenario, seed, road_seed=road)
    queue = TraceQueue(config.queue_len)
    monitor = InterventionMonitor(expert_cfg)
    interventions = 0
    stats["episodes"] += 1
    while not world.terminated:
        obs = observe(world)
        g_star = meta_label(world, expert_cfg)
        g_hat, a_learner = act_fn(world, obs)
        if g_hat is not g_star:
            # the mislabeled state trains the meta level; the expert's
            # intervention judgment below stays active regardless
            stats["meta_mismatches"] += 1
            store.append_meta(LabeledSample(
                obs, g_star, meta_target=pol.SCENARIO_INDEX[g_star],
                provenance=PROV_EXPERT, iteration=iteration))
        a_expert = expert_action(world, g_star, expert_cfg)
        verdict = monitor.check(world, a_learner, expert_act=a_expert)
        if not verdict.intervene:
            t_idx = world.t
            out = world.step(a_learner)
            _count_events(out, stats)
            queue.append(TraceEntry(obs, a_learner, t_idx))
            continue
        # intervention: the expert's action is the correction at this step
        interventions += 1
        stats["interventions"] += 1
        reason = verdict.reason.value
        stats["reasons"][reason] = stats["reasons"].get(reason, 0) + 1
        queue.append(TraceEntry(obs, a_learner, world.t))
        samples = backtrack(queue, a_expert, a_learner, config.schedule,
                            scenario=g_star, sigma=config.train.soft_label_sigma,
                            w_floor=config.w_floor, iteration=iteration)
        stats["backtrack_calls"] += 1
        for s in samples:
            store.append_action(s)
        out = world.step(a_expert)
        _count_events(out, stats)
        if not config.resume_after_intervention:
            break
        queue.clear()
        monitor.reset()
        # the correction is the whole maneuver: control returns once the
        # learner's own next action stays clear under a widened horizon
        # (an expert stop always looks quiet, and a single-step handback
        # lets a bad learner re-aim at the hazard until margins are gone)
        relaxed = replace(expert_cfg, collision_ttc=2.0 * expert_cfg.collision_ttc)
        recovery = 0
        while not world.terminated and recovery < config.max_recovery_steps:
            _, a_next = act_fn(world, observe(world))
            if not raw_trigger(world, a_next, [], relaxed).intervene:
                break
            g_now = meta_label(world, expert_cfg)
            out = world.step(expert_action(world, g_now, expert_cfg))
            _count_events(out, stats)
            recovery += 1
    return interventions


def _count_events(outcome, stats) -> None:
    if EventKind.COLLISION in outcome.events:
        stats["collisions"] += 1
    if EventKind.OFF_PATH in outcome.events:
        stats["off_path"] += 1
