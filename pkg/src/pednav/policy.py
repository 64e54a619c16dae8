"""From-scratch differentiable policy: shared trunk, meta head, four sub-heads.

A single hidden layer (rectifier) maps the flattened observation to a hidden
vector; a 4-way meta head classifies the scenario and each scenario sub-head
emits a joint steering/speed distribution as two softmax groups. Training is
plain seeded mini-batch SGD on weighted soft-label cross-entropy, with the
backward pass written by hand and checked against finite differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sim.world import N_SPEED, N_STEER, Action, Observation, ScenarioId

SCENARIOS = tuple(ScenarioId)
SCENARIO_INDEX = {s: i for i, s in enumerate(SCENARIOS)}
N_SCENARIOS = len(SCENARIOS)

META_HEAD = "meta"


@dataclass(frozen=True)
class SoftTarget:
    steer_dist: np.ndarray
    speed_dist: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("weight must be non-negative")
        for name, vec, n in (("steer", self.steer_dist, N_STEER),
                             ("speed", self.speed_dist, N_SPEED)):
            if vec.shape != (n,):
                raise ValueError(f"{name} distribution must have length {n}")
            if abs(float(vec.sum()) - 1.0) > 1e-9 or np.any(vec < 0):
                raise ValueError(f"{name} distribution is not a probability vector")


@dataclass(frozen=True)
class LabeledSample:
    observation: Observation
    scenario: ScenarioId
    target: SoftTarget | None = None      # action target (D_g samples)
    meta_target: int | None = None        # scenario index (D_h samples)
    provenance: str = "expert"
    iteration: int = 0

    @property
    def is_meta(self) -> bool:
        return self.meta_target is not None


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 30
    soft_label_sigma: float = 0.5
    rng_seed: int = 0
    # optional second phase at a lower constant rate; without it the SGD
    # endpoint keeps bouncing and refits of near-identical datasets land on
    # policies with very different closed-loop behavior
    anneal_epochs: int = 0
    anneal_lr: float = 0.005

    def __post_init__(self):
        if self.learning_rate <= 0 or self.anneal_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.soft_label_sigma < 0:
            raise ValueError("soft_label_sigma must be non-negative")
        if self.anneal_epochs < 0:
            raise ValueError("anneal_epochs must be non-negative")


@dataclass
class TrainReport:
    head: str
    n_samples: int
    epoch_losses: list = field(default_factory=list)


def soft_label(action: Action, sigma: float = 0.5, speed_sigma: float = 0.0,
               weight: float = 1.0) -> SoftTarget:
    """Single-peak target distributions centered on the action's bins.

    sigma (in bins) controls the steering spread; sigma = 0 is one-hot.
    Speed bins are semantically disjoint so they default to one-hot.
    """
    return SoftTarget(
        steer_dist=discretized_gaussian(action.steer_bin, N_STEER, sigma),
        speed_dist=discretized_gaussian(action.speed_bin, N_SPEED, speed_sigma),
        weight=weight,
    )


def discretized_gaussian(center: float, n: int, sigma: float) -> np.ndarray:
    """Gaussian over bin indices, renormalized; sigma = 0 degenerates to one-hot."""
    if sigma <= 0:
        out = np.zeros(n)
        out[int(round(min(max(center, 0), n - 1)))] = 1.0
        return out
    idx = np.arange(n, dtype=float)
    logits = -((idx - center) ** 2) / (2.0 * sigma * sigma)
    w = np.exp(logits - logits.max())
    return w / w.sum()


class PolicyBundle:
    """Parameter container with value semantics (clone to copy)."""

    def __init__(self, in_dim: int, hidden: int = 128, rng_seed: int = 0):
        self.in_dim = in_dim
        self.hidden = hidden
        rng = np.random.Generator(np.random.PCG64(rng_seed))
        self.w_trunk = _uniform_init(rng, in_dim, hidden)
        self.b_trunk = np.zeros(hidden)
        self.w_meta = _uniform_init(rng, hidden, N_SCENARIOS)
        self.b_meta = np.zeros(N_SCENARIOS)
        self.w_sub = [_uniform_init(rng, hidden, N_STEER + N_SPEED)
                      for _ in range(N_SCENARIOS)]
        self.b_sub = [np.zeros(N_STEER + N_SPEED) for _ in range(N_SCENARIOS)]

    def clone(self) -> "PolicyBundle":
        out = object.__new__(PolicyBundle)
        out.in_dim = self.in_dim
        out.hidden = self.hidden
        out.w_trunk = self.w_trunk.copy()
        out.b_trunk = self.b_trunk.copy()
        out.w_meta = self.w_meta.copy()
        out.b_meta = self.b_meta.copy()
        out.w_sub = [w.copy() for w in self.w_sub]
        out.b_sub = [b.copy() for b in self.b_sub]
        return out

    def param_count(self) -> int:
        return sum(a.size for a in self._arrays())

    def _arrays(self) -> list:
        return [self.w_trunk, self.b_trunk, self.w_meta, self.b_meta,
                *self.w_sub, *self.b_sub]

    def allclose(self, other: "PolicyBundle") -> bool:
        return all(np.array_equal(a, b)
                   for a, b in zip(self._arrays(), other._arrays()))


def _uniform_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


# raster values live in [0, 1] with a large common-mode component (the goal
# field fills most cells); centering conditions the trunk's gradients
INPUT_SHIFT = 0.5


def _trunk_forward(bundle: PolicyBundle, x: np.ndarray) -> np.ndarray:
    return np.maximum((x - INPUT_SHIFT) @ bundle.w_trunk + bundle.b_trunk, 0.0)


def predict(bundle: PolicyBundle, obs: Observation):
    """One forward pass: scenario distribution and all four action heads."""
    x = obs.flat()
    if x.shape[0] != bundle.in_dim:
        raise ValueError(f"observation dim {x.shape[0]} != bundle dim {bundle.in_dim}")
    h = _trunk_forward(bundle, x[None, :])
    meta = _softmax(h @ bundle.w_meta + bundle.b_meta)[0]
    action_dists = []
    for g in range(N_SCENARIOS):
        logits = (h @ bundle.w_sub[g] + bundle.b_sub[g])[0]
        action_dists.append((_softmax(logits[:N_STEER]), _softmax(logits[N_STEER:])))
    return meta, action_dists


def act(bundle: PolicyBundle, obs: Observation) -> tuple[ScenarioId, Action]:
    """Greedy decode; argmax ties break toward the lower index."""
    meta, dists = predict(bundle, obs)
    g = int(np.argmax(meta))
    steer_dist, speed_dist = dists[g]
    return SCENARIOS[g], Action(int(np.argmax(steer_dist)), int(np.argmax(speed_dist)))


def _assemble(samples, head: str):
    if not samples:
        raise ValueError("cannot train on an empty dataset")
    xs = np.stack([s.observation.flat() for s in samples])
    if head == META_HEAD:
        if any(not s.is_meta for s in samples):
            raise ValueError("meta training requires meta-target samples")
        targets = np.zeros((len(samples), N_SCENARIOS))
        for i, s in enumerate(samples):
            targets[i, s.meta_target] = 1.0
        weights = np.ones(len(samples))
        return xs, (targets,), weights
    if any(s.target is None for s in samples):
        raise ValueError("action training requires action-target samples")
    steer = np.stack([s.target.steer_dist for s in samples])
    speed = np.stack([s.target.speed_dist for s in samples])
    weights = np.array([s.target.weight for s in samples])
    return xs, (steer, speed), weights


def _head_params(bundle: PolicyBundle, head):
    if head == META_HEAD:
        return bundle.w_meta, bundle.b_meta
    g = SCENARIO_INDEX[head] if isinstance(head, ScenarioId) else int(head)
    return bundle.w_sub[g], bundle.b_sub[g]


def _ce(targets: np.ndarray, log_q: np.ndarray) -> np.ndarray:
    # per-row cross-entropy; 0 * log q contributes exactly 0
    terms = np.where(targets > 0, targets * log_q, 0.0)
    return -terms.sum(axis=1)


def _batch_loss_grads(bundle: PolicyBundle, x, targets, weights, head,
                      compute_grads: bool = True):
    """Mean weighted cross-entropy over the batch and its parameter gradients."""
    n = x.shape[0]
    w_head, b_head = _head_params(bundle, head)
    x = x - INPUT_SHIFT
    pre = x @ bundle.w_trunk + bundle.b_trunk
    h = np.maximum(pre, 0.0)
    logits = h @ w_head + b_head
    if head == META_HEAD:
        (t_meta,) = targets
        log_q = _log_softmax(logits)
        loss = float((weights * _ce(t_meta, log_q)).sum() / n)
        if not compute_grads:
            return loss, None
        d_logits = weights[:, None] * (np.exp(log_q) - t_meta) / n
    else:
        t_steer, t_speed = targets
        log_qs = _log_softmax(logits[:, :N_STEER])
        log_qv = _log_softmax(logits[:, N_STEER:])
        loss = float((weights * (_ce(t_steer, log_qs) + _ce(t_speed, log_qv))).sum() / n)
        if not compute_grads:
            return loss, None
        d_logits = np.concatenate([
            weights[:, None] * (np.exp(log_qs) - t_steer),
            weights[:, None] * (np.exp(log_qv) - t_speed),
        ], axis=1) / n
    d_w_head = h.T @ d_logits
    d_b_head = d_logits.sum(axis=0)
    d_h = d_logits @ w_head.T
    d_h[pre <= 0] = 0.0
    d_w_trunk = x.T @ d_h
    d_b_trunk = d_h.sum(axis=0)
    return loss, (d_w_trunk, d_b_trunk, d_w_head, d_b_head)


def train(bundle: PolicyBundle, samples, head, config: TrainConfig) -> TrainReport:
    """Seeded mini-batch SGD on the chosen head (+ trunk), in place.

    Samples are consumed in the order given (no internal shuffle) so runs
    are replayable; shuffle upstream if the collection order is adversarial.
    """
    x, targets, weights = _assemble(samples, head)
    w_head, b_head = _head_params(bundle, head)
    report = TrainReport(head=str(head), n_samples=len(samples))
    n = x.shape[0]
    bs = config.batch_size
    for epoch in range(config.epochs):
        total = 0.0
        for start in range(0, n, bs):
            sl = slice(start, min(start + bs, n))
            loss, grads = _batch_loss_grads(
                bundle, x[sl], tuple(t[sl] for t in targets), weights[sl], head)
            if not math.isfinite(loss):
                raise ArithmeticError(
                    f"non-finite loss {loss} at epoch {epoch}, batch {start // bs}")
            d_w_trunk, d_b_trunk, d_w_head, d_b_head = grads
            lr = config.learning_rate
            bundle.w_trunk -= lr * d_w_trunk
            bundle.b_trunk -= lr * d_b_trunk
            w_head -= lr * d_w_head
            b_head -= lr * d_b_head
            total += loss * (sl.stop - sl.start)
        report.epoch_losses.append(total / n)
    return report


def sample_loss(bundle: PolicyBundle, sample: LabeledSample, head=None) -> float:
    """Weighted cross-entropy of one sample (the quantity gradient_check probes)."""
    if head is None:
        head = META_HEAD if sample.is_meta else sample.scenario
    x, targets, weights = _assemble([sample], head)
    loss, _ = _batch_loss_grads(bundle, x, targets, weights, head, compute_grads=False)
    return loss


def gradient_check(bundle: PolicyBundle, sample: LabeledSample, head=None,
                   n_coords: int = 24, h: float = 1e-5, rng_seed: int = 0,
                   grad_override=None) -> float:
    """Max relative error of analytic vs central-finite-difference gradients.

    Probes a random subset of coordinates of every parameter array the head
    updates. grad_override lets tests inject a faulty analytic gradient.
    """
    if head is None:
        head = META_HEAD if sample.is_meta else sample.scenario
    x, targets, weights = _assemble([sample], head)
    _, grads = _batch_loss_grads(bundle, x, targets, weights, head)
    if grad_override is not None:
        grads = grad_override(grads)
    w_head, b_head = _head_params(bundle, head)
    arrays = [bundle.w_trunk, bundle.b_trunk, w_head, b_head]
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    worst = 0.0
    for arr, grad in zip(arrays, grads):
        flat = arr.reshape(-1)
        g = grad.reshape(-1)
        count = min(n_coords, flat.size)
        coords = rng.choice(flat.size, size=count, replace=False)
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            lo_p, _ = _batch_loss_grads(bundle, x, targets, weights, head,
                                        compute_grads=False)
            flat[c] = orig - h
            lo_m, _ = _batch_loss_grads(bundle, x, targets, weights, head,
                                        compute_grads=False)
            flat[c] = orig
            numeric = (lo_p - lo_m) / (2.0 * h)
            denom = max(abs(g[c]), abs(numeric))
            if denom < 1e-10:
                continue
            worst = max(worst, abs(g[c] - numeric) / denom)
    return worst
