"""Planner policy: state features, masked softmax, KL alignment training.

The policy is linear: one weight row per action over a fixed feature layout
(bias, revealed-action flags, current diagnoser posterior, last outcome).
Training aligns the policy with a per-step target distribution over feasible
actions by plain gradient descent on the KL divergence; targets come from
the softmax-of-gain rule, from the exact trajectory marginal, or from a
coarse argmax-flip surrogate used by the ablation.
"""

from __future__ import annotations

import functools
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .diagnoser import DiagnoserModel, decide, log_posterior, posterior
from .errors import DivergedLoss, NoFeasibleAction, SupportMismatch
from .numerics import softmax
from .trajectory import (
    ActionDistribution,
    action_posterior,
    feasible_actions,
    marginal_action_posterior,
    trajectory_posterior,
)
from .world import PatientCase, PatientState, initial_state, update_state

TARGET_STEPWISE_IG = "stepwise_ig"
TARGET_EXACT_MARGINAL = "exact_marginal"
TARGET_GREEDY_LABEL = "greedy_label"
TARGET_SOURCES = (TARGET_STEPWISE_IG, TARGET_EXACT_MARGINAL, TARGET_GREEDY_LABEL)

ROLLOUT_TEACHER = "teacher"
ROLLOUT_ON_POLICY = "on_policy"


@dataclass(frozen=True)
class FeatureVector:
    """[bias] + [done-action flags] + [disease posterior] + [last outcome one-hot]."""

    values: np.ndarray

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class PolicyParams:
    """Weight matrix (num_actions x feature dim) plus training metadata."""

    weights: np.ndarray
    action_names: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.weights.copy(), self.action_names, dict(self.meta))


@dataclass(frozen=True)
class SupervisionTarget:
    """One training item: a state and the target action distribution there."""

    state: PatientState
    target: ActionDistribution
    source: str


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.1
    epochs: int = 20
    target_source: str = TARGET_STEPWISE_IG
    tau: float = 1.0
    beta: float = 1.0
    theta_stop: float = 0.9
    t_max: int = 3
    seed: int = 0
    rollout: str = ROLLOUT_TEACHER

    def to_dict(self) -> dict:
        return {
            "lr": self.lr, "epochs": self.epochs, "target_source": self.target_source,
            "tau": self.tau, "beta": self.beta, "theta_stop": self.theta_stop,
            "t_max": self.t_max, "seed": self.seed, "rollout": self.rollout,
        }


@functools.lru_cache(maxsize=64)
def feature_layout(model: DiagnoserModel) -> dict:
    """Block offsets of the feature vector implied by a model's shape."""
    num_actions = len(model.action_names)
    num_diseases = model.num_diseases
    outcome_offsets = {}
    offset = 1 + num_actions + num_diseases
    for a in model.action_names:
        outcome_offsets[a] = offset
        offset += len(model.outcome_alphabets[a])
    return {
        "dim": offset,
        "done_offset": 1,
        "posterior_offset": 1 + num_actions,
        "outcome_offsets": outcome_offsets,
    }


def feature_dim(model: DiagnoserModel) -> int:
    return feature_layout(model)["dim"]


@functools.lru_cache(maxsize=1 << 16)
def featurize(state: PatientState, model: DiagnoserModel) -> FeatureVector:
    """Deterministic feature vector for a state; same state, same vector.

    Memoized like the diagnoser posterior; the returned vector is shared,
    so callers must not write into it.
    """
    layout = feature_layout(model)
    values = np.zeros(layout["dim"])
    values[0] = 1.0
    for action in state.done:
        values[layout["done_offset"] + model.action_names.index(action)] = 1.0
    base = layout["posterior_offset"]
    values[base : base + model.num_diseases] = np.exp(log_posterior(model, state))
    if state.revealed:
        last_action, last_outcome = state.revealed[-1]
        col = model.outcome_idx(last_action, last_outcome)
        values[layout["outcome_offsets"][last_action] + col] = 1.0
    return FeatureVector(values=values)


def init_params(model: DiagnoserModel, seed: int = 0) -> PolicyParams:
    """Zero-initialized policy (uniform over feasible actions everywhere)."""
    return PolicyParams(
        weights=np.zeros((len(model.action_names), feature_dim(model))),
        action_names=model.action_names,
        meta={"seed": seed, "steps": 0, "config_hash": model.config_hash},
    )


def policy_distribution(params: PolicyParams, features: FeatureVector,
                        feasible) -> ActionDistribution:
    """Masked softmax over the feasible actions; infeasible ones get nothing."""
    feasible_set = set(feasible)
    support = tuple(a for a in params.action_names if a in feasible_set)
    if not support:
        raise NoFeasibleAction("policy asked to act with no feasible actions")
    logits = params.weights @ features.values
    idx = [params.action_names.index(a) for a in support]
    return ActionDistribution(support=support, probs=softmax(logits[idx]))


def kl_step_loss(target: ActionDistribution, policy: ActionDistribution) -> float:
    """KL(target || policy) in nats; zero-probability target terms contribute 0."""
    if set(target.support) != set(policy.support):
        raise SupportMismatch(
            f"target support {target.support} != policy support {policy.support}"
        )
    total = 0.0
    for action, q in zip(target.support, target.probs):
        if q <= 0.0:
            continue
        total += float(q) * (np.log(q) - np.log(policy.prob_of(action)))
    return float(total)


def loss_gradient(params: PolicyParams, batch, model: DiagnoserModel) -> np.ndarray:
    """Analytic gradient of the mean per-step KL loss w.r.t. the weights.

    For one item the gradient of KL(q || softmax(Wx)) restricted to the
    feasible set is outer(pi - q, x); infeasible rows receive nothing.
    """
    grad = np.zeros_like(params.weights)
    if not batch:
        return grad
    for item in batch:
        feats = featurize(item.state, model)
        pol = policy_distribution(params, feats, item.target.support)
        for action, pi in zip(pol.support, pol.probs):
            q = item.target.prob_of(action)
            grad[params.action_names.index(action)] += (pi - q) * feats.values
    return grad / len(batch)


def _case_rng(seed: int, case_id: str, epoch: int) -> np.random.Generator:
    """Deterministic per-(case, epoch) stream, independent of iteration order."""
    digest = hashlib.sha256(f"{seed}:{case_id}:{epoch}".encode()).digest()
    return np.random.default_rng(np.frombuffer(digest[:16], dtype=np.uint64))


def build_target(model: DiagnoserModel, state: PatientState, case: PatientCase,
                 hyper: TrainConfig, traj_dist=None, prefix=()) -> ActionDistribution:
    """Target distribution at one state, per the configured source."""
    if hyper.target_source == TARGET_STEPWISE_IG:
        return action_posterior(model, state, case, hyper.tau)
    if hyper.target_source == TARGET_EXACT_MARGINAL:
        if traj_dist is None:
            traj_dist = trajectory_posterior(model, case, hyper.beta, hyper.t_max)
        return marginal_action_posterior(traj_dist, t=len(prefix) + 1, prefix=prefix)
    if hyper.target_source == TARGET_GREEDY_LABEL:
        support = feasible_actions(state, case)
        if not support:
            raise NoFeasibleAction(f"no feasible action for case {case.id}")
        correct_now = float(posterior(model, state).argmax_label == case.label)
        deltas = []
        for action in support:
            after = posterior(model, update_state(state, action, case))
            deltas.append(float(after.argmax_label == case.label) - correct_now)
        return ActionDistribution(
            support=support, probs=softmax(np.array(deltas) / hyper.tau),
            temperature=hyper.tau,
        )
    raise ValueError(f"unknown target_source {hyper.target_source!r}")


def collect_targets(model: DiagnoserModel, case: PatientCase, hyper: TrainConfig,
                    rng: np.random.Generator,
                    params: PolicyParams | None = None) -> list[SupervisionTarget]:
    """Roll out one case and return the supervision targets along the way.

    States are visited by sampling actions from the target itself (teacher
    rollout) or from the current policy (`rollout="on_policy"`), until the
    diagnoser's stop rule fires.
    """
    traj_dist = None
    if hyper.target_source == TARGET_EXACT_MARGINAL:
        traj_dist = trajectory_posterior(model, case, hyper.beta, hyper.t_max)

    state = initial_state(case)
    prefix: tuple[str, ...] = ()
    targets = []
    while True:
        remaining = feasible_actions(state, case)
        post = posterior(model, state)
        if decide(post, state.step, hyper.theta_stop, hyper.t_max, len(remaining)).stop:
            break
        target = build_target(model, state, case, hyper, traj_dist=traj_dist, prefix=prefix)
        targets.append(SupervisionTarget(state=state, target=target, source=hyper.target_source))
        if hyper.rollout == ROLLOUT_ON_POLICY and params is not None:
            behavior = policy_distribution(params, featurize(state, model), target.support)
        else:
            behavior = target
        action = behavior.support[rng.choice(len(behavior.support), p=behavior.probs)]
        state = update_state(state, action, case)
        prefix = prefix + (action,)
    return targets


def train_planner(train, model: DiagnoserModel, hyper: TrainConfig) -> PolicyParams:
    """Stage-2 training: align the policy with the target posterior by KL descent.

    The diagnoser is frozen; one gradient step per case (the case's targets
    form the batch), `hyper.epochs` passes over the training set. Fully
    deterministic in (train, model, hyper). Per-epoch mean losses are stored
    in the returned params' meta.
    """
    if hyper.target_source not in TARGET_SOURCES:
        raise ValueError(f"unknown target_source {hyper.target_source!r}")
    params = init_params(model, seed=hyper.seed)
    params.meta.update(hyper.to_dict())
    params.meta["epoch_losses"] = []

    row = {a: i for i, a in enumerate(params.action_names)}
    for epoch in range(hyper.epochs):
        epoch_loss = 0.0
        n_targets = 0
        for case in train:
            rng = _case_rng(hyper.seed, case.id, epoch)
            targets = collect_targets(model, case, hyper, rng, params=params)
            if not targets:
                continue
            # single pass per item: the loss and its gradient share features
            batch_loss = 0.0
            grad = np.zeros_like(params.weights)
            for item in targets:
                feats = featurize(item.state, model)
                pol = policy_distribution(params, feats, item.target.support)
                batch_loss += kl_step_loss(item.target, pol)
                for action, pi in zip(pol.support, pol.probs):
                    q = item.target.prob_of(action)
                    grad[row[action]] += (pi - q) * feats.values
            if not np.isfinite(batch_loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}, case {case.id}")
            epoch_loss += batch_loss
            n_targets += len(targets)
            params.weights -= hyper.lr * (grad / len(targets))
            params.meta["steps"] += 1
        params.meta["epoch_losses"].append(epoch_loss / max(n_targets, 1))
    return params
