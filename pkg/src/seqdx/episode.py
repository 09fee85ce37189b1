"""Inference-time interaction loop: plan, reveal, diagnose, stop.

Runs one case under a policy until the stop rule fires, recording actions,
posteriors and the final prediction. Action selection for the trained,
random and fixed policies never sees the true label; only the label-aware
greedy reference baseline does, and it exists as an upper reference, not as
a deployable policy.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .diagnoser import (
    STOP_EXHAUSTED,
    DiagnoserModel,
    decide,
    posterior,
)
from .errors import InvalidPolicy
from .planner import PolicyParams, featurize, policy_distribution
from .trajectory import feasible_actions, info_gain
from .world import PatientCase, initial_state, update_state

POLICY_TRAINED = "trained"
POLICY_RANDOM = "random"
POLICY_GREEDY_IG = "greedy_ig_oracle"
POLICY_FIXED_INFO = "fixed_info"
POLICY_ALL_INFO = "all_info"
SEQUENTIAL_KINDS = (POLICY_TRAINED, POLICY_RANDOM, POLICY_GREEDY_IG)
ONESHOT_KINDS = (POLICY_FIXED_INFO, POLICY_ALL_INFO)


@dataclass(frozen=True)
class EpisodeLimits:
    theta_stop: float = 0.9
    t_max: int = 3


@dataclass(frozen=True)
class PolicySpec:
    """Which policy to run and what it needs (checkpoint, fixed set, seeds)."""

    kind: str
    params: PolicyParams | None = None
    fixed_set: tuple[str, ...] | None = None
    seed_stream: int = 0
    sample_actions: bool = False    # diagnostics only; evaluation uses argmax

    def validate(self) -> None:
        if self.kind not in SEQUENTIAL_KINDS + ONESHOT_KINDS:
            raise InvalidPolicy(f"unknown policy kind {self.kind!r}")
        if self.kind == POLICY_TRAINED and self.params is None:
            raise InvalidPolicy("trained policy requires params")
        if self.kind == POLICY_FIXED_INFO and self.fixed_set is None:
            raise InvalidPolicy("fixed_info policy requires fixed_set")


@dataclass(frozen=True)
class EpisodeRecord:
    case_id: str
    true_label: int
    predicted: int
    steps_taken: int
    actions: tuple[str, ...]
    stop_reason: str
    confidence_at_stop: float
    per_step_posteriors: tuple = ()

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "true_label": self.true_label,
            "predicted": self.predicted,
            "steps_taken": self.steps_taken,
            "actions": list(self.actions),
            "stop_reason": self.stop_reason,
            "confidence_at_stop": self.confidence_at_stop,
            "per_step_posteriors": [list(p) for p in self.per_step_posteriors],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EpisodeRecord":
        return cls(
            case_id=data["case_id"],
            true_label=int(data["true_label"]),
            predicted=int(data["predicted"]),
            steps_taken=int(data["steps_taken"]),
            actions=tuple(data["actions"]),
            stop_reason=data["stop_reason"],
            confidence_at_stop=float(data["confidence_at_stop"]),
            per_step_posteriors=tuple(tuple(p) for p in data["per_step_posteriors"]),
        )


def case_rng(seed_stream: int, case_id: str) -> np.random.Generator:
    """Per-case RNG derived from (global seed, case id); order-independent."""
    digest = hashlib.sha256(f"{seed_stream}:{case_id}".encode()).digest()
    return np.random.default_rng(np.frombuffer(digest[:16], dtype=np.uint64))


def _select_trained(params: PolicyParams, model: DiagnoserModel, state, feasible,
                    rng: np.random.Generator, sample: bool) -> str:
    # no case/label in sight: selection reads only the observable state
    dist = policy_distribution(params, featurize(state, model), feasible)
    if sample:
        return dist.support[rng.choice(len(dist.support), p=dist.probs)]
    return dist.support[int(np.argmax(dist.probs))]


def _select_random(feasible, rng: np.random.Generator) -> str:
    return feasible[rng.integers(len(feasible))]


def _select_greedy_ig(model: DiagnoserModel, state, case: PatientCase, feasible) -> str:
    gains = [info_gain(model, state, a, case) for a in feasible]
    return feasible[int(np.argmax(gains))]


def run_episode(policy: PolicySpec, case: PatientCase, model: DiagnoserModel,
                limits: EpisodeLimits) -> EpisodeRecord:
    """Run one case to termination under the given policy."""
    policy.validate()
    if policy.kind in ONESHOT_KINDS:
        return _run_oneshot(policy, case, model)

    rng = case_rng(policy.seed_stream, case.id)
    state = initial_state(case)
    posteriors = []
    while True:
        feasible = feasible_actions(state, case)
        if policy.kind == POLICY_TRAINED:
            action = _select_trained(policy.params, model, state, feasible, rng,
                                     policy.sample_actions)
        elif policy.kind == POLICY_RANDOM:
            action = _select_random(feasible, rng)
        else:
            action = _select_greedy_ig(model, state, case, feasible)
        state = update_state(state, action, case)
        post = posterior(model, state)
        posteriors.append(tuple(float(p) for p in post.probs))
        decision = decide(post, state.step, limits.theta_stop, limits.t_max,
                          remaining_actions=len(feasible) - 1)
        if decision.stop:
            return EpisodeRecord(
                case_id=case.id,
                true_label=case.label,
                predicted=decision.predicted,
                steps_taken=state.step,
                actions=tuple(a for a, _ in state.revealed),
                stop_reason=decision.reason,
                confidence_at_stop=post.confidence,
                per_step_posteriors=tuple(posteriors),
            )


def _run_oneshot(policy: PolicySpec, case: PatientCase, model: DiagnoserModel) -> EpisodeRecord:
    """Reveal a designated set in canonical order, then predict once."""
    if policy.kind == POLICY_ALL_INFO:
        designated = case.available
    else:
        unknown = set(policy.fixed_set) - set(model.action_names)
        if unknown:
            raise InvalidPolicy(f"fixed_set names unknown actions {sorted(unknown)}")
        designated = tuple(a for a in case.available if a in set(policy.fixed_set))

    state = initial_state(case)
    posteriors = []
    for action in designated:
        state = update_state(state, action, case)
        post = posterior(model, state)
        posteriors.append(tuple(float(p) for p in post.probs))
    final = posterior(model, state)
    return EpisodeRecord(
        case_id=case.id,
        true_label=case.label,
        predicted=final.argmax_label,
        steps_taken=state.step,
        actions=tuple(a for a, _ in state.revealed),
        stop_reason=STOP_EXHAUSTED,
        confidence_at_stop=final.confidence,
        per_step_posteriors=tuple(posteriors),
    )


def run_benchmark(policy: PolicySpec, cases, model: DiagnoserModel,
                  limits: EpisodeLimits, log_path=None) -> list[EpisodeRecord]:
    """One episode per case; optionally streams records to a JSON-lines log."""
    if len(cases) == 0:
        raise ValueError("no cases to evaluate")
    records = []
    sink = open(log_path, "w") if log_path is not None else None
    try:
        for case in cases:
            record = run_episode(policy, case, model, limits)
            records.append(record)
            if sink is not None:
                sink.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    finally:
        if sink is not None:
            sink.close()
    return records
