"""Trajectory-preference math: information gain, step-wise and exact posteriors.

A trajectory is an ordered sequence of distinct test actions. Its score is
the change in log posterior probability of the case's true disease between
the initial state and the state after replaying the whole sequence. Because
the diagnoser's posterior depends only on the evidence *set*, that score
telescopes exactly into the per-step information gains along the replay.

The trajectory-level preference distribution (an energy model over the
enumerated support, sharpness `beta`) is exactly computable at desk scale,
which makes the step-wise softmax-of-gain posterior's approximation gap a
measurable quantity instead of a conjecture.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .diagnoser import DiagnoserModel, log_posterior
from .errors import EmptyPrefixSet, InfeasibleAction, NoFeasibleAction
from .numerics import softmax
from .world import PatientCase, PatientState, initial_state, update_state


@dataclass(frozen=True)
class Trajectory:
    """Ordered sequence of distinct action names."""

    actions: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.actions)


@dataclass(frozen=True)
class TrajectoryDistribution:
    """Energy-based distribution over an enumerated trajectory support."""

    support: tuple[Trajectory, ...]
    scores: np.ndarray          # S(z) per trajectory
    probs: np.ndarray           # softmax(beta * scores)
    beta: float


@dataclass(frozen=True)
class ActionDistribution:
    """Distribution over currently feasible actions.

    `temperature` is set when the distribution came from the softmax-of-gain
    rule; exact marginals and policy outputs leave it as None.
    """

    support: tuple[str, ...]
    probs: np.ndarray
    temperature: float | None = None

    def prob_of(self, action: str) -> float:
        return float(self.probs[self.support.index(action)])


def feasible_actions(state: PatientState, case: PatientCase) -> tuple[str, ...]:
    """Available-but-not-yet-revealed actions, in the case's canonical order."""
    return tuple(a for a in case.available if a not in state.done)


def info_gain(model: DiagnoserModel, state: PatientState, action: str,
              case: PatientCase) -> float:
    """Change in log posterior of the true label from revealing one test.

    Uses the case's pre-sampled outcome, so the value is a property of the
    patient, not of the reveal order. Supervision-time only: it reads
    case.label.
    """
    if action in state.done or action not in case.available:
        raise InfeasibleAction(f"action {action!r} infeasible at step {state.step}")
    before = log_posterior(model, state)[case.label]
    after = log_posterior(model, update_state(state, action, case))[case.label]
    return float(after - before)


def action_posterior(model: DiagnoserModel, state: PatientState, case: PatientCase,
                     tau: float) -> ActionDistribution:
    """Step-wise action target: softmax of information gain at temperature tau."""
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    support = feasible_actions(state, case)
    if not support:
        raise NoFeasibleAction(f"no feasible action for case {case.id} at step {state.step}")
    gains = np.array([info_gain(model, state, a, case) for a in support])
    return ActionDistribution(support=support, probs=softmax(gains / tau), temperature=tau)


def enumerate_trajectories(case: PatientCase, t_max: int,
                           fixed_length: bool = False) -> list[Trajectory]:
    """All ordered sequences of distinct available actions, lexicographic.

    Lengths run from 1 to t_max by default; `fixed_length` restricts the
    support to length exactly min(t_max, #available) for a fixed-horizon
    reading. Order: shorter first, then lexicographic in the case's
    canonical action order.
    """
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")
    top = min(t_max, len(case.available))
    lengths = [top] if fixed_length else range(1, top + 1)
    return [
        Trajectory(actions=perm)
        for length in lengths
        for perm in itertools.permutations(case.available, length)
    ]


def trajectory_posterior(model: DiagnoserModel, case: PatientCase, beta: float,
                         t_max: int, fixed_length: bool = False) -> TrajectoryDistribution:
    """Exact preference distribution over the enumerated trajectory support.

    Score S(z) = log p(y | evidence after z) - log p(y | initial state);
    probabilities are the max-subtracted softmax of beta * S(z). The replay
    memoizes posteriors by evidence set, which the factorized diagnoser makes
    exact (order never matters).
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    support = tuple(enumerate_trajectories(case, t_max, fixed_length=fixed_length))

    state0 = initial_state(case)
    memo: dict[frozenset, float] = {frozenset(): float(log_posterior(model, state0)[case.label])}

    def log_prob_true(actions: tuple[str, ...]) -> float:
        key = frozenset(actions)
        if key not in memo:
            state = state0
            for a in actions:
                state = update_state(state, a, case)
            memo[key] = float(log_posterior(model, state)[case.label])
        return memo[key]

    base = memo[frozenset()]
    scores = np.array([log_prob_true(z.actions) - base for z in support])
    return TrajectoryDistribution(
        support=support, scores=scores, probs=softmax(beta * scores), beta=beta
    )


def marginal_action_posterior(dist: TrajectoryDistribution, t: int,
                              prefix) -> ActionDistribution:
    """Step-t action marginal of the trajectory distribution, given a prefix.

    The probability of action a is the mass of trajectories that extend the
    prefix with a at position t, renormalized over all trajectories that
    match the prefix and reach position t at all.
    """
    prefix = tuple(prefix)
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if len(prefix) != t - 1:
        raise ValueError(f"prefix length {len(prefix)} does not match t={t}")

    mass: dict[str, float] = {}
    order: list[str] = []
    denom = 0.0
    for traj, p in zip(dist.support, dist.probs):
        if traj.length < t or traj.actions[: t - 1] != prefix:
            continue
        denom += p
        nxt = traj.actions[t - 1]
        if nxt not in mass:
            mass[nxt] = 0.0
            order.append(nxt)
        mass[nxt] += p
    if denom <= 0.0 or not order:
        raise EmptyPrefixSet(f"no trajectory extends prefix {prefix!r} at t={t}")

    probs = np.array([mass[a] for a in order]) / denom
    return ActionDistribution(support=tuple(order), probs=probs, temperature=None)
