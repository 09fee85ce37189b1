"""Factorized categorical diagnoser: smoothed ML fit, posteriors, stop rule.

The model multiplies a disease prior, an initial-observation likelihood and
one likelihood factor per revealed test result. Tests that were never
revealed contribute no factor, which is the factorized model's natural
marginalization over missing evidence. All arithmetic happens in log space
with each factor clamped below, so no posterior entry can hit zero exactly.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrainingSet, EmptyWorld, UnknownSymbol
from .numerics import clamped_log, log_normalize
from .world import PatientState, World

ROW_TOL = 1e-9
DEFAULT_ALPHA = 1.0
DEFAULT_LOG_FLOOR = 1e-12

STOP_THRESHOLD = "threshold"
STOP_HORIZON = "horizon"
STOP_EXHAUSTED = "exhausted"


@dataclass(frozen=True, eq=False)  # identity hash: lets log_posterior memoize per model
class DiagnoserModel:
    """Smoothed categorical tables plus the alphabets that index them."""

    disease_names: tuple[str, ...]
    init_alphabet: tuple[str, ...]
    action_names: tuple[str, ...]
    outcome_alphabets: dict                 # action -> tuple of symbols
    priors_hat: np.ndarray                  # (K,)
    init_table_hat: np.ndarray              # (K, |init alphabet|)
    cond_tables_hat: dict                   # action -> (K, |alphabet|)
    smoothing_alpha: float
    log_floor: float = DEFAULT_LOG_FLOOR
    config_hash: str = ""

    def __post_init__(self):
        if self.smoothing_alpha < 0:
            raise ValueError(f"smoothing_alpha must be >= 0, got {self.smoothing_alpha}")
        if not (0.0 < self.log_floor <= 1e-6):
            raise ValueError(f"log_floor must be in (0, 1e-6], got {self.log_floor}")
        for name, row_block in [("priors", self.priors_hat[None, :]),
                                ("init_table", self.init_table_hat),
                                *[(f"cond[{a}]", t) for a, t in self.cond_tables_hat.items()]]:
            sums = np.asarray(row_block).sum(axis=1)
            if np.abs(sums - 1.0).max() > ROW_TOL:
                raise ValueError(f"{name}: rows not stochastic (sums {sums})")

    @property
    def num_diseases(self) -> int:
        return len(self.disease_names)

    def init_obs_idx(self, symbol: str) -> int:
        try:
            return self.init_alphabet.index(symbol)
        except ValueError:
            raise UnknownSymbol(f"initial observation {symbol!r} not in model alphabet")

    def outcome_idx(self, action: str, symbol: str) -> int:
        if action not in self.cond_tables_hat:
            raise UnknownSymbol(f"action {action!r} unknown to the model")
        try:
            return self.outcome_alphabets[action].index(symbol)
        except ValueError:
            raise UnknownSymbol(f"outcome {symbol!r} not in alphabet of {action!r}")


@dataclass(frozen=True)
class DiseasePosterior:
    """Posterior over diseases; argmax ties break to the lowest index."""

    probs: np.ndarray
    argmax_label: int
    confidence: float

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "DiseasePosterior":
        probs = np.asarray(probs, dtype=float)
        top = int(np.argmax(probs))  # argmax returns the first = lowest index
        return cls(probs=probs, argmax_label=top, confidence=float(probs[top]))


@dataclass(frozen=True)
class StopDecision:
    predicted: int
    confident: bool
    reason: str | None   # threshold | horizon | exhausted | None

    @property
    def stop(self) -> bool:
        return self.reason is not None


def _smoothed_rows(counts: np.ndarray, alpha: float) -> np.ndarray:
    """Additive smoothing per row; rows with no mass at all fall back to uniform."""
    counts = counts.astype(float) + alpha
    totals = counts.sum(axis=1, keepdims=True)
    width = counts.shape[1]
    out = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / width)
    return out


def fit_full_info(train, alpha: float = DEFAULT_ALPHA, world: World | None = None,
                  log_floor: float = DEFAULT_LOG_FLOOR) -> DiagnoserModel:
    """Fit the diagnoser on complete case evidence (initial obs + all outcomes).

    Every categorical table is a maximum-likelihood estimate with additive
    smoothing `alpha`. Conditional outcome rows are normalized over the cases
    where the action was actually available. When `world` is given, its
    alphabets and orderings are used; otherwise the structure is inferred
    from the training cases (symbols sorted for determinism).
    """
    if len(train) == 0:
        raise EmptyTrainingSet("no training cases")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")

    if world is not None:
        disease_names = world.config.disease_names
        init_alphabet = world.config.init_obs_alphabet
        action_names = world.action_names
        outcome_alphabets = {a.name: a.outcome_alphabet for a in world.config.actions}
    else:
        num = max(c.label for c in train) + 1
        disease_names = tuple(f"class_{k}" for k in range(num))
        init_alphabet = tuple(sorted({c.init_obs for c in train}))
        action_names = tuple(sorted({a for c in train for a in c.available}))
        outcome_alphabets = {
            a: tuple(sorted({c.outcomes[a] for c in train if a in c.outcomes}))
            for a in action_names
        }

    num_diseases = len(disease_names)
    if num_diseases < 2:
        raise EmptyWorld("training labels span fewer than 2 diseases")
    init_index = {s: i for i, s in enumerate(init_alphabet)}
    outcome_index = {a: {s: i for i, s in enumerate(alpha_a)}
                     for a, alpha_a in outcome_alphabets.items()}

    label_counts = np.zeros(num_diseases)
    init_counts = np.zeros((num_diseases, len(init_alphabet)))
    outcome_counts = {a: np.zeros((num_diseases, len(outcome_alphabets[a])))
                      for a in action_names}
    for case in train:
        label_counts[case.label] += 1
        init_counts[case.label, init_index[case.init_obs]] += 1
        for action, outcome in case.outcomes.items():
            outcome_counts[action][case.label, outcome_index[action][outcome]] += 1

    priors_hat = (label_counts + alpha) / (len(train) + num_diseases * alpha)

    return DiagnoserModel(
        disease_names=disease_names,
        init_alphabet=init_alphabet,
        action_names=action_names,
        outcome_alphabets=outcome_alphabets,
        priors_hat=priors_hat,
        init_table_hat=_smoothed_rows(init_counts, alpha),
        cond_tables_hat={a: _smoothed_rows(outcome_counts[a], alpha) for a in action_names},
        smoothing_alpha=alpha,
        log_floor=log_floor,
        config_hash=getattr(train, "config_hash", None) or "",
    )


def oracle_model(world: World, log_floor: float = DEFAULT_LOG_FLOOR) -> DiagnoserModel:
    """A diagnoser whose tables are the true world parameters (no smoothing)."""
    from .serialize import world_config_hash

    return DiagnoserModel(
        disease_names=world.config.disease_names,
        init_alphabet=world.config.init_obs_alphabet,
        action_names=world.action_names,
        outcome_alphabets={a.name: a.outcome_alphabet for a in world.config.actions},
        priors_hat=world.priors.copy(),
        init_table_hat=world.init_table.copy(),
        cond_tables_hat={a: t.copy() for a, t in world.cond_tables.items()},
        smoothing_alpha=0.0,
        log_floor=log_floor,
        config_hash=world_config_hash(world.config),
    )


@functools.lru_cache(maxsize=1 << 16)
def log_posterior(model: DiagnoserModel, state: PatientState) -> np.ndarray:
    """Normalized log posterior over diseases given the evidence in `state`.

    Factors accumulate in the model's canonical action order, so states with
    the same evidence set give bit-identical posteriors regardless of reveal
    order. Memoized (models hash by identity, states by value); callers must
    treat the returned array as read-only.
    """
    logp = clamped_log(model.priors_hat, model.log_floor).copy()
    logp += clamped_log(model.init_table_hat[:, model.init_obs_idx(state.init_obs)],
                        model.log_floor)
    revealed = dict(state.revealed)
    for action in model.action_names:
        if action not in revealed:
            continue
        col = model.outcome_idx(action, revealed.pop(action))
        logp += clamped_log(model.cond_tables_hat[action][:, col], model.log_floor)
    for action, outcome in revealed.items():   # actions unknown to the model
        model.outcome_idx(action, outcome)     # raises UnknownSymbol
    return log_normalize(logp)


def posterior(model: DiagnoserModel, state: PatientState) -> DiseasePosterior:
    """Posterior over diseases; revealed evidence order does not matter."""
    return DiseasePosterior.from_probs(np.exp(log_posterior(model, state)))


def oracle_posterior(world: World, state: PatientState) -> DiseasePosterior:
    """Exact posterior under the true world tables (reference for tests)."""
    return posterior(oracle_model(world), state)


def decide(post: DiseasePosterior, step: int, theta_stop: float, t_max: int,
           remaining_actions: int) -> StopDecision:
    """Termination rule: confidence threshold, horizon, or exhausted actions.

    Confidence can only fire from step 1 on, so at least one action is always
    taken. Threshold takes precedence when several reasons fire at once.
    """
    if not (0.0 < theta_stop <= 1.0):
        raise ValueError(f"theta_stop must be in (0, 1], got {theta_stop}")
    if t_max < 1:
        raise ValueError(f"t_max must be >= 1, got {t_max}")

    confident = step >= 1 and post.confidence >= theta_stop
    if confident:
        reason = STOP_THRESHOLD
    elif step >= t_max:
        reason = STOP_HORIZON
    elif remaining_actions == 0:
        reason = STOP_EXHAUSTED
    else:
        reason = None
    return StopDecision(predicted=post.argmax_label, confident=confident, reason=reason)
