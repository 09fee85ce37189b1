"""Synthetic diagnostic world: diseases, test categories, and sampled cases.

A world is a small generative model: a prior over diseases, a conditional
table for the initial observation, and one conditional outcome table per
orderable test. Cases pre-sample every outcome at creation time, so
revealing a test later is a pure lookup: the same case shows the same
evidence under any action order and under any policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadRatios,
    DuplicateAction,
    EmptyWorld,
    InvalidDistribution,
    UnavailableAction,
)

ROW_TOL = 1e-9


def _check_row(row: Sequence[float], what: str) -> None:
    arr = np.asarray(row, dtype=float)
    if arr.size == 0:
        raise InvalidDistribution(f"{what}: empty probability row")
    if (arr < 0).any() or (arr > 1 + ROW_TOL).any():
        raise InvalidDistribution(f"{what}: entries outside [0, 1]: {list(arr)}")
    total = float(arr.sum())
    if abs(total - 1.0) > ROW_TOL:
        raise InvalidDistribution(f"{what}: row sums to {total!r}, not 1")


@dataclass(frozen=True)
class ActionSpec:
    """One orderable test category with a per-disease outcome distribution."""

    name: str
    outcome_alphabet: tuple[str, ...]
    cond_table: tuple[tuple[float, ...], ...]  # one row per disease

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "outcome_alphabet": list(self.outcome_alphabet),
            "cond_table": [list(row) for row in self.cond_table],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ActionSpec":
        return cls(
            name=str(data["name"]),
            outcome_alphabet=tuple(data["outcome_alphabet"]),
            cond_table=tuple(tuple(float(p) for p in row) for row in data["cond_table"]),
        )


@dataclass(frozen=True)
class WorldConfig:
    """Full description of a synthetic world; serializable as one JSON document."""

    disease_names: tuple[str, ...]
    priors: tuple[float, ...]
    init_obs_alphabet: tuple[str, ...]
    init_obs_table: tuple[tuple[float, ...], ...]  # one row per disease
    actions: tuple[ActionSpec, ...]
    availability_prob: float = 1.0
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "disease_names": list(self.disease_names),
            "priors": list(self.priors),
            "init_obs_alphabet": list(self.init_obs_alphabet),
            "init_obs_table": [list(row) for row in self.init_obs_table],
            "actions": [a.to_dict() for a in self.actions],
            "availability_prob": self.availability_prob,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WorldConfig":
        return cls(
            disease_names=tuple(data["disease_names"]),
            priors=tuple(float(p) for p in data["priors"]),
            init_obs_alphabet=tuple(data["init_obs_alphabet"]),
            init_obs_table=tuple(
                tuple(float(p) for p in row) for row in data["init_obs_table"]
            ),
            actions=tuple(ActionSpec.from_dict(a) for a in data["actions"]),
            availability_prob=float(data.get("availability_prob", 1.0)),
            seed=int(data.get("seed", 0)),
        )


@dataclass(frozen=True)
class World:
    """Validated, immutable world with tables as numpy arrays and index maps."""

    config: WorldConfig
    priors: np.ndarray                      # (K,)
    init_table: np.ndarray                  # (K, |init alphabet|)
    cond_tables: dict                       # action name -> (K, |alphabet|)
    disease_index: dict                     # name -> int
    init_obs_index: dict                    # symbol -> int
    action_names: tuple[str, ...]
    outcome_index: dict                     # action name -> {symbol: int}

    @property
    def num_diseases(self) -> int:
        return len(self.config.disease_names)

    @property
    def num_actions(self) -> int:
        return len(self.action_names)


@dataclass(frozen=True)
class PatientCase:
    """One sampled patient: hidden label plus pre-sampled evidence.

    `available` keeps the world's canonical action order; `outcomes` holds a
    symbol for exactly the available actions.
    """

    id: str
    label: int
    init_obs: str
    outcomes: dict
    available: tuple[str, ...]


@dataclass(frozen=True)
class PatientState:
    """Accumulated evidence: initial observation plus revealed test results."""

    init_obs: str
    revealed: tuple = ()        # ordered ((action, outcome), ...)
    done: frozenset = frozenset()
    step: int = 0


class CaseSet(list):
    """A list of PatientCase carrying the hash of the config that generated it."""

    def __init__(self, cases: Iterable[PatientCase] = (), config_hash: str | None = None):
        super().__init__(cases)
        self.config_hash = config_hash


def build_world(config: WorldConfig) -> World:
    """Validate a WorldConfig and freeze it into an immutable World."""
    num_diseases = len(config.disease_names)
    if num_diseases < 2:
        raise EmptyWorld(f"need at least 2 diseases, got {num_diseases}")
    if len(config.actions) < 1:
        raise EmptyWorld("need at least 1 action")
    if len(set(config.disease_names)) != num_diseases:
        raise ValueError("duplicate disease names")
    names = [a.name for a in config.actions]
    if len(set(names)) != len(names):
        raise ValueError("duplicate action names")

    if len(config.priors) != num_diseases:
        raise InvalidDistribution("priors length does not match disease count")
    _check_row(config.priors, "priors")

    if len(config.init_obs_table) != num_diseases:
        raise InvalidDistribution("init_obs_table must have one row per disease")
    for disease, row in zip(config.disease_names, config.init_obs_table):
        if len(row) != len(config.init_obs_alphabet):
            raise InvalidDistribution(f"init row for {disease}: wrong width")
        _check_row(row, f"init_obs_table[{disease}]")

    cond_tables = {}
    outcome_index = {}
    for spec in config.actions:
        if len(spec.outcome_alphabet) == 0:
            raise InvalidDistribution(f"action {spec.name}: empty outcome alphabet")
        if len(spec.cond_table) != num_diseases:
            raise InvalidDistribution(f"action {spec.name}: need one row per disease")
        for disease, row in zip(config.disease_names, spec.cond_table):
            if len(row) != len(spec.outcome_alphabet):
                raise InvalidDistribution(f"action {spec.name}, row {disease}: wrong width")
            _check_row(row, f"cond_table[{spec.name}][{disease}]")
        cond_tables[spec.name] = np.asarray(spec.cond_table, dtype=float)
        outcome_index[spec.name] = {s: i for i, s in enumerate(spec.outcome_alphabet)}

    if not (0.0 <= config.availability_prob <= 1.0):
        raise InvalidDistribution(
            f"availability_prob must be in [0, 1], got {config.availability_prob}"
        )

    return World(
        config=config,
        priors=np.asarray(config.priors, dtype=float),
        init_table=np.asarray(config.init_obs_table, dtype=float),
        cond_tables=cond_tables,
        disease_index={d: i for i, d in enumerate(config.disease_names)},
        init_obs_index={s: i for i, s in enumerate(config.init_obs_alphabet)},
        action_names=tuple(names),
        outcome_index=outcome_index,
    )


def _inverse_cdf(rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Categorical draw per row via inverse CDF; rows is (n, m), u is (n,)."""
    cdf = np.cumsum(rows, axis=1)
    idx = (cdf < u[:, None]).sum(axis=1)
    return np.minimum(idx, rows.shape[1] - 1)


def sample_cases(world: World, n: int, seed: int) -> CaseSet:
    """Sample n cases, deterministically in (world, n, seed).

    Label, initial observation, per-action availability, and every available
    action's outcome are all drawn here; nothing is sampled later. A case is
    guaranteed at least one available action (the availability mask is
    redrawn for the rare case that comes up empty), so every sequential
    episode can take at least one step.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    from .serialize import world_config_hash  # local import avoids a cycle

    rng = np.random.default_rng(seed)
    num_actions = world.num_actions

    labels = _inverse_cdf(np.tile(world.priors, (n, 1)), rng.random(n))
    init_idx = _inverse_cdf(world.init_table[labels], rng.random(n))
    avail = rng.random((n, num_actions)) < world.config.availability_prob
    for i in np.flatnonzero(~avail.any(axis=1)):
        while not avail[i].any():
            avail[i] = rng.random(num_actions) < world.config.availability_prob
    # one outcome column per action, drawn for every case and kept only when available
    outcome_idx = np.empty((n, num_actions), dtype=int)
    for j, name in enumerate(world.action_names):
        outcome_idx[:, j] = _inverse_cdf(world.cond_tables[name][labels], rng.random(n))

    cases = []
    for i in range(n):
        available = tuple(
            name for j, name in enumerate(world.action_names) if avail[i, j]
        )
        outcomes = {
            name: world.config.actions[j].outcome_alphabet[outcome_idx[i, j]]
            for j, name in enumerate(world.action_names)
            if avail[i, j]
        }
        cases.append(
            PatientCase(
                id=f"c{i:06d}",
                label=int(labels[i]),
                init_obs=world.config.init_obs_alphabet[init_idx[i]],
                outcomes=outcomes,
                available=available,
            )
        )
    return CaseSet(cases, config_hash=world_config_hash(world.config))


def initial_state(case: PatientCase) -> PatientState:
    """The pre-action state h0 for a case: initial observation only."""
    return PatientState(init_obs=case.init_obs)


def update_state(state: PatientState, action: str, case: PatientCase) -> PatientState:
    """Reveal one test result; returns a new state, the input is untouched."""
    if action in state.done:
        raise DuplicateAction(f"action {action!r} already revealed")
    if action not in case.available:
        raise UnavailableAction(f"action {action!r} not available for case {case.id}")
    return PatientState(
        init_obs=state.init_obs,
        revealed=state.revealed + ((action, case.outcomes[action]),),
        done=state.done | {action},
        step=state.step + 1,
    )


def split_cases(cases, ratios, seed: int):
    """Disjoint (train, val, test) partition by shuffled index.

    Each split gets floor(n * ratio) cases; leftover cases go to train.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise BadRatios(f"need three nonnegative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > ROW_TOL:
        raise BadRatios(f"ratios sum to {sum(ratios)!r}, not 1")

    n = len(cases)
    sizes = [int(np.floor(n * r + 1e-9)) for r in ratios]
    sizes[0] += n - sum(sizes)

    order = np.random.default_rng(seed).permutation(n)
    config_hash = getattr(cases, "config_hash", None)
    bounds = np.cumsum([0] + sizes)
    parts = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        parts.append(CaseSet((cases[i] for i in order[lo:hi]), config_hash=config_hash))
    return tuple(parts)
