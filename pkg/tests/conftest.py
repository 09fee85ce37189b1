"""Shared fixtures: canonical worlds, hand-built cases, random-world helper."""

import numpy as np
import pytest

from seqdx.diagnoser import oracle_model
from seqdx.presets import w2_config, w4_config
from seqdx.world import ActionSpec, PatientCase, WorldConfig, build_world


@pytest.fixture(scope="session")
def w2():
    return build_world(w2_config())


@pytest.fixture(scope="session")
def w4():
    return build_world(w4_config())


@pytest.fixture(scope="session")
def w2_model(w2):
    return oracle_model(w2)


@pytest.fixture
def w2_case_pp():
    """The hand-checkable W2 case: true label A, both tests positive."""
    return PatientCase(id="pp", label=0, init_obs="none",
                       outcomes={"lab": "+", "img": "+"},
                       available=("lab", "img"))


def random_world_config(rng: np.random.Generator) -> WorldConfig:
    """A small random world: 2-4 diseases, 1-4 actions, Dirichlet rows."""
    num_diseases = int(rng.integers(2, 5))
    num_actions = int(rng.integers(1, 5))
    init_width = int(rng.integers(1, 4))

    def rows(width):
        return tuple(tuple(rng.dirichlet(np.ones(width))) for _ in range(num_diseases))

    actions = []
    for j in range(num_actions):
        width = int(rng.integers(2, 5))
        actions.append(ActionSpec(
            name=f"t{j}",
            outcome_alphabet=tuple(f"o{i}" for i in range(width)),
            cond_table=rows(width),
        ))
    return WorldConfig(
        disease_names=tuple(f"d{i}" for i in range(num_diseases)),
        priors=tuple(rng.dirichlet(np.ones(num_diseases))),
        init_obs_alphabet=tuple(f"s{i}" for i in range(init_width)),
        init_obs_table=rows(init_width),
        actions=tuple(actions),
        availability_prob=float(rng.uniform(0.6, 1.0)),
        seed=int(rng.integers(0, 2**16)),
    )
