"""World construction, case sampling, state updates, and splitting."""

import numpy as np
import pytest

from seqdx.errors import (
    BadRatios,
    DuplicateAction,
    EmptyWorld,
    InvalidDistribution,
    UnavailableAction,
)
from seqdx.presets import w2_config, w4_config
from seqdx.world import (
    ActionSpec,
    WorldConfig,
    build_world,
    initial_state,
    sample_cases,
    split_cases,
    update_state,
)


def test_build_w2(w2):
    assert w2.num_diseases == 2
    assert w2.action_names == ("lab", "img")
    assert w2.cond_tables["lab"][0, 0] == 0.9
    assert w2.cond_tables["lab"][1, 0] == 0.2


def test_build_w4(w4):
    assert w4.config.disease_names == (
        "appendicitis", "cholecystitis", "diverticulitis", "pancreatitis")
    assert w4.num_actions == 3
    np.testing.assert_allclose(w4.priors, 0.25)


def test_bad_prior_row_rejected():
    import dataclasses
    bad = dataclasses.replace(w2_config(), priors=(0.6, 0.5))
    with pytest.raises(InvalidDistribution):
        build_world(bad)


def test_bad_cond_row_rejected():
    import dataclasses
    config = w2_config()
    broken = dataclasses.replace(
        config,
        actions=(ActionSpec("lab", ("+", "-"), ((0.9, 0.2), (0.2, 0.8))),),
    )
    with pytest.raises(InvalidDistribution):
        build_world(broken)


def test_empty_world_rejected():
    import dataclasses
    config = w2_config()
    with pytest.raises(EmptyWorld):
        build_world(dataclasses.replace(config, actions=()))
    with pytest.raises(EmptyWorld):
        build_world(dataclasses.replace(
            config, disease_names=("A",), priors=(1.0,),
            init_obs_table=((1.0,),),
            actions=(ActionSpec("lab", ("+", "-"), ((0.9, 0.1),)),),
        ))


def test_sample_single_case_schema(w2):
    (case,) = sample_cases(w2, 1, seed=0)
    assert case.label in (0, 1)
    assert case.init_obs == "none"
    assert set(case.outcomes) == set(case.available)
    for action in case.available:
        assert case.outcomes[action] in ("+", "-")


def test_sample_label_frequencies_match_priors(w4):
    cases = sample_cases(w4, 2400, seed=7)
    assert len(cases) == 2400
    counts = np.bincount([c.label for c in cases], minlength=4) / 2400
    assert np.abs(counts - w4.priors).max() <= 0.03


def test_sample_determinism(w2):
    a = sample_cases(w2, 50, seed=3)
    b = sample_cases(w2, 50, seed=3)
    assert a == b
    assert sample_cases(w2, 50, seed=4) != a


def test_every_available_action_has_one_outcome(w4):
    for case in sample_cases(w4, 500, seed=11):
        assert set(case.outcomes.keys()) == set(case.available)
        assert len(case.available) >= 1


def test_outcome_frequencies_converge_to_world_rows(w2):
    cases = sample_cases(w2, 50_000, seed=5)
    for j, action in enumerate(w2.action_names):
        alphabet = w2.config.actions[j].outcome_alphabet
        for k in range(w2.num_diseases):
            subset = [c for c in cases if c.label == k and action in c.outcomes]
            freqs = np.array([
                sum(c.outcomes[action] == symbol for c in subset) / len(subset)
                for symbol in alphabet
            ])
            assert np.abs(freqs - w2.cond_tables[action][k]).max() <= 0.02


def test_update_state_appends_and_preserves_input(w2):
    (case,) = sample_cases(w2, 1, seed=2)
    state = initial_state(case)
    after = update_state(state, "lab", case)
    assert after.revealed == (("lab", case.outcomes["lab"]),)
    assert after.step == 1 and after.done == {"lab"}
    assert state.revealed == () and state.step == 0 and state.done == frozenset()


def test_update_state_order_insensitive_at_set_level(w2):
    (case,) = sample_cases(w2, 1, seed=2)
    s0 = initial_state(case)
    ab = update_state(update_state(s0, "lab", case), "img", case)
    ba = update_state(update_state(s0, "img", case), "lab", case)
    assert ab.done == ba.done
    assert sorted(ab.revealed) == sorted(ba.revealed)
    assert ab.step == ba.step == 2


def test_update_state_errors(w2):
    (case,) = sample_cases(w2, 1, seed=2)
    state = update_state(initial_state(case), "lab", case)
    with pytest.raises(DuplicateAction):
        update_state(state, "lab", case)
    from seqdx.world import PatientCase
    narrowed = PatientCase(id="n", label=0, init_obs="none",
                           outcomes={"lab": "+"}, available=("lab",))
    with pytest.raises(UnavailableAction):
        update_state(initial_state(narrowed), "img", narrowed)


def test_split_2400_cases(w4):
    cases = sample_cases(w4, 2400, seed=7)
    train, val, test = split_cases(cases, (0.7, 0.1, 0.2), seed=1)
    assert (len(train), len(val), len(test)) == (1680, 240, 480)
    ids = {c.id for c in train} | {c.id for c in val} | {c.id for c in test}
    assert len(ids) == 2400  # disjoint partition


def test_split_degenerate_all_train(w2):
    cases = sample_cases(w2, 10, seed=0)
    train, val, test = split_cases(cases, (1, 0, 0), seed=0)
    assert (len(train), len(val), len(test)) == (10, 0, 0)


def test_split_floor_remainder_rule(w2):
    # floors are (4, 0, 1) for n=7; the 2 leftover cases go to train
    cases = sample_cases(w2, 7, seed=0)
    train, val, test = split_cases(cases, (0.7, 0.1, 0.2), seed=0)
    assert (len(train), len(val), len(test)) == (6, 0, 1)


def test_split_bad_ratios(w2):
    cases = sample_cases(w2, 10, seed=0)
    with pytest.raises(BadRatios):
        split_cases(cases, (0.5, 0.2, 0.2), seed=0)
    with pytest.raises(BadRatios):
        split_cases(cases, (-0.1, 0.6, 0.5), seed=0)


def test_split_deterministic(w2):
    cases = sample_cases(w2, 100, seed=0)
    a = split_cases(cases, (0.7, 0.1, 0.2), seed=9)
    b = split_cases(cases, (0.7, 0.1, 0.2), seed=9)
    assert all(list(x) == list(y) for x, y in zip(a, b))


def test_availability_knob(w4):
    import dataclasses
    world = build_world(dataclasses.replace(w4.config, availability_prob=0.5))
    cases = sample_cases(world, 2000, seed=0)
    # every case keeps >= 1 action even at 50% availability
    assert min(len(c.available) for c in cases) >= 1
    frac = np.mean([len(c.available) for c in cases]) / world.num_actions
    assert 0.45 <= frac <= 0.62  # conditioned on non-empty, slightly above 0.5
