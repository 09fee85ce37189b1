"""Featurization, masked softmax policy, KL loss/gradient, training loop."""

import math

import numpy as np
import pytest

from seqdx.diagnoser import oracle_model
from seqdx.errors import NoFeasibleAction, SupportMismatch
from seqdx.planner import (
    TrainConfig,
    build_target,
    collect_targets,
    feature_dim,
    featurize,
    init_params,
    kl_step_loss,
    loss_gradient,
    policy_distribution,
    train_planner,
    SupervisionTarget,
)
from seqdx.trajectory import ActionDistribution, feasible_actions, info_gain
from seqdx.world import PatientCase, build_world, initial_state, sample_cases, update_state

from conftest import random_world_config


def test_featurize_empty_state_layout(w2_model, w2_case_pp):
    feats = featurize(initial_state(w2_case_pp), w2_model)
    # [bias] + [2 done flags] + [2 posterior] + [2+2 last-outcome slots]
    assert feats.dim == 1 + 2 + 2 + 4
    np.testing.assert_allclose(feats.values, [1, 0, 0, 0.5, 0.5, 0, 0, 0, 0],
                               atol=1e-12)


def test_featurize_after_lab_plus(w2_model, w2_case_pp):
    state = update_state(initial_state(w2_case_pp), "lab", w2_case_pp)
    feats = featurize(state, w2_model)
    np.testing.assert_allclose(feats.values[3:5], [9 / 11, 2 / 11], atol=1e-12)
    assert feats.values[1] == 1.0 and feats.values[2] == 0.0    # done flags
    assert feats.values[5] == 1.0                               # lab "+" slot


def test_featurize_order_shows_only_in_last_outcome_block(w2_model, w2_case_pp):
    s0 = initial_state(w2_case_pp)
    ab = update_state(update_state(s0, "lab", w2_case_pp), "img", w2_case_pp)
    ba = update_state(update_state(s0, "img", w2_case_pp), "lab", w2_case_pp)
    fa, fb = featurize(ab, w2_model), featurize(ba, w2_model)
    np.testing.assert_allclose(fa.values[:5], fb.values[:5], atol=1e-15)
    assert not np.array_equal(fa.values[5:], fb.values[5:])


def test_policy_distribution_zero_weights_uniform(w2_model, w2_case_pp):
    params = init_params(w2_model)
    feats = featurize(initial_state(w2_case_pp), w2_model)
    dist = policy_distribution(params, feats, ("lab", "img"))
    np.testing.assert_allclose(dist.probs, [0.5, 0.5])


def test_policy_distribution_masking(w2_model, w2_case_pp):
    params = init_params(w2_model)
    feats = featurize(initial_state(w2_case_pp), w2_model)
    dist = policy_distribution(params, feats, ("lab",))
    assert dist.support == ("lab",) and dist.probs[0] == 1.0
    with pytest.raises(NoFeasibleAction):
        policy_distribution(params, feats, ())


def test_policy_distribution_hand_softmax(w2_model, w2_case_pp):
    params = init_params(w2_model)
    params.weights[0, 0] = math.log(2)  # bias feature is 1, so logits (ln 2, 0)
    feats = featurize(initial_state(w2_case_pp), w2_model)
    dist = policy_distribution(params, feats, ("lab", "img"))
    np.testing.assert_allclose(dist.probs, [2 / 3, 1 / 3], atol=1e-12)


def test_policy_logit_translation_invariance(w2_model, w2_case_pp):
    rng = np.random.default_rng(0)
    params = init_params(w2_model)
    params.weights = rng.normal(size=params.weights.shape)
    shifted = params.copy()
    shifted.weights[:, 0] += 7.3   # same constant onto every action's bias
    feats = featurize(initial_state(w2_case_pp), w2_model)
    a = policy_distribution(params, feats, ("lab", "img"))
    b = policy_distribution(shifted, feats, ("lab", "img"))
    assert np.abs(a.probs - b.probs).max() <= 1e-12


def test_kl_identity_zero():
    q = ActionDistribution(("a", "b"), np.array([0.3, 0.7]))
    assert kl_step_loss(q, q) == pytest.approx(0.0, abs=1e-15)


def test_kl_one_hot_against_uniform():
    q = ActionDistribution(("a", "b"), np.array([1.0, 0.0]))
    p = ActionDistribution(("a", "b"), np.array([0.5, 0.5]))
    assert kl_step_loss(q, p) == pytest.approx(math.log(2), abs=1e-12)


def test_kl_hand_value():
    q = ActionDistribution(("a", "b"), np.array([0.6, 0.4]))
    p = ActionDistribution(("a", "b"), np.array([0.5, 0.5]))
    expected = 0.6 * math.log(0.6 / 0.5) + 0.4 * math.log(0.4 / 0.5)
    assert kl_step_loss(q, p) == pytest.approx(expected, abs=1e-12)
    assert kl_step_loss(q, p) == pytest.approx(0.020136, abs=1e-6)


def test_kl_support_mismatch():
    q = ActionDistribution(("a", "b"), np.array([0.6, 0.4]))
    p = ActionDistribution(("a", "c"), np.array([0.5, 0.5]))
    with pytest.raises(SupportMismatch):
        kl_step_loss(q, p)


def test_gradient_zero_at_match(w2_model, w2_case_pp):
    params = init_params(w2_model)
    state = initial_state(w2_case_pp)
    target = ActionDistribution(("lab", "img"), np.array([0.5, 0.5]))
    batch = [SupervisionTarget(state=state, target=target, source="stepwise_ig")]
    grad = loss_gradient(params, batch, w2_model)
    assert np.abs(grad).max() <= 1e-15


def test_gradient_hand_value(w2_model):
    # one-hot target, uniform zero-weight policy, on a single-feature view:
    # the bias column of the gradient must be (pi - q) = (-0.5, +0.5)
    case = PatientCase(id="g", label=0, init_obs="none",
                       outcomes={"lab": "+", "img": "+"}, available=("lab", "img"))
    params = init_params(w2_model)
    target = ActionDistribution(("lab", "img"), np.array([1.0, 0.0]))
    batch = [SupervisionTarget(state=initial_state(case), target=target,
                               source="stepwise_ig")]
    grad = loss_gradient(params, batch, w2_model)
    assert grad[0, 0] == pytest.approx(-0.5, abs=1e-12)
    assert grad[1, 0] == pytest.approx(+0.5, abs=1e-12)


def _finite_difference(params, batch, model, h=1e-5):
    from seqdx.planner import featurize as feat

    def loss_at(weights):
        saved = params.weights
        params.weights = weights
        total = 0.0
        for item in batch:
            pol = policy_distribution(params, feat(item.state, model),
                                      item.target.support)
            total += kl_step_loss(item.target, pol)
        params.weights = saved
        return total / len(batch)

    grad = np.zeros_like(params.weights)
    for idx in np.ndindex(*params.weights.shape):
        bumped = params.weights.copy()
        bumped[idx] += h
        up = loss_at(bumped)
        bumped[idx] -= 2 * h
        down = loss_at(bumped)
        grad[idx] = (up - down) / (2 * h)
    return grad


def test_gradient_matches_finite_differences_random_instances():
    rng = np.random.default_rng(47)
    checked = 0
    while checked < 100:
        world = build_world(random_world_config(rng))
        model = oracle_model(world)
        cases = sample_cases(world, 2, seed=int(rng.integers(2**16)))
        params = init_params(model)
        params.weights = rng.normal(scale=0.5, size=params.weights.shape)
        batch = []
        for case in cases:
            state = initial_state(case)
            depth = rng.integers(0, len(case.available))
            for action in case.available[:depth]:
                state = update_state(state, action, case)
            support = feasible_actions(state, case)
            if not support:
                continue
            q = rng.dirichlet(np.ones(len(support)))
            batch.append(SupervisionTarget(
                state=state, target=ActionDistribution(support, q), source="x"))
        if not batch:
            continue
        analytic = loss_gradient(params, batch, model)
        numeric = _finite_difference(params, batch, model)
        rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
        assert rel.max() < 1e-4
        checked += len(batch)


def test_build_target_sources(w2_model, w2_case_pp):
    state = initial_state(w2_case_pp)
    hyper = TrainConfig()
    stepwise = build_target(w2_model, state, w2_case_pp,
                            TrainConfig(target_source="stepwise_ig"))
    np.testing.assert_allclose(stepwise.probs, [0.6, 0.4], atol=1e-12)
    exact = build_target(w2_model, state, w2_case_pp,
                         TrainConfig(target_source="exact_marginal", t_max=2))
    assert exact.probs[0] == pytest.approx(0.54469, abs=1e-5)
    greedy = build_target(w2_model, state, w2_case_pp,
                          TrainConfig(target_source="greedy_label"))
    assert greedy.support == ("lab", "img")
    assert abs(greedy.probs.sum() - 1.0) <= 1e-9


def test_collect_targets_supports_are_feasible(w2_model, w2):
    cases = sample_cases(w2, 20, seed=51)
    hyper = TrainConfig(t_max=2, theta_stop=0.95)
    for case in cases:
        rng = np.random.default_rng(0)
        for item in collect_targets(w2_model, case, hyper, rng):
            assert set(item.target.support) == set(feasible_actions(item.state, case))


def test_train_zero_epochs_returns_zero_params(w2_model, w2):
    cases = sample_cases(w2, 10, seed=0)
    params = train_planner(cases, w2_model, TrainConfig(epochs=0))
    assert np.all(params.weights == 0.0)
    assert params.meta["epoch_losses"] == []


@pytest.fixture(scope="module")
def w2_trained(w2_model, w2):
    """The 5000-case benchmark training run used by several tests."""
    cases = sample_cases(w2, 5000, seed=53)
    hyper = TrainConfig(lr=0.1, epochs=20, target_source="stepwise_ig", t_max=2)
    return train_planner(cases, w2_model, hyper)


def test_train_loss_decreases_on_w2_benchmark(w2_trained):
    losses = w2_trained.meta["epoch_losses"]
    assert len(losses) == 20
    assert losses[-1] < losses[0]
    # aggregate monotonicity: >= 80% of consecutive epoch pairs non-increasing
    drops = sum(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert drops >= 0.8 * (len(losses) - 1)


def test_trained_policy_prefers_expected_ig_action(w2_model, w2, w2_trained):
    # enumeration oracle: expected IG of each action at the empty state
    expected_ig = {}
    for j, action in enumerate(w2.action_names):
        total = 0.0
        for label in range(w2.num_diseases):
            for o, symbol in enumerate(w2.config.actions[j].outcome_alphabet):
                case = PatientCase(id="x", label=label, init_obs="none",
                                   outcomes={action: symbol}, available=(action,))
                weight = w2.priors[label] * w2.cond_tables[action][label, o]
                total += weight * info_gain(w2_model, initial_state(case), action, case)
        expected_ig[action] = total
    assert expected_ig["lab"] > expected_ig["img"]

    probe = PatientCase(id="p", label=0, init_obs="none",
                        outcomes={"lab": "+", "img": "+"}, available=("lab", "img"))
    dist = policy_distribution(w2_trained, featurize(initial_state(probe), w2_model),
                               ("lab", "img"))
    assert dist.prob_of("lab") > dist.prob_of("img")


def test_train_deterministic(w2_model, w2):
    cases = sample_cases(w2, 200, seed=57)
    hyper = TrainConfig(lr=0.1, epochs=5, t_max=2, seed=7)
    a = train_planner(cases, w2_model, hyper)
    b = train_planner(cases, w2_model, hyper)
    assert np.array_equal(a.weights, b.weights)  # bit-identical
    assert a.meta["epoch_losses"] == b.meta["epoch_losses"]


def test_masked_softmax_invariants(w2_model, w2_case_pp):
    rng = np.random.default_rng(3)
    params = init_params(w2_model)
    params.weights = rng.normal(size=params.weights.shape)
    feats = featurize(initial_state(w2_case_pp), w2_model)
    dist = policy_distribution(params, feats, ("img",))
    assert dist.support == ("img",)
    assert abs(dist.probs.sum() - 1.0) <= 1e-9
