import numpy as np
import pytest

from poolrl.environments import (
    SHIPPED,
    Environment,
    ReadmissionClass,
    ReadmissionSpec,
    behavior_policy,
    environment_from_text,
    environment_to_text,
    generate_historical_dataset,
    load_environment,
    readmission_mdp,
    sample_feature,
    save_environment,
    synthetic_as_readmission,
    synthetic_weekly_probs,
)
from poolrl.errors import ValidationError
from poolrl.mdp import DeterministicPolicy, policy_value, simulate_episode, value_iteration


def test_readmission_mdp_costs_and_structure():
    mdp = readmission_mdp([[0.2, 0.1]], 1.0, 10.0)
    assert mdp.objective(mdp.mean_reward[0, 0]).tolist() == [2.0, 2.0]
    assert mdp.absorbing == (False, True)
    assert mdp.objective(mdp.transition_reward[0, 0, 1]).tolist() == [1.0, 11.0]
    assert mdp.objective(value_iteration(mdp)[2]) == 2.0


def test_readmission_mdp_rejects_bad_probabilities():
    with pytest.raises(ValidationError):
        readmission_mdp([[1.2, 0.1]], 1.0, 10.0)
    with pytest.raises(ValidationError):
        readmission_mdp([0.2, 0.1], 1.0, 10.0)


def test_every_shipped_environment_loads():
    for name in SHIPPED:
        env = Environment(load_environment(name))
        assert env.structure.horizon == env.spec.horizon


def test_shipped_reported_policies_are_optimal():
    for name in ("historical_clusters", "synthetic", "synthetic_weekly", "priority_pair_a", "priority_pair_b"):
        env = Environment(load_environment(name))
        for cls, mdp in zip(env.classes, env.class_mdps):
            assert value_iteration(mdp)[1].sequence() == cls.reported_policy, (name, cls.name)


def test_environment_text_round_trip(tmp_path):
    for name in ("historical_clusters", "synthetic"):
        spec = load_environment(name)
        path = tmp_path / f"{name}.env"
        save_environment(spec, path)
        again = load_environment(str(path))
        assert environment_to_text(again) == environment_to_text(spec)


def test_environment_errors_carry_line_numbers():
    text = (
        "kind = readmission\nhorizon = 1\nintervention_cost = 1\nreadmission_penalty = 10\n"
        "[classes]\nonly target 1 0 0.5\n"
    )
    with pytest.raises(ValidationError) as info:
        environment_from_text(text, source="bad.env")
    assert info.value.line == 6
    with pytest.raises(ValidationError):
        load_environment("no-such-environment")


def test_warns_when_intervention_raises_risk():
    with pytest.warns(UserWarning):
        ReadmissionSpec(1, 1.0, 10.0, (ReadmissionClass("odd", [[0.1, 0.2]]),))


def test_synthetic_weekly_probs_scale_the_linear_risk():
    spec = load_environment("synthetic")
    probs = synthetic_weekly_probs(spec, 0, x=0.2)
    risk = np.array([0.5 * 0.2 + 0.1, -0.055 + 0.5 * 0.2 + 0.1])
    assert probs[0] == pytest.approx(0.15 * risk)
    assert probs[2] == pytest.approx(0.35 * risk)


def test_sample_feature_stays_in_valid_range():
    spec = load_environment("synthetic")
    rng = np.random.default_rng(0)
    for cls in spec.classes:
        lo, hi = cls.feature_bounds()
        xs = [sample_feature(cls, rng) for _ in range(200)]
        assert min(xs) > lo and max(xs) < hi
        assert np.mean(xs) == pytest.approx(cls.feature_mean, abs=0.01)


def test_effective_feature_reproduces_reported_average():
    spec = load_environment("synthetic")
    for cls in spec.classes:
        assert cls.risk(0, cls.effective_feature) == pytest.approx(cls.reported_risk[0])
    as_readmission = synthetic_as_readmission(spec, use_effective_feature=True)
    assert len(as_readmission.classes) == 4


def test_fast_patient_simulation_matches_generic_rollout():
    env = Environment(load_environment("synthetic"))
    for seed in range(50):
        policy = DeterministicPolicy(np.random.default_rng(seed + 100).integers(0, 2, (4, 2)))
        r1, r2 = np.random.default_rng(seed), np.random.default_rng(seed)
        x1, model = env.draw_patient(seed % 4, r1)
        slow = simulate_episode(model, policy, r1, features=x1)
        x2 = env.draw_features(seed % 4, r2)
        fast = env.simulate_patient(seed % 4, x2, policy, r2)
        assert slow.steps == fast.steps and slow.features == fast.features


def test_with_roles_reassigns_and_drops():
    env = Environment(load_environment("historical_clusters")).with_roles(["cluster1"], ["cluster2", "cluster3"])
    assert [c.name for c in env.classes] == ["cluster1", "cluster2", "cluster3"]
    assert env.indices("target") == [0]
    with pytest.raises(ValidationError):
        Environment(load_environment("historical_clusters")).with_roles(["nobody"], None)


def test_behavior_policies():
    mdp = Environment(load_environment("synthetic")).class_mdps[0]
    rng = np.random.default_rng(0)
    assert behavior_policy("zero", mdp)(rng).sequence() == "0000"
    assert behavior_policy("optimal", mdp)(rng).sequence() == "0011"
    assert behavior_policy("1010", mdp)(rng).sequence() == "1010"
    assert {behavior_policy("uniform", mdp)(rng).sequence() for _ in range(50)} > {"0000"}
    with pytest.raises(ValidationError):
        behavior_policy("sometimes", mdp)


def test_historical_dataset_sizes_and_privacy():
    env = Environment(load_environment("synthetic"))
    data = generate_historical_dataset(env, "uniform", {"history0": 300, "history1": 200}, np.random.default_rng(1))
    assert data.groups == ("history0", "history1")
    assert data.privacy == "samples"
    assert data.aggregates.sample_size[:, 0, 0, :].sum(axis=1).tolist() == [300, 200]
    assert data.samples.features is not None
    private = generate_historical_dataset(env, "uniform", {"history0": 300, "history1": 200}, np.random.default_rng(1), privacy="aggregates-only")
    assert private.samples is None
    assert np.array_equal(private.aggregates.sample_size, data.aggregates.sample_size)
    assert np.array_equal(private.aggregates.transition, data.aggregates.transition)


def test_historical_frequencies_match_truth():
    env = Environment(load_environment("historical_clusters")).with_roles(["cluster1"], ["cluster4"])
    data = generate_historical_dataset(env, "zero", {"cluster4": 20000}, np.random.default_rng(2))
    p_hat = data.aggregates.transition[0, 0, 0, 0, 1]
    assert p_hat == pytest.approx(0.0886, abs=0.006)
    cost = -data.aggregates.mean_reward[0, 0, 0, 0]
    assert cost == pytest.approx(10 * p_hat)


def test_class_value_matches_simulation():
    env = Environment(load_environment("priority_pair_a"))
    mdp = env.class_mdps[1]
    policy = value_iteration(mdp)[1]
    rng = np.random.default_rng(3)
    costs = [mdp.objective(env.simulate_patient(1, None, policy, rng).total_reward) for _ in range(20000)]
    assert np.mean(costs) == pytest.approx(mdp.objective(policy_value(mdp, policy)), abs=0.08)
