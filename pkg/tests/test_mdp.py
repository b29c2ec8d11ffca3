import numpy as np
import pytest

from poolrl.errors import ConvergenceError, DimensionError, SearchSpaceError, ValidationError
from poolrl.mdp import (
    MINIMIZE,
    DeterministicPolicy,
    FiniteHorizonMdp,
    Trajectory,
    Step,
    bellman_backup,
    enumerate_policies_oracle,
    iter_policies,
    mdp_from_text,
    mdp_to_text,
    load_mdp,
    save_mdp,
    policy_evaluation,
    policy_iteration,
    policy_value,
    simulate_episode,
    value_iteration,
)


def random_mdp(rng, H=3, S=2, A=2, sense="maximize"):
    r = rng.uniform(-1, 1, size=(H, S, A))
    p = rng.dirichlet(np.ones(S), size=(H, S, A))
    return FiniteHorizonMdp(r, p, sense=sense)


def chain_mdp():
    # One state, two actions: action 1 pays 1, action 0 pays 0.
    r = np.zeros((2, 1, 2))
    r[:, 0, 1] = 1.0
    return FiniteHorizonMdp(r, np.ones((2, 1, 2, 1)))


def test_value_iteration_simple_chain():
    q, policy, v = value_iteration(chain_mdp())
    assert v == 2.0
    assert policy.actions.tolist() == [[1], [1]]
    assert q.layer(3).tolist() == [[0.0, 0.0]]


def test_ties_go_to_lowest_action():
    mdp = FiniteHorizonMdp(np.zeros((2, 2, 3)), np.full((2, 2, 3, 2), 0.5))
    _, policy, v = value_iteration(mdp)
    assert v == 0.0
    assert not policy.actions.any()


def test_bellman_backup_shape_and_values():
    mdp = chain_mdp()
    layer = bellman_backup(mdp, np.array([5.0]), 1)
    assert layer.tolist() == [[5.0, 6.0]]
    with pytest.raises(DimensionError):
        bellman_backup(mdp, np.zeros(2), 1)
    with pytest.raises(DimensionError):
        bellman_backup(mdp, np.zeros(1), 3)


def test_policy_evaluation_matches_value_iteration_exactly():
    rng = np.random.default_rng(0)
    for _ in range(20):
        mdp = random_mdp(rng)
        q, policy, v = value_iteration(mdp)
        assert policy_value(mdp, policy) == v
        assert np.array_equal(policy_evaluation(mdp, policy), q.values())


def test_policy_iteration_agrees_with_value_iteration():
    rng = np.random.default_rng(1)
    for _ in range(20):
        mdp = random_mdp(rng, H=4, S=3, A=3)
        _, _, v = value_iteration(mdp)
        assert policy_value(mdp, policy_iteration(mdp)) == pytest.approx(v, abs=1e-12)


def test_policy_iteration_step_cap():
    mdp = random_mdp(np.random.default_rng(2), H=4)
    with pytest.raises(ConvergenceError) as info:
        policy_iteration(mdp, max_sweeps=0)
    assert isinstance(info.value.best, DeterministicPolicy)


def test_enumeration_oracle_and_cap():
    mdp = random_mdp(np.random.default_rng(3), H=2)
    best, optimal, worst, pessimal = enumerate_policies_oracle(mdp)
    assert len(list(iter_policies(mdp))) == 16
    assert best == pytest.approx(value_iteration(mdp)[2], abs=1e-12)
    assert worst <= best
    assert all(policy_value(mdp, p) == pytest.approx(worst) for p in pessimal)
    with pytest.raises(SearchSpaceError):
        list(iter_policies(mdp, cap=10))


def test_validation_errors():
    with pytest.raises(DimensionError):
        FiniteHorizonMdp(np.zeros((2, 2)), np.zeros((2, 2, 2)))
    p = np.full((1, 2, 1, 2), 0.5)
    p[0, 0, 0] = [0.7, 0.2]
    with pytest.raises(ValidationError, match="sums to"):
        FiniteHorizonMdp(np.zeros((1, 2, 1)), p)
    with pytest.raises(ValidationError):
        FiniteHorizonMdp(np.zeros((1, 1, 1)), np.ones((1, 1, 1, 1)), sense="sideways")
    with pytest.raises(ValidationError, match="absorbing"):
        FiniteHorizonMdp(np.zeros((1, 2, 1)), np.full((1, 2, 1, 2), 0.5), absorbing=(False, True))


def test_model_arrays_are_read_only():
    mdp = chain_mdp()
    with pytest.raises(ValueError):
        mdp.mean_reward[0, 0, 0] = 1.0


def test_policy_sequence_round_trip():
    policy = DeterministicPolicy.from_sequence("0110")
    assert policy.sequence() == "0110"
    assert policy.at(2, 0) == 1 and policy.at(2, 1) == 0
    assert policy == DeterministicPolicy.from_sequence([0, 1, 1, 0])
    assert len({policy, DeterministicPolicy.from_sequence("0110")}) == 1


def test_policy_check_rejects_bad_shapes():
    mdp = chain_mdp()
    with pytest.raises(DimensionError):
        policy_evaluation(mdp, DeterministicPolicy(np.zeros((3, 1), dtype=int)))
    with pytest.raises(ValidationError):
        policy_evaluation(mdp, DeterministicPolicy(np.full((2, 1), 5)))


def test_trajectory_chain_validation():
    with pytest.raises(ValidationError):
        Trajectory((Step(1, 0, 0, 0.0, 1), Step(2, 0, 0, 0.0, 0)), 0)
    traj = Trajectory((Step(1, 0, 1, 1.5, 1),), 0)
    assert traj.final_state == 1 and traj.total_reward == 1.5


def test_simulate_episode_is_seeded_and_truncates_on_absorption():
    p = np.zeros((3, 2, 1, 2))
    p[:, 0, 0] = [0.0, 1.0]
    p[:, 1, 0] = [0.0, 1.0]
    r = np.full((3, 2, 1), -1.0)
    r[:, 1, :] = 0.0
    mdp = FiniteHorizonMdp(r, p, sense=MINIMIZE, absorbing=(False, True))
    policy = DeterministicPolicy(np.zeros((3, 2), dtype=int))
    traj = simulate_episode(mdp, policy, np.random.default_rng(0))
    assert len(traj) == 1 and traj.final_state == 1
    assert mdp.objective(traj.total_reward) == 1.0

    rich = random_mdp(np.random.default_rng(4), H=5, S=3)
    pol = value_iteration(rich)[1]
    a = simulate_episode(rich, pol, np.random.default_rng(9))
    b = simulate_episode(rich, pol, np.random.default_rng(9))
    assert a.steps == b.steps


def test_simulated_returns_average_to_policy_value():
    mdp = random_mdp(np.random.default_rng(5), H=3, S=2)
    policy = value_iteration(mdp)[1]
    rng = np.random.default_rng(6)
    returns = [simulate_episode(mdp, policy, rng).total_reward for _ in range(20000)]
    assert np.mean(returns) == pytest.approx(policy_value(mdp, policy), abs=0.03)


def test_mdp_text_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    mdp = random_mdp(rng, H=2, S=3, A=2, sense=MINIMIZE)
    path = tmp_path / "model.mdp"
    save_mdp(mdp, path)
    back = load_mdp(path)
    assert back.sense == MINIMIZE
    assert np.array_equal(back.mean_reward, mdp.mean_reward)
    assert np.array_equal(back.transition, mdp.transition)
    assert mdp_to_text(back) == mdp_to_text(mdp)


def test_mdp_text_reports_line_numbers():
    text = mdp_to_text(chain_mdp())
    lines = text.splitlines()
    idx = next(i for i, line in enumerate(lines) if line.startswith("1 0 0") and "[" not in line and len(line.split()) == 4)
    lines[idx] = "1 0 0 oops"
    with pytest.raises(ValidationError) as info:
        mdp_from_text("\n".join(lines), source="bad.mdp")
    assert info.value.line == idx + 1
    assert "bad.mdp" in str(info.value)
