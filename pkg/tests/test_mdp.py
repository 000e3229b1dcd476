import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riskpg.errors import DimensionMismatch, TruncatedEpisode
from riskpg.environments import bandit_ssp, grid_ssp, two_stream
from riskpg.mdp import (Average, Discounted, SoftmaxPolicy, Ssp, TabularMdp, discounted_return,
                        simulate_episode, simulate_step, simulate_trajectory)
from riskpg.rng import stream


def test_rejects_bad_rows():
    P = np.array([[[0.5, 0.4]], [[0.0, 1.0]]])
    with pytest.raises(ValueError, match="sum to 1"):
        TabularMdp(P, np.zeros((2, 1)), Average())


def test_rejects_shape_mismatch():
    P = np.ones((2, 1, 2)) / 2
    with pytest.raises(DimensionMismatch):
        TabularMdp(P, np.zeros((3, 1)), Average())


def test_absorbing_state_must_be_free():
    P = np.zeros((2, 1, 2))
    P[0, 0, 0] = 1.0
    P[1, 0, 0] = 1.0
    cost = np.array([[0.5], [1.0]])
    with pytest.raises(ValueError, match="absorbing"):
        TabularMdp(P, cost, Ssp(0))


def test_discount_range():
    with pytest.raises(ValueError):
        Discounted(1.0)


def test_arrays_are_read_only():
    mdp = two_stream()
    with pytest.raises(ValueError):
        mdp.cost[0, 0] = 3.0


@given(st.lists(st.floats(-20, 20), min_size=6, max_size=6))
def test_softmax_rows_are_distributions(theta):
    pol = SoftmaxPolicy(np.array(theta), 3, 2)
    probs = pol.probability_table()
    assert np.allclose(probs.sum(axis=1), 1.0)
    assert np.all(probs >= 0)


@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6), st.integers(0, 2), st.integers(0, 1))
def test_score_matches_finite_difference(theta, x, a):
    theta = np.array(theta)
    pol = SoftmaxPolicy(theta, 3, 2)
    h = 1e-6
    fd = np.array([(np.log(SoftmaxPolicy(theta + h * e, 3, 2).action_probabilities(x)[a])
                    - np.log(SoftmaxPolicy(theta - h * e, 3, 2).action_probabilities(x)[a])) / (2 * h)
                   for e in np.eye(6)])
    assert np.allclose(pol.score(x, a), fd, atol=1e-6)


def test_score_sums_to_zero_under_policy():
    pol = SoftmaxPolicy(np.array([0.3, -1.0, 2.0, 0.1]), 2, 2)
    for x in range(2):
        mean = sum(pol.action_probabilities(x)[a] * pol.score(x, a) for a in range(2))
        assert np.allclose(mean, 0.0)


def test_theta_dimension_checked():
    with pytest.raises(DimensionMismatch):
        SoftmaxPolicy(np.zeros(5), 3, 2)


def test_simulation_deterministic_in_seed():
    mdp = bandit_ssp()
    pol = SoftmaxPolicy.for_mdp(mdp)
    a = simulate_episode(mdp, pol, 1, stream(3, "ep"))
    b = simulate_episode(mdp, pol, 1, stream(3, "ep"))
    assert np.array_equal(a.costs, b.costs) and np.array_equal(a.actions, b.actions)


def test_zero_probability_outcomes_never_drawn():
    mdp = bandit_ssp()
    pol = SoftmaxPolicy(np.array([0, 0, 50.0, -50.0, 0, 0]), 3, 2)
    rng = stream(0, "safe")
    for _ in range(200):
        a, k, y = simulate_step(mdp, pol, 1, rng)
        assert (a, k, y) == (0, 1.0, 0)


def test_episode_score_sum_matches_per_step_scores():
    mdp = grid_ssp(3, 3, p_slip=0.2)
    pol = SoftmaxPolicy(np.random.default_rng(1).normal(size=mdp.dim), 9, 4)
    ep = simulate_episode(mdp, pol, 8, stream(1, "grid"))
    manual = sum(pol.score(x, a) for x, a in zip(ep.states, ep.actions))
    assert np.allclose(ep.score_sum, manual)
    assert ep.terminated and ep.next_states[-1] == 0


def test_truncation_raises_with_partial_trajectory():
    mdp = grid_ssp(5, 5)
    pol = SoftmaxPolicy.for_mdp(mdp)
    with pytest.raises(TruncatedEpisode) as info:
        simulate_episode(mdp, pol, 24, stream(0, "t"), max_steps=3)
    assert len(info.value.trajectory) == 3
    traj = simulate_episode(mdp, pol, 24, stream(0, "t"), max_steps=3, strict=False)
    assert not traj.terminated


def test_episode_from_absorbing_state_is_empty():
    mdp = bandit_ssp()
    ep = simulate_episode(mdp, SoftmaxPolicy.for_mdp(mdp), 0, stream(0, "z"))
    assert len(ep) == 0 and ep.terminated and ep.total_cost == 0.0


def test_continuing_trajectory_length_and_return():
    mdp = two_stream((1.0, 1.0), (1.0, 1.0))
    traj = simulate_trajectory(mdp, SoftmaxPolicy.for_mdp(mdp), 0, stream(0, "c"), 50)
    assert len(traj) == 50
    assert discounted_return(traj, 0.5) == pytest.approx(2.0 * (1 - 0.5 ** 50))
