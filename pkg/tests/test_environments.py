import numpy as np
import pytest

from riskpg import oracle
from riskpg.environments import (BANDIT_DECISION, RISKY, SAFE, EnvSpec, bandit_ssp, grid_cell,
                                 grid_ssp, random_mdp, risky_safe, two_stream)
from riskpg.mdp import Average, Discounted, SoftmaxPolicy, Ssp
from riskpg.risk import distribution_var_cvar


def _bandit_policy(mdp, p_risky):
    theta = np.zeros(mdp.dim)
    if p_risky in (0.0, 1.0):
        theta[2 * BANDIT_DECISION + RISKY] = 60.0 if p_risky else -60.0
    else:
        theta[2 * BANDIT_DECISION + RISKY] = np.log(p_risky / (1 - p_risky))
    return SoftmaxPolicy.for_mdp(mdp, theta)


def test_random_mdp_seeded_and_mixed():
    a, b = random_mdp(4, 6, 3), random_mdp(4, 6, 3)
    assert np.array_equal(a.transition, b.transition) and np.array_equal(a.cost, b.cost)
    assert np.max(np.abs(a.transition.sum(axis=2) - 1)) <= 1e-12
    assert a.transition.min() >= 0.01 / 6
    assert 0 <= a.cost.min() and a.cost.max() <= 1


def test_random_mdp_irreducible_for_test_seeds():
    for seed in range(10):
        mdp = random_mdp(seed, 5, 2, Average())
        pol = SoftmaxPolicy(np.random.default_rng(seed).normal(size=mdp.dim) * 3, 5, 2)
        d = oracle.stationary_distribution(oracle.policy_kernel(mdp, pol)[0])
        assert np.all(d > 0)


def test_random_mdp_guard():
    with pytest.raises(ValueError):
        random_mdp(0, 51, 2)
    with pytest.raises(ValueError):
        random_mdp(0, 3, 2, Ssp(0))


def test_grid_goal_absorbing_and_one_step():
    mdp = grid_ssp(2, 1)
    assert np.all(mdp.transition[0, :, 0] == 1.0) and np.all(mdp.cost[0] == 0.0)
    J = oracle.ssp_solve_value(mdp, SoftmaxPolicy.for_mdp(mdp, _towards_left(mdp)))
    assert J[1] == pytest.approx(1.0)


def _towards_left(mdp):
    theta = np.full((mdp.n_states, 4), -30.0)
    theta[:, 2] = 30.0
    return theta.reshape(-1)


def test_grid_shortest_path_is_manhattan():
    mdp = grid_ssp(2, 2)
    theta = np.full((4, 4), -40.0)
    theta[:, 0] = 40.0            # up
    theta[grid_cell(2, 0, 1), :] = -40.0
    theta[grid_cell(2, 0, 1), 2] = 40.0   # left on the top row
    pol = SoftmaxPolicy.for_mdp(mdp, theta.reshape(-1))
    law = oracle.ssp_cost_distribution(mdp, pol, grid_cell(2, 1, 1)).distribution
    assert law.values.tolist() == [2.0]
    assert law.probs[0] == pytest.approx(1.0)


def test_grid_slip_bounds():
    with pytest.raises(ValueError):
        grid_ssp(3, 3, p_slip=0.6)
    with pytest.raises(ValueError):
        grid_ssp(11, 10)


def test_bandit_moments():
    mdp = bandit_ssp(1, 0, 2.2, 0.5)
    risky = oracle.ssp_cost_distribution(mdp, _bandit_policy(mdp, 1.0), BANDIT_DECISION).distribution
    safe = oracle.ssp_cost_distribution(mdp, _bandit_policy(mdp, 0.0), BANDIT_DECISION).distribution
    assert risky.mean() == pytest.approx(1.1)
    assert np.dot(risky.probs, risky.values ** 2) - risky.mean() ** 2 == pytest.approx(1.21)
    assert safe.mean() == pytest.approx(1.0)
    assert safe.as_dict()[1.0] == pytest.approx(1.0)
    assert distribution_var_cvar(risky, 0.9)[1] == pytest.approx(2.2)


def test_bandit_uniform_gradient():
    mdp = bandit_ssp(1, 0, 2.2, 0.5)
    pol = SoftmaxPolicy.for_mdp(mdp)
    J = oracle.ssp_solve_value(mdp, pol)
    h = 1e-6
    grad = []
    for i in range(mdp.dim):
        e = np.zeros(mdp.dim)
        e[i] = h
        grad.append((oracle.ssp_solve_value(mdp, SoftmaxPolicy.for_mdp(mdp, e))[1]
                     - oracle.ssp_solve_value(mdp, SoftmaxPolicy.for_mdp(mdp, -e))[1]) / (2 * h))
    expected = 0.5 * (np.array([1.0, 1.1]) - J[1])
    assert np.allclose(grad[2:4], expected, atol=1e-8)


def test_two_stream_example():
    mdp = two_stream()
    quiet = SoftmaxPolicy.for_mdp(mdp, np.array([40.0, -40.0, 40.0, -40.0]))
    loud = SoftmaxPolicy.for_mdp(mdp, np.array([-40.0, 40.0, -40.0, 40.0]))
    a, b = oracle.average_cost_solution(mdp, quiet), oracle.average_cost_solution(mdp, loud)
    assert a.avg_cost == pytest.approx(0.0, abs=1e-9) and a.variance == pytest.approx(0.0, abs=1e-9)
    assert b.avg_cost == pytest.approx(0.0, abs=1e-9) and b.variance == pytest.approx(1e4)


def test_risky_safe_layout():
    mdp = risky_safe(setting=Average())
    assert isinstance(mdp.setting, Average)
    assert np.allclose(mdp.transition[:, SAFE, 0], 1.0)
    assert mdp.cost[:, 0].tolist() == [1.0, 0.0, 2.2]
    with pytest.raises(ValueError):
        risky_safe(setting=Ssp(0))


def test_env_spec_round_trip():
    mdp = EnvSpec("random_mdp", {"seed": 3, "n_states": 4, "n_actions": 2, "setting": "average"}).build()
    assert isinstance(mdp.setting, Average)
    mdp = EnvSpec("risky_safe", {"gamma": 0.7}).build()
    assert mdp.gamma == 0.7
    mdp = EnvSpec("two_stream", {"costs_a": [1, 1], "costs_b": [2, 0]}).build()
    assert mdp.cost.tolist() == [[1, 2], [1, 0]]
    with pytest.raises(ValueError):
        EnvSpec("traffic")


def test_default_random_setting_is_discounted():
    assert isinstance(random_mdp(0, 3, 2).setting, Discounted)
