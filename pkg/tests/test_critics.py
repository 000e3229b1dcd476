import numpy as np
import pytest

from riskpg import oracle
from riskpg.critics import (DifferentialCritic, LinearCritic, RunningAverages, TabularCritic,
                            differential_td_update, td0_linear_update, td0_square_update,
                            td0_update)
from riskpg.environments import random_mdp
from riskpg.errors import DimensionMismatch
from riskpg.mdp import Average, Discounted, SoftmaxPolicy, TabularMdp, simulate_trajectory
from riskpg.rng import stream


def test_first_visit_takes_full_step():
    c = TabularCritic(3)
    td0_square_update(c, (0, 2.0, 1), 0.5)
    assert c.J[0] == 2.0 and c.U[0] == 4.0 and c.visits[0] == 1


def test_square_target_uses_pre_update_next_value():
    c = TabularCritic(2, J=np.array([0.0, 1.0]), U=np.array([0.0, 3.0]))
    c.update(1, 1.0, 1, 0.5)   # self-loop: U target must read J(1) before the update
    assert c.J[1] == pytest.approx(1.5)
    assert c.U[1] == pytest.approx(1.0 + 2 * 0.5 * 1.0 * 1.0 + 0.25 * 3.0)


def test_value_only_update_leaves_U():
    c = TabularCritic(2)
    td0_update(c, (0, 1.0, 1), 0.9)
    assert c.U[0] == 0.0


@pytest.mark.parametrize("gamma,step", [(0.5, None), (0.8, lambda m: m ** -0.7)])
def test_td_converges_to_oracle(gamma, step):
    mdp = random_mdp(3, 4, 2, Discounted(gamma))
    pol = SoftmaxPolicy.for_mdp(mdp)
    sol = oracle.solve_discounted(mdp, pol)
    c = TabularCritic(4) if step is None else TabularCritic(4, step=step)
    c.run(simulate_trajectory(mdp, pol, 0, stream(0, "td"), 100_000), gamma)
    assert np.max(np.abs(c.J - sol.J)) < 0.05
    assert np.max(np.abs(c.U - sol.U)) < 0.1


def test_linear_one_hot_equals_tabular_with_constant_step():
    mdp = random_mdp(5, 3, 2, Discounted(0.7))
    traj = simulate_trajectory(mdp, SoftmaxPolicy.for_mdp(mdp), 0, stream(5, "lin"), 2000)
    tab = TabularCritic(3, step=lambda m: 0.05)
    lin = LinearCritic(np.eye(3), step=lambda n: 0.05)
    for x, _, k, y in traj.transitions():
        td0_update(tab, (x, k, y), 0.7)
        td0_linear_update(lin, (x, k, y), 0.7)
    assert np.array_equal(tab.J, lin.values())


def test_linear_dimension_checks():
    with pytest.raises(DimensionMismatch):
        LinearCritic(np.ones(3))
    with pytest.raises(DimensionMismatch):
        LinearCritic(np.eye(3), v=np.zeros(2))


def test_running_averages_default_is_sample_mean():
    avg = RunningAverages()
    for k in [1.0, 2.0, 6.0]:
        avg.update(k)
    assert avg.J_bar == pytest.approx(3.0) and avg.eta_bar == pytest.approx(41 / 3)


def test_differential_td_constant_cost_has_zero_errors():
    P = np.full((3, 1, 3), 1 / 3)
    mdp = TabularMdp(P, np.full((3, 1), 2.0), Average())
    traj = simulate_trajectory(mdp, SoftmaxPolicy.for_mdp(mdp), 0, stream(0, "d"), 1000)
    critic = DifferentialCritic(3)
    errs = [differential_td_update(critic, (x, k, y), 0.1)[0] for x, _, k, y in traj.transitions()]
    assert np.mean(np.abs(errs)) < 1e-12


def test_differential_td_tracks_average_cost():
    mdp = random_mdp(2, 3, 2, Average())
    pol = SoftmaxPolicy.for_mdp(mdp)
    sol = oracle.average_cost_solution(mdp, pol)
    critic = DifferentialCritic(3)
    traj = simulate_trajectory(mdp, pol, 0, stream(2, "avg"), 50_000)
    for n, (x, _, k, y) in enumerate(traj.transitions()):
        critic.update(x, k, y, (n + 1) ** -0.6, (n + 1) ** -0.6)
    assert critic.averages.J_bar == pytest.approx(sol.avg_cost, abs=0.03)
    assert critic.averages.eta_bar - critic.averages.J_bar ** 2 == pytest.approx(sol.variance, abs=0.03)
    V = critic.V - critic.V[0]
    assert np.max(np.abs(V - sol.V)) < 0.1
