import itertools

import numpy as np
import pytest

from riskpg import oracle
from riskpg.environments import bandit_ssp, grid_ssp
from riskpg.errors import (EmptySample, EmptyTail, NonFiniteEstimate, TruncatedEpisodePresent,
                           ZeroDelta)
from riskpg.gradients import (GradientEstimate, Perturbation, bernoulli_perturbation,
                              lr_cvar_gradient, lr_total_cost_gradient, spsa_one_sided,
                              spsa_two_sided)
from riskpg.mdp import SoftmaxPolicy, simulate_episode
from riskpg.rng import stream


def test_perturbation_validation():
    with pytest.raises(ZeroDelta):
        Perturbation(0.0, [1, -1])
    with pytest.raises(ValueError):
        Perturbation(0.1, [1, 0.5])


def test_bernoulli_components():
    d = bernoulli_perturbation(1000, stream(0, "b"))
    assert set(d.tolist()) == {-1.0, 1.0}
    assert abs(d.mean()) < 0.15


def test_two_sided_exact_on_quadratic():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    f = lambda t: 0.5 * t @ A @ t + t.sum()
    theta = np.array([0.3, -0.7])
    for signs in itertools.product([-1.0, 1.0], repeat=2):
        pert = Perturbation(0.1, np.array(signs))
        g = spsa_two_sided(f(theta + pert.step), f(theta - pert.step), pert).vector
        directional = (A @ theta + 1) @ pert.direction
        assert np.allclose(g, directional / pert.direction)


def test_linear_example_average_over_directions():
    f = lambda t: t[0] + 2 * t[1]
    est = [spsa_two_sided(f(Perturbation(0.5, s).step), f(-Perturbation(0.5, s).step),
                          Perturbation(0.5, s)).vector
           for s in ([1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0])]
    assert np.array_equal(np.mean(est, axis=0), [1.0, 2.0])


def test_one_sided_bias_halves():
    f = lambda t: t @ t
    theta = np.array([1.0, -2.0])
    pert = lambda d: Perturbation(d, np.array([1.0, 1.0]))
    bias = [spsa_one_sided(f(theta + pert(d).step), f(theta), pert(d)).vector
            - (2 * theta).sum() for d in (0.2, 0.1)]
    ratio = bias[0] / bias[1]
    assert np.all((1.8 <= ratio) & (ratio <= 2.2))


def test_non_finite_estimate_rejected():
    with pytest.raises(NonFiniteEstimate):
        GradientEstimate(np.array([np.inf]))


def test_lr_gradient_matches_oracle():
    mdp = bandit_ssp(1, 3, 3, 0.5)
    pol = SoftmaxPolicy.for_mdp(mdp)
    rng = stream(0, "lr")
    eps = [simulate_episode(mdp, pol, 1, rng) for _ in range(20_000)]
    est = lr_total_cost_gradient(eps, pol).vector
    per = np.array([e.total_cost * e.score_sum for e in eps])
    se = per.std(axis=0) / np.sqrt(len(eps))
    assert np.allclose(est[2:4], [-0.5, 0.5], atol=4 * se[2:4].max())


def test_lr_rejects_truncated_and_empty():
    mdp = grid_ssp(4, 4)
    pol = SoftmaxPolicy.for_mdp(mdp)
    ep = simulate_episode(mdp, pol, 15, stream(0, "t"), max_steps=2, strict=False)
    with pytest.raises(TruncatedEpisodePresent):
        lr_total_cost_gradient([ep], pol)
    with pytest.raises(EmptySample):
        lr_total_cost_gradient([], pol)


def test_cvar_gradient_tail_and_sign():
    mdp = bandit_ssp(1, 0, 2.2, 0.5)
    pol = SoftmaxPolicy.for_mdp(mdp)
    rng = stream(1, "cvar")
    eps = [simulate_episode(mdp, pol, 1, rng) for _ in range(5000)]
    g = lr_cvar_gradient(eps, pol, 0.5, 0.9).vector
    # the tail {D >= 0.5} is reached more by the safe arm (D=1) than the
    # risky one, but risky contributes the larger excess: 2.2 - 0.5 vs 0.5
    assert g[3] > 0 > g[2]
    with pytest.raises(EmptyTail):
        lr_cvar_gradient(eps, pol, 5.0, 0.9)


def test_cvar_gradient_of_tail_conditional_mean():
    # finite differences of E[D - xi | D >= xi] P(D >= xi)/P(D >= xi) at fixed xi
    mdp = bandit_ssp(1, 0, 2.2, 0.5)
    theta = np.array([0, 0, 0.4, -0.2, 0, 0])
    pol = SoftmaxPolicy.for_mdp(mdp, theta)
    rng = stream(2, "cvar")
    eps = [simulate_episode(mdp, pol, 1, rng) for _ in range(40_000)]
    xi = 0.5

    def tail_excess(t):
        law = oracle.ssp_cost_distribution(mdp, SoftmaxPolicy.for_mdp(mdp, t), 1).distribution
        mask = law.values >= xi
        return np.dot(law.probs[mask], law.values[mask] - xi)

    h = 1e-6
    fd = np.array([(tail_excess(theta + h * e) - tail_excess(theta - h * e)) / (2 * h)
                   for e in np.eye(6)])
    law = oracle.ssp_cost_distribution(mdp, pol, 1).distribution
    p_tail = law.probs[law.values >= xi].sum()
    est = lr_cvar_gradient(eps, pol, xi, 0.9).vector * (np.mean([e.total_cost >= xi for e in eps]))
    assert np.allclose(est[2:4], fd[2:4], atol=0.02)
    assert p_tail > 0
