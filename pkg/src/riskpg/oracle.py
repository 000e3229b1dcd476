"""Exact dynamic-programming quantities for small MDPs.

These dense solves are the ground truth every stochastic estimator in the
package is tested against.  They are meant for desk-scale problems only and
refuse MDPs with more than ``MAX_STATES`` states.

Conventions
-----------
* Discounted occupancies are *un-normalized*: ``sum_{x,a} pi_gamma(x, a | x0)``
  equals ``1 / (1 - gamma)``, matching ``sum_n gamma^n Pr(x_n = x)``.
* Differential value functions in the average-cost setting are pinned by
  ``V(ref_state) = U(ref_state) = 0``.
* The square-value fixed point is the per-action form
  ``U(x) = sum_a mu(a|x) [k^2 + 2 gamma k (P J)(x, a) + gamma^2 (P U)(x, a)]``,
  which is the second moment of the discounted return even when costs depend
  on the action.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MassNotCaptured, ReducibleChain, SingularSystem
from .mdp import Average, Discounted, SoftmaxPolicy, Ssp, TabularMdp
from .risk import DiscreteDistribution

MAX_STATES = 1000
RESIDUAL_TOL = 1e-10


def _guard(mdp: TabularMdp):
    if mdp.n_states > MAX_STATES:
        raise ValueError(f"oracle limited to {MAX_STATES} states, got {mdp.n_states}")


def _require(mdp: TabularMdp, kind):
    if not isinstance(mdp.setting, kind):
        raise TypeError(f"expected a {kind.__name__} MDP, got {type(mdp.setting).__name__}")


def _solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("solution contains non-finite entries")
    return x


def policy_kernel(mdp: TabularMdp, policy: SoftmaxPolicy) -> tuple[np.ndarray, np.ndarray]:
    """Policy-averaged transition matrix ``P^theta`` and cost vector ``k^theta``."""
    mu = policy.probability_table()
    P = np.einsum("xa,xay->xy", mu, mdp.transition)
    k = np.einsum("xa,xa->x", mu, mdp.cost)
    return P, k


# ---------------------------------------------------------------------------
# Discounted setting


@dataclass(frozen=True, eq=False)
class DiscountedSolution:
    J: np.ndarray
    U: np.ndarray
    Q: np.ndarray
    W: np.ndarray

    @property
    def variance(self) -> np.ndarray:
        return variance_discounted(self.J, self.U)


def solve_value(mdp: TabularMdp, policy: SoftmaxPolicy) -> np.ndarray:
    """Value function ``J = (I - gamma P^theta)^{-1} k^theta``."""
    _require(mdp, Discounted)
    _guard(mdp)
    P, k = policy_kernel(mdp, policy)
    return _solve(np.eye(mdp.n_states) - mdp.gamma * P, k)


def _one_step(mdp: TabularMdp, values: np.ndarray) -> np.ndarray:
    # (P v)(x, a) = sum_y P(y | x, a) v(y)
    return mdp.transition @ values


def action_values(mdp: TabularMdp, J: np.ndarray) -> np.ndarray:
    """``Q(x, a) = k(x, a) + gamma sum_y P(y|x,a) J(y)``."""
    return mdp.cost + mdp.gamma * _one_step(mdp, J)


def square_action_values(mdp: TabularMdp, J: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``W(x, a) = k^2 + gamma^2 (P U)(x, a) + 2 gamma k (P J)(x, a)``."""
    g, k = mdp.gamma, mdp.cost
    return k ** 2 + g ** 2 * _one_step(mdp, U) + 2.0 * g * k * _one_step(mdp, J)


def solve_square_value(mdp: TabularMdp, policy: SoftmaxPolicy,
                       J: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Second moment ``U`` of the discounted return and its action counterpart ``W``."""
    _require(mdp, Discounted)
    _guard(mdp)
    if J is None:
        J = solve_value(mdp, policy)
    g, k, mu = mdp.gamma, mdp.cost, policy.probability_table()
    P, _ = policy_kernel(mdp, policy)
    rhs = np.einsum("xa,xa->x", mu, k ** 2 + 2.0 * g * k * _one_step(mdp, J))
    U = _solve(np.eye(mdp.n_states) - g ** 2 * P, rhs)
    return U, square_action_values(mdp, J, U)


def variance_discounted(J, U) -> np.ndarray:
    J = np.asarray(J, dtype=float)
    U = np.asarray(U, dtype=float)
    if J.shape != U.shape:
        raise ValueError("J and U must have the same shape")
    return U - J ** 2


def solve_discounted(mdp: TabularMdp, policy: SoftmaxPolicy) -> DiscountedSolution:
    J = solve_value(mdp, policy)
    U, W = solve_square_value(mdp, policy, J)
    return DiscountedSolution(J=J, U=U, Q=action_values(mdp, J), W=W)


def bellman_operator(mdp: TabularMdp, policy: SoftmaxPolicy,
                     J: np.ndarray, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply the joint value / square-value operator once."""
    _require(mdp, Discounted)
    mu = policy.probability_table()
    TJ = np.einsum("xa,xa->x", mu, action_values(mdp, J))
    TU = np.einsum("xa,xa->x", mu, square_action_values(mdp, J, U))
    return TJ, TU


def bellman_residuals(mdp: TabularMdp, policy: SoftmaxPolicy,
                      J: np.ndarray, U: np.ndarray) -> tuple[float, float]:
    TJ, TU = bellman_operator(mdp, policy, J, U)
    return float(np.max(np.abs(TJ - J))), float(np.max(np.abs(TU - U)))


def discounted_occupancy(mdp: TabularMdp, policy: SoftmaxPolicy, x0: int,
                         factor: float) -> np.ndarray:
    """``sum_n factor^n Pr(x_n = x | x_0 = x0) mu(a|x)`` as an ``(S, A)`` table."""
    P, _ = policy_kernel(mdp, policy)
    d = _solve((np.eye(mdp.n_states) - factor * P).T, np.eye(mdp.n_states)[x0])
    return d[:, None] * policy.probability_table()


def _score_weighted(policy: SoftmaxPolicy, occupancy: np.ndarray, values: np.ndarray) -> np.ndarray:
    # sum_{x,a} occ(x,a) * score(x,a) * values(x,a) for the tabular softmax,
    # whose score at (x, b) is 1{b=a} - mu(b|x).
    mu = policy.probability_table()
    d = occupancy.sum(axis=1, keepdims=True)
    baseline = np.sum(mu * values, axis=1, keepdims=True)
    return (d * mu * (values - baseline)).reshape(-1)


def _value_gradients(mdp: TabularMdp, policy: SoftmaxPolicy, Q: np.ndarray) -> np.ndarray:
    # Row x holds grad J(theta, x) for every start state x.
    P, _ = policy_kernel(mdp, policy)
    M = _solve(np.eye(mdp.n_states) - mdp.gamma * P, np.eye(mdp.n_states))
    mu = policy.probability_table()
    local = (mu * (Q - np.sum(mu * Q, axis=1, keepdims=True)))   # (S, A)
    return np.einsum("sx,xa->sxa", M, local).reshape(mdp.n_states, -1)


def exact_grad_discounted(mdp: TabularMdp, policy: SoftmaxPolicy,
                          x0: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``(grad J(theta, x0), grad U(theta, x0))`` in the discounted setting."""
    _require(mdp, Discounted)
    _guard(mdp)
    g = mdp.gamma
    sol = solve_discounted(mdp, policy)
    occ = discounted_occupancy(mdp, policy, x0, g)
    grad_J = _score_weighted(policy, occ, sol.Q)

    occ2 = discounted_occupancy(mdp, policy, x0, g ** 2)
    grad_J_all = _value_gradients(mdp, policy, sol.Q)
    # sum_{x,a} occ2(x,a) k(x,a) sum_y P(y|x,a) grad J(theta, y)
    weights = occ2 * mdp.cost
    carry = np.einsum("xa,xay,yd->d", weights, mdp.transition, grad_J_all)
    grad_U = _score_weighted(policy, occ2, sol.W) + 2.0 * g * carry
    return grad_J, grad_U


# ---------------------------------------------------------------------------
# Average-cost setting


@dataclass(frozen=True, eq=False)
class AverageSolution:
    avg_cost: float
    avg_square_cost: float
    stationary: np.ndarray     # state-action distribution, shape (S, A)
    state_distribution: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    U: np.ndarray
    W: np.ndarray

    @property
    def variance(self) -> float:
        """Per-period variance ``eta - J^2``."""
        return self.avg_square_cost - self.avg_cost ** 2


def stationary_distribution(P: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    n = P.shape[0]
    A = np.eye(n) - P
    sv = np.linalg.svd(A, compute_uv=False)
    # an irreducible chain has a one-dimensional null space of I - P
    if n > 1 and sv[-2] < tol:
        raise ReducibleChain("invariant distribution is not unique")
    system = np.vstack([A.T, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    d, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    if np.any(d < -1e-12):
        raise ReducibleChain("stationary solve produced negative mass")
    return np.clip(d, 0.0, None) / np.clip(d, 0.0, None).sum()


def _poisson(P: np.ndarray, rhs: np.ndarray, ref_state: int) -> np.ndarray:
    # Solve (I - P) h = rhs with h[ref] = 0 by dropping the ref column.
    n = P.shape[0]
    A = np.eye(n) - P
    keep = [j for j in range(n) if j != ref_state]
    h = np.zeros(n)
    if keep:
        sol, *_ = np.linalg.lstsq(A[:, keep], rhs, rcond=None)
        h[keep] = sol
    return h


def average_cost_solution(mdp: TabularMdp, policy: SoftmaxPolicy,
                          ref_state: int = 0) -> AverageSolution:
    """Average cost, average square cost, stationary law and differential values."""
    _require(mdp, Average)
    _guard(mdp)
    mu = policy.probability_table()
    P, kbar = policy_kernel(mdp, policy)
    d = stationary_distribution(P)
    pi = d[:, None] * mu
    k = mdp.cost
    J = float(np.sum(pi * k))
    eta = float(np.sum(pi * k ** 2))
    k2bar = np.sum(mu * k ** 2, axis=1)
    V = _poisson(P, kbar - J, ref_state)
    U = _poisson(P, k2bar - eta, ref_state)
    Q = k - J + _one_step(mdp, V)
    W = k ** 2 - eta + _one_step(mdp, U)
    return AverageSolution(avg_cost=J, avg_square_cost=eta, stationary=pi,
                           state_distribution=d, V=V, Q=Q, U=U, W=W)


def poisson_residuals(mdp: TabularMdp, policy: SoftmaxPolicy,
                      sol: AverageSolution) -> tuple[float, float]:
    mu = policy.probability_table()
    rv = np.sum(mu * (mdp.cost + _one_step(mdp, sol.V)), axis=1) - sol.avg_cost - sol.V
    ru = np.sum(mu * (mdp.cost ** 2 + _one_step(mdp, sol.U)), axis=1) - sol.avg_square_cost - sol.U
    return float(np.max(np.abs(rv))), float(np.max(np.abs(ru)))


def exact_grad_average(mdp: TabularMdp, policy: SoftmaxPolicy) -> tuple[np.ndarray, np.ndarray]:
    """Exact ``(grad J, grad eta)`` of the average cost and average square cost."""
    sol = average_cost_solution(mdp, policy)
    return (_score_weighted(policy, sol.stationary, sol.Q),
            _score_weighted(policy, sol.stationary, sol.W))


def per_period_variance_gradient(mdp: TabularMdp, policy: SoftmaxPolicy) -> np.ndarray:
    sol = average_cost_solution(mdp, policy)
    gJ, geta = exact_grad_average(mdp, policy)
    return geta - 2.0 * sol.avg_cost * gJ


# ---------------------------------------------------------------------------
# Stochastic shortest path


def ssp_solve_value(mdp: TabularMdp, policy: SoftmaxPolicy,
                    cost: np.ndarray | None = None) -> np.ndarray:
    """Expected total cost to absorption from every state (0 at the absorbing state).

    Passing ``cost = ones`` (zero at the absorbing state) yields expected
    hitting times.
    """
    _require(mdp, Ssp)
    _guard(mdp)
    z = mdp.absorbing_state
    mu = policy.probability_table()
    k = mdp.cost if cost is None else np.asarray(cost, dtype=float)
    P, _ = policy_kernel(mdp, policy)
    kbar = np.sum(mu * k, axis=1)
    T = [x for x in range(mdp.n_states) if x != z]
    J = np.zeros(mdp.n_states)
    if T:
        J[T] = _solve(np.eye(len(T)) - P[np.ix_(T, T)], kbar[T])
    return J


def expected_hitting_time(mdp: TabularMdp, policy: SoftmaxPolicy, x0: int) -> float:
    ones = np.ones((mdp.n_states, mdp.n_actions))
    ones[mdp.absorbing_state] = 0.0
    return float(ssp_solve_value(mdp, policy, ones)[x0])


@dataclass(frozen=True, eq=False)
class CostDistribution:
    distribution: DiscreteDistribution
    residual_mass: float
    steps: int


def ssp_cost_distribution(mdp: TabularMdp, policy: SoftmaxPolicy, x0: int,
                          mass_tol: float = 1e-10, max_steps: int = 10_000,
                          decimals: int = 10) -> CostDistribution:
    """Law of the total cost ``D(theta, x0)`` by exhaustive path enumeration.

    Probability mass is propagated over ``(state, accumulated cost)`` pairs,
    costs rounded to ``decimals`` places to merge paths.  Enumeration stops
    once the unabsorbed mass drops below ``mass_tol``; the captured law is
    renormalized and the residual reported.
    """
    _require(mdp, Ssp)
    z = mdp.absorbing_state
    mu = policy.probability_table()
    absorbed: dict[float, float] = {}
    frontier: dict[tuple[int, float], float] = {(x0, 0.0): 1.0}
    if x0 == z:
        frontier = {}
        absorbed[0.0] = 1.0
    steps = 0
    while frontier and sum(frontier.values()) >= mass_tol:
        if steps >= max_steps:
            break
        steps += 1
        nxt: dict[tuple[int, float], float] = {}
        for (x, c), p in frontier.items():
            for a in range(mdp.n_actions):
                pa = p * mu[x, a]
                if pa == 0.0:
                    continue
                c2 = round(c + mdp.cost[x, a], decimals)
                for y in np.flatnonzero(mdp.transition[x, a]):
                    q = pa * mdp.transition[x, a, y]
                    if y == z:
                        absorbed[c2] = absorbed.get(c2, 0.0) + q
                    else:
                        key = (int(y), c2)
                        nxt[key] = nxt.get(key, 0.0) + q
        frontier = nxt
    residual = float(sum(frontier.values()))
    if residual >= mass_tol:
        raise MassNotCaptured(f"{residual:.3g} probability mass unabsorbed after {steps} steps")
    values = np.array(sorted(absorbed))
    probs = np.array([absorbed[v] for v in values])
    probs = probs / probs.sum()
    return CostDistribution(DiscreteDistribution(values, probs), residual, steps)


def horizon_return_distribution(mdp: TabularMdp, policy: SoftmaxPolicy, x0: int, horizon: int,
                                decimals: int = 10, max_atoms: int = 200_000) -> DiscreteDistribution:
    """Exact law of the ``horizon``-step discounted return from ``x0``.

    This is the quantity sampled by fixed-horizon trajectories in the
    discounted setting.  Returns are rounded to ``decimals`` places to merge
    paths; enumeration aborts once more than ``max_atoms`` (state, return)
    pairs are live.
    """
    _require(mdp, Discounted)
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    mu = policy.probability_table()
    g = mdp.gamma
    frontier: dict[tuple[int, float], float] = {(x0, 0.0): 1.0}
    for t in range(horizon):
        scale = g ** t
        nxt: dict[tuple[int, float], float] = {}
        for (x, c), p in frontier.items():
            for a in range(mdp.n_actions):
                pa = p * mu[x, a]
                if pa == 0.0:
                    continue
                c2 = round(c + scale * mdp.cost[x, a], decimals)
                for y in np.flatnonzero(mdp.transition[x, a]):
                    key = (int(y), c2)
                    nxt[key] = nxt.get(key, 0.0) + pa * mdp.transition[x, a, y]
        if len(nxt) > max_atoms:
            raise MassNotCaptured(f"return law exceeds {max_atoms} atoms at step {t + 1}")
        frontier = nxt
    law: dict[float, float] = {}
    for (_, c), p in frontier.items():
        law[c] = law.get(c, 0.0) + p
    values = np.array(sorted(law))
    probs = np.array([law[v] for v in values])
    return DiscreteDistribution(values, probs / probs.sum())
