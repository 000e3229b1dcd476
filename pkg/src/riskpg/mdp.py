"""Finite MDPs, tabular softmax policies and trajectory simulation.

Costs are minimized throughout.  A :class:`TabularMdp` carries its setting
(discounted, average-cost or stochastic shortest path) so that downstream code
can check it is being used in the right regime.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from .errors import DimensionMismatch, TruncatedEpisode

ROW_TOL = 1e-12
DEFAULT_MAX_STEPS = 10_000


@dataclass(frozen=True)
class Discounted:
    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"discount factor must lie in (0, 1), got {self.gamma}")


@dataclass(frozen=True)
class Average:
    pass


@dataclass(frozen=True)
class Ssp:
    absorbing_state: int = 0


Setting = Union[Discounted, Average, Ssp]


def _sampling_table(probs: np.ndarray) -> list[float]:
    # Entries at and after the last positive mass are pushed above 1 so a
    # uniform draw can never land on a zero-probability tail outcome.
    cum = np.cumsum(probs)
    last = int(np.flatnonzero(probs > 0)[-1])
    cum[last:] = 2.0
    return cum.tolist()


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Finite state/action MDP with a dense transition tensor.

    Parameters
    ----------
    transition : array, shape (n_states, n_actions, n_states)
        ``transition[x, a, y]`` is the probability of moving from ``x`` to
        ``y`` under action ``a``.
    cost : array, shape (n_states, n_actions)
        Single-stage cost ``k(x, a)``.
    setting : Discounted | Average | Ssp
    """

    transition: np.ndarray
    cost: np.ndarray
    setting: Setting

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        k = np.array(self.cost, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise DimensionMismatch(f"transition must be (S, A, S), got {P.shape}")
        if k.shape != P.shape[:2]:
            raise DimensionMismatch(f"cost must be {P.shape[:2]}, got {k.shape}")
        if np.any(P < 0.0) or np.any(P > 1.0):
            raise ValueError("transition probabilities must lie in [0, 1]")
        if np.max(np.abs(P.sum(axis=2) - 1.0)) > ROW_TOL:
            raise ValueError("every transition row must sum to 1")
        if not np.all(np.isfinite(k)):
            raise ValueError("costs must be finite")
        if isinstance(self.setting, Ssp):
            z = self.setting.absorbing_state
            if not 0 <= z < P.shape[0]:
                raise ValueError(f"absorbing state {z} out of range")
            if np.any(P[z, :, z] != 1.0) or np.any(k[z] != 0.0):
                raise ValueError("absorbing state must self-loop with probability 1 at zero cost")
        P.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "cost", k)

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def dim(self) -> int:
        """Dimension of a tabular policy parameter for this MDP."""
        return self.n_states * self.n_actions

    @property
    def gamma(self) -> float:
        if not isinstance(self.setting, Discounted):
            raise TypeError("gamma is only defined for discounted MDPs")
        return self.setting.gamma

    @property
    def absorbing_state(self) -> int:
        if not isinstance(self.setting, Ssp):
            raise TypeError("absorbing state is only defined for SSP MDPs")
        return self.setting.absorbing_state

    @cached_property
    def _next_state_tables(self) -> list[list[list[float]]]:
        return [[_sampling_table(self.transition[x, a]) for a in range(self.n_actions)]
                for x in range(self.n_states)]

    @cached_property
    def _cost_list(self) -> list[list[float]]:
        return self.cost.tolist()


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass(frozen=True, eq=False)
class SoftmaxPolicy:
    """Tabular softmax policy, one logit ``theta[x, a]`` per state-action pair.

    ``theta`` is stored flat (state-major) so it can be handed directly to the
    optimizer; :attr:`table` gives the ``(n_states, n_actions)`` view.
    """

    theta: np.ndarray
    n_states: int
    n_actions: int
    _probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        if theta.size != self.n_states * self.n_actions:
            raise DimensionMismatch(
                f"theta has {theta.size} entries, expected {self.n_states * self.n_actions}")
        theta.setflags(write=False)
        probs = softmax_rows(theta.reshape(self.n_states, self.n_actions))
        probs.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "_probs", probs)

    @classmethod
    def for_mdp(cls, mdp: TabularMdp, theta=None) -> "SoftmaxPolicy":
        if theta is None:
            theta = np.zeros(mdp.dim)
        return cls(theta, mdp.n_states, mdp.n_actions)

    @property
    def dim(self) -> int:
        return self.theta.size

    @property
    def table(self) -> np.ndarray:
        return self.theta.reshape(self.n_states, self.n_actions)

    def action_probabilities(self, x: int) -> np.ndarray:
        return self._probs[x]

    def probability_table(self) -> np.ndarray:
        """All action distributions, shape ``(n_states, n_actions)``."""
        return self._probs

    def score(self, x: int, a: int) -> np.ndarray:
        """Gradient of ``log mu(a | x)`` with respect to the flat ``theta``."""
        g = np.zeros(self.dim)
        block = slice(x * self.n_actions, (x + 1) * self.n_actions)
        g[block] = -self._probs[x]
        g[x * self.n_actions + a] += 1.0
        return g

    @cached_property
    def _action_tables(self) -> list[list[float]]:
        return [_sampling_table(p) for p in self._probs]


def action_probabilities(policy: SoftmaxPolicy, x: int) -> np.ndarray:
    return policy.action_probabilities(x)


def policy_score(policy: SoftmaxPolicy, x: int, a: int) -> np.ndarray:
    return policy.score(x, a)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A simulated sample path.

    ``score_sum`` is the sum of policy scores along the path, accumulated once
    during simulation so that estimators never recompute it under a policy
    that may since have changed.
    """

    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray
    next_states: np.ndarray
    terminated: bool
    score_sum: np.ndarray

    def __len__(self) -> int:
        return len(self.costs)

    @property
    def total_cost(self) -> float:
        return float(np.sum(self.costs))

    def transitions(self):
        return zip(self.states.tolist(), self.actions.tolist(),
                   self.costs.tolist(), self.next_states.tolist())


def simulate_step(mdp: TabularMdp, policy: SoftmaxPolicy, x: int,
                  rng: np.random.Generator) -> tuple[int, float, int]:
    """Draw ``a ~ mu(.|x)`` then ``x' ~ P(.|x, a)``; return ``(a, k(x, a), x')``."""
    a = bisect_right(policy._action_tables[x], rng.random())
    y = bisect_right(mdp._next_state_tables[x][a], rng.random())
    return a, mdp._cost_list[x][a], y


def _rollout(mdp, policy, x0, rng, n_steps, stop_state):
    states, actions, costs, nexts = [], [], [], []
    counts = np.zeros((policy.n_states, policy.n_actions))
    x = x0
    for _ in range(n_steps):
        if x == stop_state:
            break
        a, k, y = simulate_step(mdp, policy, x, rng)
        states.append(x)
        actions.append(a)
        costs.append(k)
        nexts.append(y)
        counts[x, a] += 1.0
        x = y
    # sum of scores = sum_m (e_{x_m a_m} - mu(.|x_m)) in the x_m block
    visits = counts.sum(axis=1, keepdims=True)
    score_sum = (counts - visits * policy.probability_table()).reshape(-1)
    return (np.array(states, dtype=int), np.array(actions, dtype=int),
            np.array(costs, dtype=float), np.array(nexts, dtype=int), score_sum)


def simulate_episode(mdp: TabularMdp, policy: SoftmaxPolicy, x0: int,
                     rng: np.random.Generator, max_steps: int = DEFAULT_MAX_STEPS,
                     strict: bool = True) -> Trajectory:
    """Run an SSP episode from ``x0`` until absorption.

    Raises :class:`TruncatedEpisode` when ``max_steps`` transitions pass
    without absorption; with ``strict=False`` the truncated trajectory is
    returned instead, flagged ``terminated=False``.
    """
    if not isinstance(mdp.setting, Ssp):
        raise TypeError("simulate_episode needs an SSP")
    z = mdp.absorbing_state
    s, a, k, y, psi = _rollout(mdp, policy, x0, rng, max_steps, z)
    terminated = x0 == z or (len(y) > 0 and y[-1] == z)
    traj = Trajectory(s, a, k, y, bool(terminated), psi)
    if not terminated and strict:
        raise TruncatedEpisode(f"episode from state {x0} not absorbed within {max_steps} steps",
                               traj)
    return traj


def simulate_trajectory(mdp: TabularMdp, policy: SoftmaxPolicy, x0: int,
                        rng: np.random.Generator, n_steps: int) -> Trajectory:
    """Run exactly ``n_steps`` transitions of a continuing (non-SSP) chain."""
    s, a, k, y, psi = _rollout(mdp, policy, x0, rng, n_steps, stop_state=-1)
    return Trajectory(s, a, k, y, False, psi)


def discounted_return(trajectory: Trajectory, gamma: float) -> float:
    costs = trajectory.costs
    if costs.size == 0:
        return 0.0
    return float(np.dot(gamma ** np.arange(costs.size), costs))
