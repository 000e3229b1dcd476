"""SPSA and likelihood-ratio gradient estimators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (DimensionMismatch, EmptySample, EmptyTail, NonFiniteEstimate,
                     TruncatedEpisodePresent, ZeroDelta)
from .mdp import SoftmaxPolicy, Trajectory


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Simultaneous perturbation ``delta * direction`` with ``direction`` in {-1, +1}^d."""

    delta: float
    direction: np.ndarray

    def __post_init__(self):
        if not self.delta > 0:
            raise ZeroDelta(f"perturbation size must be positive, got {self.delta}")
        direction = np.asarray(self.direction, dtype=float).reshape(-1)
        if not np.all(np.abs(direction) == 1.0):
            raise ValueError("perturbation directions must be exactly +1 or -1")
        object.__setattr__(self, "direction", direction)

    @property
    def step(self) -> np.ndarray:
        return self.delta * self.direction


@dataclass(frozen=True, eq=False)
class GradientEstimate:
    vector: np.ndarray
    n_samples: int = 1

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float)
        if not np.all(np.isfinite(v)):
            raise NonFiniteEstimate("gradient estimate has non-finite components")
        object.__setattr__(self, "vector", v)


def bernoulli_perturbation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Fair i.i.d. +-1 components."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return np.where(rng.random(d) < 0.5, -1.0, 1.0)


def spsa_two_sided(f_plus: float, f_minus: float, pert: Perturbation) -> GradientEstimate:
    """Balanced estimate ``(f(theta + d D) - f(theta - d D)) / (2 d D_i)``."""
    return GradientEstimate((f_plus - f_minus) / (2.0 * pert.delta * pert.direction), 2)


def spsa_one_sided(f_plus: float, f_at: float, pert: Perturbation) -> GradientEstimate:
    """One-sided estimate ``(f(theta + d D) - f(theta)) / (d D_i)``."""
    return GradientEstimate((f_plus - f_at) / (pert.delta * pert.direction), 2)


def _episode_arrays(episodes: Sequence[Trajectory], policy: SoftmaxPolicy):
    if len(episodes) == 0:
        raise EmptySample("no episodes supplied")
    if any(not ep.terminated for ep in episodes):
        raise TruncatedEpisodePresent("truncated episodes cannot enter a likelihood-ratio estimate")
    scores = np.stack([ep.score_sum for ep in episodes])
    if scores.shape[1] != policy.dim:
        raise DimensionMismatch("episode scores do not match the policy dimension")
    costs = np.array([ep.total_cost for ep in episodes])
    return costs, scores


def lr_total_cost_gradient(episodes: Sequence[Trajectory],
                           policy: SoftmaxPolicy) -> GradientEstimate:
    """Average of ``D * psi`` over terminated SSP episodes."""
    costs, scores = _episode_arrays(episodes, policy)
    return GradientEstimate(costs @ scores / len(costs), len(costs))


def lr_cvar_gradient(episodes: Sequence[Trajectory], policy: SoftmaxPolicy,
                     xi: float, beta: float) -> GradientEstimate:
    """Tail-conditional estimate of the CVaR gradient.

    Averages ``(D - xi) psi`` over episodes with ``D >= xi``, dividing by the
    empirical tail probability floored at ``1/n``.  ``beta`` only enters
    through ``xi``; it is accepted to keep the call site explicit.
    """
    if not np.isfinite(xi):
        raise NonFiniteEstimate("VaR estimate must be finite")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    costs, scores = _episode_arrays(episodes, policy)
    n = len(costs)
    tail = costs >= xi
    if not np.any(tail):
        raise EmptyTail(f"no episode cost at or above xi={xi}")
    weighted = ((costs - xi) * tail) @ scores / n
    prob = max(tail.sum() / n, 1.0 / n)
    return GradientEstimate(weighted / prob, n)
