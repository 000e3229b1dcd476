"""Incremental policy-evaluation critics.

Tabular TD(0) indexes its step size by the per-state visit count
``nu(x, n)``; the linear-function-approximation critic uses the global update
counter.  Both start from zero estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionMismatch


def harmonic(m: int) -> float:
    """``1 / m`` for a 1-based count ``m``."""
    return 1.0 / m


@dataclass
class TabularCritic:
    """Lookup-table estimates of the value ``J`` and square value ``U``.

    ``step`` maps the 1-based visit count of the updated state to a step size.
    """

    n_states: int
    step: Callable[[int], float] = harmonic
    J: np.ndarray = field(default=None)
    U: np.ndarray = field(default=None)
    visits: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.J is None:
            self.J = np.zeros(self.n_states)
        if self.U is None:
            self.U = np.zeros(self.n_states)
        if self.visits is None:
            self.visits = np.zeros(self.n_states, dtype=np.int64)

    def update(self, x: int, cost: float, x_next: int, gamma: float,
               square: bool = True) -> "TabularCritic":
        """One coupled TD(0) step on ``J`` and, if ``square``, on ``U``.

        The square-value target uses the pre-update ``J(x_next)``.
        """
        self.visits[x] += 1
        z = self.step(int(self.visits[x]))
        J, U = self.J, self.U
        j_next = J[x_next]
        J[x] += z * (cost + gamma * j_next - J[x])
        if square:
            U[x] += z * (cost * cost + 2.0 * gamma * cost * j_next + gamma * gamma * U[x_next] - U[x])
        return self

    def run(self, trajectory, gamma: float, square: bool = True) -> "TabularCritic":
        for x, _, k, y in trajectory.transitions():
            self.update(x, k, y, gamma, square)
        return self


def td0_update(critic: TabularCritic, transition, gamma: float) -> TabularCritic:
    """Value-only TD(0) step for a ``(x, cost, x_next)`` transition."""
    x, k, y = transition
    return critic.update(x, k, y, gamma, square=False)


def td0_square_update(critic: TabularCritic, transition, gamma: float) -> TabularCritic:
    """Coupled value and square-value TD step for a ``(x, cost, x_next)`` transition."""
    x, k, y = transition
    return critic.update(x, k, y, gamma, square=True)


@dataclass
class LinearCritic:
    """TD(0) with a linear architecture ``J(x) ~ v . phi(x)``.

    ``features`` has one row per state.
    """

    features: np.ndarray
    step: Callable[[int], float] = harmonic
    v: np.ndarray = field(default=None)
    n: int = 0

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2:
            raise DimensionMismatch("features must be a (n_states, d) matrix")
        if self.v is None:
            self.v = np.zeros(self.features.shape[1])
        elif np.shape(self.v) != (self.features.shape[1],):
            raise DimensionMismatch("weight vector does not match feature dimension")

    def value(self, x: int) -> float:
        return float(self.features[x] @ self.v)

    def values(self) -> np.ndarray:
        return self.features @ self.v

    def update(self, x: int, cost: float, x_next: int, gamma: float) -> "LinearCritic":
        phi, phi_next = self.features[x], self.features[x_next]
        if phi.shape != phi_next.shape or phi.shape != self.v.shape:
            raise DimensionMismatch("feature lengths differ")
        self.n += 1
        delta = cost + gamma * (self.v @ phi_next) - self.v @ phi
        self.v = self.v + self.step(self.n) * delta * phi
        return self


def td0_linear_update(critic: LinearCritic, transition, gamma: float) -> LinearCritic:
    x, k, y = transition
    return critic.update(x, k, y, gamma)


@dataclass
class RunningAverages:
    """Running estimates of the average cost and average squared cost."""

    J_bar: float = 0.0
    eta_bar: float = 0.0
    n: int = 0

    def update(self, cost: float, step: float | None = None) -> "RunningAverages":
        """Blend in one cost; the default step ``1/(n+1)`` gives the sample mean."""
        z = 1.0 / (self.n + 1) if step is None else step
        self.J_bar = (1.0 - z) * self.J_bar + z * cost
        self.eta_bar = (1.0 - z) * self.eta_bar + z * cost * cost
        self.n += 1
        return self


@dataclass
class DifferentialCritic:
    """Average-cost TD critics for the differential value ``V`` and square value ``U``."""

    n_states: int
    V: np.ndarray = field(default=None)
    U: np.ndarray = field(default=None)
    averages: RunningAverages = field(default_factory=RunningAverages)

    def __post_init__(self):
        if self.V is None:
            self.V = np.zeros(self.n_states)
        if self.U is None:
            self.U = np.zeros(self.n_states)

    def update(self, x: int, cost: float, x_next: int, zeta3: float,
               zeta4: float | None = None) -> tuple[float, float]:
        """Advance the averages, then both critics; return the TD errors ``(delta, eps)``."""
        avg = self.averages.update(cost, zeta4)
        V, U = self.V, self.U
        delta = cost - avg.J_bar + V[x_next] - V[x]
        eps = cost * cost - avg.eta_bar + U[x_next] - U[x]
        V[x] += zeta3 * delta
        U[x] += zeta3 * eps
        return float(delta), float(eps)


def differential_td_update(critic: DifferentialCritic, transition, zeta3: float,
                           zeta4: float | None = None) -> tuple[float, float]:
    x, k, y = transition
    return critic.update(x, k, y, zeta3, zeta4)
