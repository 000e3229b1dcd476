"""Estimators for VaR, CVaR and the CPT-value of a cost distribution.

CVaR follows the Rockafellar-Uryasev convention: with
``V(xi) = xi + E[(X - xi)_+] / (1 - beta)``, VaR is the leftmost minimizer of
``V`` and CVaR is ``V(VaR)``.  On distributions with atoms this can exceed the
naive conditional tail mean; for samples ``{1, 2, 3, 4}`` at ``beta = 0.75``
both VaR candidates 3 and 4 minimize ``V`` and CVaR is 4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import EmptySample, InvalidDistribution

PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite-support law, support sorted ascending with atoms merged."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        if v.shape != p.shape or v.size == 0:
            raise InvalidDistribution("values and probs must be nonempty and equally long")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(p))):
            raise InvalidDistribution("values and probabilities must be finite")
        if np.any(p < 0):
            raise InvalidDistribution("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > PROB_TOL:
            raise InvalidDistribution(f"probabilities sum to {p.sum()!r}, not 1")
        order = np.argsort(v, kind="stable")
        v, p = v[order], p[order]
        uniq, inv = np.unique(v, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, p)
        object.__setattr__(self, "values", uniq)
        object.__setattr__(self, "probs", merged)

    @classmethod
    def from_mapping(cls, mapping: Mapping[float, float]) -> "DiscreteDistribution":
        items = sorted(mapping.items())
        return cls([v for v, _ in items], [p for _, p in items])

    def as_dict(self) -> dict[float, float]:
        return dict(zip(self.values.tolist(), self.probs.tolist()))

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.values, size=n, p=self.probs)


# ---------------------------------------------------------------------------
# VaR / CVaR


@dataclass
class VarCvarState:
    """Running stochastic-approximation estimates of VaR (``xi``) and CVaR (``c``)."""

    beta: float
    xi: float = 0.0
    c: float = 0.0
    m: int = 0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")

    def step(self, sample: float, zeta: float) -> "VarCvarState":
        return var_cvar_sa_step(self, sample, zeta)


def ru_objective(xi: float, sample: float, beta: float) -> float:
    """``v(xi, D) = xi + (D - xi)_+ / (1 - beta)``."""
    return xi + max(sample - xi, 0.0) / (1.0 - beta)


def var_cvar_sa_step(state: VarCvarState, sample: float, zeta: float) -> VarCvarState:
    """One Robbins-Monro step on ``V`` for VaR and one averaging step for CVaR.

    Updates ``state`` in place and returns it.
    """
    if zeta <= 0:
        raise ValueError("step size must be positive")
    xi_prev = state.xi
    state.m += 1
    state.c -= (state.c - ru_objective(xi_prev, sample, state.beta)) / state.m
    hit = 1.0 if sample >= xi_prev else 0.0
    state.xi = xi_prev - zeta * (1.0 - hit / (1.0 - state.beta))
    return state


def _weighted_var_cvar(values: np.ndarray, probs: np.ndarray, beta: float) -> tuple[float, float]:
    # values ascending.  V is convex piecewise linear with kinks on the
    # support, so its minimum over the reals is attained on the support.
    tail_mass = np.cumsum((probs * values)[::-1])[::-1]   # E[X 1{X >= v_j}]
    tail_prob = np.cumsum(probs[::-1])[::-1]               # P(X >= v_j)
    above_mass = np.append(tail_mass[1:], 0.0)             # E[X 1{X > v_j}]
    above_prob = np.append(tail_prob[1:], 0.0)
    V = values + (above_mass - values * above_prob) / (1.0 - beta)
    best = V.min()
    scale = max(1.0, float(np.max(np.abs(values))))
    j = int(np.flatnonzero(V <= best + 1e-12 * scale)[0])
    return float(values[j]), float(V[j])


def batch_var_cvar(samples, beta: float) -> tuple[float, float]:
    """VaR and CVaR of the empirical law of ``samples`` at level ``beta``."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise EmptySample("batch_var_cvar needs at least one sample")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    x = np.sort(x)
    return _weighted_var_cvar(x, np.full(x.size, 1.0 / x.size), beta)


def distribution_var_cvar(dist: DiscreteDistribution, beta: float) -> tuple[float, float]:
    """Exact VaR and CVaR of a finite-support law."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    return _weighted_var_cvar(dist.values, dist.probs, beta)


# ---------------------------------------------------------------------------
# Cumulative prospect theory


def default_tversky_weight(p, exponent: float = 0.69):
    """Probability weight ``p^c / (p^c + (1-p)^c)^(1/c)``.

    Inflates small probabilities and deflates large ones; ``w(0) = 0`` and
    ``w(1) = 1`` exactly.
    """
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("weights are defined on [0, 1]")
    a = p ** exponent
    b = (1.0 - p) ** exponent
    w = a / (a + b) ** (1.0 / exponent)
    w = np.where(p == 0.0, 0.0, np.where(p == 1.0, 1.0, w))
    return w if w.ndim else float(w)


def _gain(x):
    return np.maximum(np.asarray(x, dtype=float), 0.0)


def _loss(x):
    return np.maximum(-np.asarray(x, dtype=float), 0.0)


def _identity_weight(p):
    return np.asarray(p, dtype=float)


@dataclass(frozen=True)
class CptModel:
    """Utilities ``u_plus``/``u_minus`` and probability weights ``w_plus``/``w_minus``.

    All four callables must accept and return numpy arrays.
    """

    u_plus: Callable = _gain
    u_minus: Callable = _loss
    w_plus: Callable = default_tversky_weight
    w_minus: Callable = default_tversky_weight

    def check(self, grid_size: int = 1000, support=None) -> list[str]:
        """Return the list of violated model invariants (empty when valid)."""
        problems = []
        p = np.linspace(0.0, 1.0, grid_size)
        for name in ("w_plus", "w_minus"):
            w = np.asarray(getattr(self, name)(p), dtype=float)
            if abs(w[0]) > 0 or abs(w[-1] - 1.0) > 0:
                problems.append(f"{name} must satisfy w(0)=0 and w(1)=1")
            if np.any(np.diff(w) < -1e-15):
                problems.append(f"{name} must be nondecreasing")
            if np.any((w < 0) | (w > 1)):
                problems.append(f"{name} must map into [0, 1]")
        x = np.linspace(-10, 10, grid_size) if support is None else np.asarray(support, float)
        up = np.asarray(self.u_plus(x), dtype=float)
        um = np.asarray(self.u_minus(x), dtype=float)
        if np.any(up[x <= 0] != 0) or np.any(np.diff(up) < 0) or np.any(up < 0):
            problems.append("u_plus must vanish on x <= 0, be nondecreasing and nonnegative")
        if np.any(um[x >= 0] != 0) or np.any(np.diff(um) > 0) or np.any(um < 0):
            problems.append("u_minus must vanish on x >= 0, be nonincreasing and nonnegative")
        return problems


def identity_cpt_model() -> CptModel:
    """Model under which the CPT-value reduces to the expectation."""
    return CptModel(w_plus=_identity_weight, w_minus=_identity_weight)


def default_cpt_model(exponent: float = 0.69) -> CptModel:
    if exponent == 0.69:
        return CptModel()

    def w(p):
        return default_tversky_weight(p, exponent)

    return CptModel(w_plus=w, w_minus=w)


def cpt_estimate(samples, model: CptModel) -> float:
    """CPT-value of the empirical distribution, via order statistics."""
    x = np.sort(np.asarray(samples, dtype=float).reshape(-1))
    n = x.size
    if n == 0:
        raise EmptySample("cpt_estimate needs at least one sample")
    i = np.arange(1, n + 1)
    w_plus = np.asarray(model.w_plus((n + 1 - i) / n)) - np.asarray(model.w_plus((n - i) / n))
    w_minus = np.asarray(model.w_minus(i / n)) - np.asarray(model.w_minus((i - 1) / n))
    gains = float(np.dot(np.asarray(model.u_plus(x)), w_plus))
    losses = float(np.dot(np.asarray(model.u_minus(x)), w_minus))
    return gains - losses


def _tail_integral(utilities: np.ndarray, probs: np.ndarray, weight: Callable) -> float:
    # int_0^inf w(P(u > z)) dz for a finite law of nonnegative utilities
    order = np.argsort(utilities, kind="stable")
    u, p = utilities[order], probs[order]
    levels, inv = np.unique(u, return_inverse=True)
    mass = np.zeros(levels.size)
    np.add.at(mass, inv, p)
    tail = np.clip(np.cumsum(mass[::-1])[::-1], 0.0, 1.0)   # P(u >= level_j)
    widths = np.diff(np.concatenate(([0.0], levels)))
    keep = levels > 0
    return float(np.dot(widths[keep], np.asarray(weight(tail[keep]), dtype=float)))


def cpt_exact(dist: DiscreteDistribution, model: CptModel) -> float:
    """CPT-value of a finite-support law from exact tail probabilities."""
    if not isinstance(dist, DiscreteDistribution):
        dist = DiscreteDistribution.from_mapping(dist)
    up = np.asarray(model.u_plus(dist.values), dtype=float)
    um = np.asarray(model.u_minus(dist.values), dtype=float)
    return _tail_integral(up, dist.probs, model.w_plus) - _tail_integral(um, dist.probs, model.w_minus)
