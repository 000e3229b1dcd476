"""Seeded benchmark MDPs with known structure."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .mdp import Average, Discounted, Setting, Ssp, TabularMdp

MIXING = 0.01


def random_mdp(seed: int, n_states: int, n_actions: int, setting: Setting | None = None,
               mixing: float = MIXING) -> TabularMdp:
    """Random dense MDP with costs in [0, 1].

    Each row is a normalized vector of uniform positives blended with the
    uniform distribution at weight ``mixing``, so every transition has
    probability at least ``mixing / n_states`` and the chain is irreducible
    under every policy.
    """
    if not 1 <= n_states <= 50:
        raise ValueError("random_mdp is limited to 1..50 states")
    if setting is None:
        setting = Discounted(0.9)
    if isinstance(setting, Ssp):
        raise ValueError("random_mdp builds discounted or average-cost MDPs")
    rng = np.random.default_rng(seed)
    raw = rng.random((n_states, n_actions, n_states)) + 1e-3
    raw /= raw.sum(axis=2, keepdims=True)
    P = (1.0 - mixing) * raw + mixing / n_states
    cost = rng.random((n_states, n_actions))
    return TabularMdp(P, cost, setting)


GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))   # up, down, left, right


def grid_ssp(width: int, height: int, p_slip: float = 0.0, goal: int = 0) -> TabularMdp:
    """Grid world SSP with unit step cost and an absorbing, cost-free goal cell.

    Cells are numbered row-major.  Actions move up/down/left/right; moves into
    a wall stay put.  With probability ``p_slip`` the move is replaced by one
    of the four directions chosen uniformly.
    """
    n = width * height
    if not 1 <= n <= 100:
        raise ValueError("grid_ssp is limited to 100 cells")
    if not 0.0 <= p_slip <= 0.5:
        raise ValueError("p_slip must lie in [0, 0.5]")

    def move(cell, d):
        r, c = divmod(cell, width)
        r2, c2 = r + d[0], c + d[1]
        if 0 <= r2 < height and 0 <= c2 < width:
            return r2 * width + c2
        return cell

    P = np.zeros((n, 4, n))
    cost = np.ones((n, 4))
    for s in range(n):
        if s == goal:
            P[s, :, s] = 1.0
            cost[s] = 0.0
            continue
        for a, d in enumerate(GRID_MOVES):
            P[s, a, move(s, d)] += 1.0 - p_slip
            for d2 in GRID_MOVES:
                P[s, a, move(s, d2)] += p_slip / 4.0
    return TabularMdp(P, cost, Ssp(goal))


def grid_cell(width: int, row: int, col: int) -> int:
    return row * width + col


# state layout shared by the single-decision bandit
BANDIT_ABSORBING, BANDIT_DECISION, BANDIT_PENALTY = 0, 1, 2
SAFE, RISKY = 0, 1


def bandit_ssp(cost_safe: float = 1.0, cost_risky_low: float = 0.0,
               cost_risky_high: float = 2.2, p_high: float = 0.5) -> TabularMdp:
    """Single-decision SSP: a safe action with a fixed cost, a risky one with two outcomes.

    States are absorbing (0), decision (1) and penalty (2).  Safe costs
    ``cost_safe`` and absorbs.  Risky costs ``cost_risky_low`` then, with
    probability ``p_high``, passes through the penalty state which charges
    ``cost_risky_high - cost_risky_low`` before absorbing.  Episode totals are
    therefore ``cost_safe``, ``cost_risky_low`` or ``cost_risky_high``.
    """
    if not 0.0 < p_high < 1.0:
        raise ValueError("p_high must lie in (0, 1)")
    z, dec, pen = BANDIT_ABSORBING, BANDIT_DECISION, BANDIT_PENALTY
    P = np.zeros((3, 2, 3))
    cost = np.zeros((3, 2))
    P[z, :, z] = 1.0
    P[dec, SAFE, z] = 1.0
    P[dec, RISKY, z] = 1.0 - p_high
    P[dec, RISKY, pen] = p_high
    P[pen, :, z] = 1.0
    cost[dec, SAFE] = cost_safe
    cost[dec, RISKY] = cost_risky_low
    cost[pen, :] = cost_risky_high - cost_risky_low
    return TabularMdp(P, cost, Ssp(z))


def two_stream(costs_a=(0.0, 0.0), costs_b=(100.0, -100.0)) -> TabularMdp:
    """Two-state alternating chain; action 0 observes stream ``a``, action 1 stream ``b``."""
    P = np.zeros((2, 2, 2))
    P[0, :, 1] = 1.0
    P[1, :, 0] = 1.0
    cost = np.array([[costs_a[0], costs_b[0]],
                     [costs_a[1], costs_b[1]]], dtype=float)
    return TabularMdp(P, cost, Average())


RS_SAFE, RS_LOW, RS_HIGH = 0, 1, 2


def risky_safe(cost_safe: float = 1.0, cost_low: float = 0.0, cost_high: float = 2.2,
               p_high: float = 0.5, setting: Setting | None = None) -> TabularMdp:
    """Continuing risky/safe chain for the discounted and average-cost settings.

    The state records the outcome of the previous choice: safe (0), risky-low
    (1) or risky-high (2), and the cost ``k(x, a)`` is the outcome cost of
    ``x``.  In every state the safe action leads to state 0; the risky action
    leads to state 2 with probability ``p_high`` and to state 1 otherwise.
    """
    if setting is None:
        setting = Discounted(0.5)
    if isinstance(setting, Ssp):
        raise ValueError("risky_safe is a continuing chain")
    P = np.zeros((3, 2, 3))
    P[:, SAFE, RS_SAFE] = 1.0
    P[:, RISKY, RS_HIGH] = p_high
    P[:, RISKY, RS_LOW] = 1.0 - p_high
    state_cost = np.array([cost_safe, cost_low, cost_high], dtype=float)
    cost = np.repeat(state_cost[:, None], 2, axis=1)
    return TabularMdp(P, cost, setting)


def _setting_from(params: dict) -> Setting | None:
    kind = params.pop("setting", None)
    gamma = params.pop("gamma", None)
    if kind is None:
        return Discounted(gamma) if gamma is not None else None
    if kind == "discounted":
        return Discounted(0.9 if gamma is None else gamma)
    if kind == "average":
        return Average()
    raise ValueError(f"unknown setting {kind!r}")


BUILDERS = {
    "random_mdp": random_mdp,
    "grid_ssp": grid_ssp,
    "bandit_ssp": bandit_ssp,
    "two_stream": two_stream,
    "risky_safe": risky_safe,
}


@dataclass(frozen=True)
class EnvSpec:
    """Declarative environment description, as it appears in an experiment config."""

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BUILDERS:
            raise ValueError(f"unknown environment kind {self.kind!r}; "
                             f"expected one of {sorted(BUILDERS)}")

    def build(self) -> TabularMdp:
        params = dict(self.params)
        if self.kind in ("random_mdp", "risky_safe"):
            setting = _setting_from(params)
            if setting is not None:
                params["setting"] = setting
        for key in ("costs_a", "costs_b"):
            if key in params:
                params[key] = tuple(params[key])
        return BUILDERS[self.kind](**params)
