"""Projected two-timescale primal-dual updates and schedule checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, NonFiniteEstimate


@dataclass(frozen=True, eq=False)
class BoxConstraint:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionMismatch("box bounds must have equal length")
        if np.any(lo > hi):
            raise ValueError("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, d: int, low: float = -10.0, high: float = 10.0) -> "BoxConstraint":
        return cls(np.full(d, float(low)), np.full(d, float(high)))

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, v) -> bool:
        v = np.asarray(v, dtype=float)
        return bool(np.all(v >= self.lower) and np.all(v <= self.upper))


def project_box(v, box: BoxConstraint) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != box.lower.shape:
        raise DimensionMismatch(f"vector of shape {v.shape} against box of dimension {box.dim}")
    return np.minimum(np.maximum(box.lower, v), box.upper)


@dataclass(frozen=True)
class PowerSchedule:
    """``coef / (n + 1) ** exponent`` for a 0-based iteration index ``n``."""

    coef: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if not self.coef > 0:
            raise ValueError("schedule coefficients must be positive")
        if self.exponent < 0:
            raise ValueError("schedule exponents must be nonnegative")

    def __call__(self, n: int) -> float:
        return self.coef / (n + 1) ** self.exponent


@dataclass(frozen=True)
class BatchSchedule:
    """Samples per outer iteration: ``m0 + ceil(coef * n ** exponent)``."""

    m0: int = 1
    coef: float = 1.0
    exponent: float = 0.5

    def __post_init__(self):
        if self.m0 < 1 or not self.coef > 0 or self.exponent < 0:
            raise ValueError("batch schedule needs m0 >= 1, coef > 0, exponent >= 0")

    def __call__(self, n: int) -> int:
        return self.m0 + math.ceil(self.coef * n ** self.exponent)


@dataclass(frozen=True)
class Schedules:
    """Step sizes for the dual (zeta1), primal (zeta2), critic/VaR (zeta3) and
    averaging (zeta4) recursions, plus the SPSA perturbation size and batch sizes."""

    zeta1: PowerSchedule = field(default_factory=lambda: PowerSchedule(1.0, 1.0))
    zeta2: PowerSchedule = field(default_factory=lambda: PowerSchedule(1.0, 0.75))
    zeta3: PowerSchedule = field(default_factory=lambda: PowerSchedule(1.0, 0.7))
    zeta4: PowerSchedule = field(default_factory=lambda: PowerSchedule(1.0, 0.7))
    delta: PowerSchedule = field(default_factory=lambda: PowerSchedule(1.0, 0.1))
    batch: BatchSchedule = field(default_factory=BatchSchedule)


@dataclass(frozen=True)
class Condition:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    mode: str
    conditions: tuple[Condition, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failures(self) -> list[Condition]:
        return [c for c in self.conditions if not c.passed]

    def describe(self) -> str:
        lines = [f"{self.mode}: {'pass' if self.passed else 'FAIL'}"]
        for c in self.conditions:
            lines.append(f"  [{'ok' if c.passed else 'FAIL'}] {c.name} {c.detail}".rstrip())
        return "\n".join(lines)


MODES = ("A4", "A4prime")


def validate_schedules(schedules: Schedules, mode: str = "A4", *, holder_order: float = 1.0,
                       critic_timescale: bool = False, var_recursion: bool = False
                       ) -> ValidationReport:
    """Check power-law schedules against the step-size conditions of ``mode``.

    ``mode="A4"`` checks divergent and square-summable primal/dual steps with
    the dual on the slower timescale.  ``mode="A4prime"`` adds a vanishing
    perturbation with ``sum (zeta2/delta)^2 < inf`` and the batch growth
    condition ``m_n^(holder_order/2) * delta_n -> inf``.  ``critic_timescale``
    adds the ordering needed when a TD critic runs on its own faster
    timescale; ``var_recursion`` checks the VaR step sizes.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    conds: list[Condition] = []
    named = {"zeta1": schedules.zeta1, "zeta2": schedules.zeta2, "zeta3": schedules.zeta3,
             "zeta4": schedules.zeta4, "delta": schedules.delta}
    bad = [k for k, s in named.items() if not isinstance(s, PowerSchedule)]
    if not isinstance(schedules.batch, BatchSchedule):
        bad.append("batch")
    conds.append(Condition("power-law family", not bad, f"non power-law: {bad}" if bad else ""))
    if bad:
        return ValidationReport(mode, tuple(conds))

    p1, p2 = schedules.zeta1.exponent, schedules.zeta2.exponent
    conds += [
        Condition("A4: zeta1 divergent sum", p1 <= 1.0, f"(p1={p1})"),
        Condition("A4: zeta2 divergent sum", p2 <= 1.0, f"(p2={p2})"),
        Condition("A4: zeta1 square-summable", p1 > 0.5, f"(p1={p1})"),
        Condition("A4: zeta2 square-summable", p2 > 0.5, f"(p2={p2})"),
        Condition("A4: zeta1 = o(zeta2)", p1 > p2, f"(p1={p1}, p2={p2})"),
    ]
    if mode == "A4prime":
        pd = schedules.delta.exponent
        q = schedules.batch.exponent
        conds += [
            Condition("A4': delta_n -> 0", pd > 0.0, f"(p_delta={pd})"),
            Condition("A4': sum (zeta2/delta)^2 finite", p2 - pd > 0.5,
                      f"(p2 - p_delta={p2 - pd:.6g})"),
            Condition("batch: m_n^(a/2) delta_n -> inf", q * holder_order / 2.0 > pd,
                      f"(q*a/2={q * holder_order / 2.0:.6g}, p_delta={pd})"),
        ]
    if var_recursion or critic_timescale:
        p3 = schedules.zeta3.exponent
        conds += [
            Condition("zeta3 divergent sum", p3 <= 1.0, f"(p3={p3})"),
            Condition("zeta3 square-summable", p3 > 0.5, f"(p3={p3})"),
        ]
    if critic_timescale:
        p3, p4 = schedules.zeta3.exponent, schedules.zeta4.exponent
        conds += [
            Condition("critic: zeta2 = o(zeta3)", p2 > p3, f"(p2={p2}, p3={p3})"),
            Condition("critic: zeta4 proportional to zeta3", p4 == p3, f"(p3={p3}, p4={p4})"),
        ]
    return ValidationReport(mode, tuple(conds))


@dataclass(frozen=True, eq=False)
class PrimalDualState:
    theta: np.ndarray
    lam: float = 0.0
    n: int = 0
    lambda_max: float = 1e3

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).reshape(-1)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if self.lambda_max < 0:
            raise ValueError("lambda_max must be nonnegative")
        if not 0.0 <= self.lam <= self.lambda_max:
            raise ValueError(f"lambda={self.lam} outside [0, {self.lambda_max}]")


def primal_dual_step(state: PrimalDualState, grad_J, grad_G, G_hat: float, alpha: float,
                     schedules: Schedules, box: BoxConstraint) -> PrimalDualState:
    """Projected descent on the Lagrangian in ``theta`` and ascent in ``lambda``.

    Both updates read the pre-step multiplier.
    """
    gJ = np.asarray(grad_J, dtype=float)
    gG = np.asarray(grad_G, dtype=float)
    if not (np.all(np.isfinite(gJ)) and np.all(np.isfinite(gG)) and math.isfinite(G_hat)):
        raise NonFiniteEstimate("primal-dual step received a non-finite estimate")
    n = state.n
    theta = project_box(state.theta - schedules.zeta2(n) * (gJ + state.lam * gG), box)
    lam = state.lam + schedules.zeta1(n) * (G_hat - alpha)
    lam = min(max(0.0, lam), state.lambda_max)
    return replace(state, theta=theta, lam=lam, n=n + 1)
