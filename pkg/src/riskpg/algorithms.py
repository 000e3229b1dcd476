"""The four risk-constrained policy-gradient drivers.

Every driver solves ``min J(theta)`` subject to ``G(theta) <= alpha`` by
projected descent in ``theta`` and projected ascent in the multiplier
``lambda`` (see :func:`riskpg.optimizer.primal_dual_step`):

========================  ===========================  ==========================
driver                    risk ``G``                   gradient estimates
========================  ===========================  ==========================
``variance_discounted``   variance of discounted cost  one-sided SPSA on TD ``J, U``
``variance_average``      per-period variance          likelihood ratio x TD errors
``cvar_ssp``              CVaR of SSP total cost       likelihood ratio per episode
``cpt``                   CPT-value of the return      one-sided SPSA
========================  ===========================  ==========================

Critics and VaR/CVaR estimators are reset at every outer iteration, so each
outer step starts from a clean policy evaluation.  All randomness comes from
named streams of ``config.seed`` (:func:`riskpg.rng.stream`), keyed by purpose
and iteration, so a run is a pure function of its config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import numpy as np

from .critics import DifferentialCritic, RunningAverages, TabularCritic
from .environments import EnvSpec
from .errors import ConfigError, EmptyTail, NonFiniteEstimate, ScheduleInvalid
from .gradients import (Perturbation, bernoulli_perturbation, lr_cvar_gradient,
                        lr_total_cost_gradient, spsa_one_sided)
from .mdp import (Average, Discounted, SoftmaxPolicy, Ssp, TabularMdp, discounted_return,
                  simulate_episode, simulate_trajectory)
from .optimizer import (BoxConstraint, PrimalDualState, Schedules, primal_dual_step,
                        validate_schedules)
from .risk import CptModel, VarCvarState, cpt_estimate, default_cpt_model
from .rng import stream

ALGORITHMS = ("variance_discounted", "variance_average", "cvar_ssp", "cpt")
OBJECTIVE_GRADIENTS = ("paired", "product_of_means")


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Everything a driver needs; a run is deterministic in this object.

    ``iterations`` counts outer iterations, except for ``variance_average``
    where each iteration is a single simulated transition.  ``horizon`` is the
    length of the trajectories started from ``x0`` in discounted MDPs (by
    default long enough for ``gamma^horizon < 1e-3``).  ``risk_functional``
    replaces the CPT estimator in ``cpt`` runs with any map from a sample
    array to a real number, e.g. ``np.mean`` for a mean-constrained run.
    """

    env: EnvSpec | TabularMdp
    algorithm: str
    alpha: float
    beta: float | None = None
    cpt_model: CptModel | None = None
    schedules: Schedules = field(default_factory=Schedules)
    box: BoxConstraint | None = None
    lambda_max: float = 1e3
    iterations: int = 100
    seed: int = 0
    x0: int = 0
    theta0: np.ndarray | None = None
    lambda0: float = 0.0
    horizon: int | None = None
    max_episode_steps: int = 10_000
    holder_order: float = 1.0
    objective_gradient: str = "paired"
    risk_functional: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if not math.isfinite(self.alpha):
            raise ConfigError("alpha must be finite")
        if self.algorithm == "cvar_ssp" and not (self.beta is not None and 0.0 < self.beta < 1.0):
            raise ConfigError("cvar_ssp needs beta in (0, 1)")
        if self.iterations < 0:
            raise ConfigError("iterations must be nonnegative")
        if self.lambda_max < 0 or not 0.0 <= self.lambda0 <= self.lambda_max:
            raise ConfigError("need 0 <= lambda0 <= lambda_max")
        if self.objective_gradient not in OBJECTIVE_GRADIENTS:
            raise ConfigError(f"objective_gradient must be one of {OBJECTIVE_GRADIENTS}")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError("horizon must be positive")

    def build_mdp(self) -> TabularMdp:
        return self.env if isinstance(self.env, TabularMdp) else self.env.build()


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    theta: np.ndarray
    lam: float
    J_hat: float
    G_hat: float
    grad_norm_J: float
    grad_norm_G: float
    episodes_used: int
    truncated: bool


@dataclass(frozen=True, eq=False)
class RunTrace:
    """Per-iteration history of a run, stored column-wise.

    ``thetas[n]`` and ``lambdas[n]`` are the iterates *after* iteration ``n``.
    """

    algorithm: str
    theta0: np.ndarray
    lambda0: float
    thetas: np.ndarray
    lambdas: np.ndarray
    J_hat: np.ndarray
    G_hat: np.ndarray
    grad_norm_J: np.ndarray
    grad_norm_G: np.ndarray
    episodes_used: np.ndarray
    truncated: np.ndarray

    def __len__(self) -> int:
        return len(self.lambdas)

    @property
    def iters(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def final_theta(self) -> np.ndarray:
        return self.thetas[-1] if len(self) else self.theta0

    @property
    def final_lambda(self) -> float:
        return float(self.lambdas[-1]) if len(self) else self.lambda0

    @property
    def any_truncated(self) -> bool:
        return bool(np.any(self.truncated))

    def records(self) -> Iterator[IterationRecord]:
        for n in range(len(self)):
            yield IterationRecord(n, self.thetas[n], float(self.lambdas[n]),
                                  float(self.J_hat[n]), float(self.G_hat[n]),
                                  float(self.grad_norm_J[n]), float(self.grad_norm_G[n]),
                                  int(self.episodes_used[n]), bool(self.truncated[n]))


class _Recorder:
    def __init__(self, algorithm: str, theta0: np.ndarray, lambda0: float, M: int):
        self.algorithm, self.theta0, self.lambda0 = algorithm, theta0, lambda0
        self.thetas = np.empty((M, theta0.size))
        self.cols = {k: np.empty(M) for k in
                     ("lambdas", "J_hat", "G_hat", "grad_norm_J", "grad_norm_G")}
        self.episodes = np.zeros(M, dtype=np.int64)
        self.truncated = np.zeros(M, dtype=bool)

    def put(self, n, theta, lam, J_hat, G_hat, gJ_norm, gG_norm, episodes, truncated=False):
        self.thetas[n] = theta
        c = self.cols
        c["lambdas"][n], c["J_hat"][n], c["G_hat"][n] = lam, J_hat, G_hat
        c["grad_norm_J"][n], c["grad_norm_G"][n] = gJ_norm, gG_norm
        self.episodes[n] = episodes
        self.truncated[n] = truncated

    def trace(self) -> RunTrace:
        return RunTrace(self.algorithm, self.theta0, self.lambda0, self.thetas,
                        episodes_used=self.episodes, truncated=self.truncated, **self.cols)


def _setup(config: RunConfig, setting, mode: str, **validator_flags):
    mdp = config.build_mdp()
    if not isinstance(mdp.setting, setting):
        names = setting.__name__ if isinstance(setting, type) else "/".join(s.__name__ for s in setting)
        raise ConfigError(f"{config.algorithm} needs a {names} MDP, "
                          f"got {type(mdp.setting).__name__}")
    if not 0 <= config.x0 < mdp.n_states:
        raise ConfigError(f"x0={config.x0} is not a state")
    report = validate_schedules(config.schedules, mode, **validator_flags)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures)
        raise ScheduleInvalid(f"schedules fail {mode}: {names}", report)
    theta0 = np.zeros(mdp.dim) if config.theta0 is None else np.asarray(config.theta0, float).reshape(-1)
    if theta0.size != mdp.dim:
        raise ConfigError(f"theta0 has {theta0.size} entries, expected {mdp.dim}")
    box = config.box if config.box is not None else BoxConstraint.uniform(mdp.dim)
    if box.dim != mdp.dim:
        raise ConfigError(f"box has dimension {box.dim}, expected {mdp.dim}")
    if not box.contains(theta0):
        raise ConfigError("theta0 lies outside the box")
    state = PrimalDualState(theta0, config.lambda0, 0, config.lambda_max)
    return mdp, box, state


def _horizon(config: RunConfig, mdp: TabularMdp) -> int:
    if config.horizon is not None:
        return config.horizon
    return max(1, math.ceil(math.log(1e-3) / math.log(mdp.gamma)))


def _norm(v) -> float:
    return float(np.sqrt(np.dot(v, v)))


# ---------------------------------------------------------------------------
# Discounted variance: SPSA on TD estimates of J and U


def _td_evaluate(mdp, policy, config, rng, n_episodes, horizon, step):
    critic = TabularCritic(mdp.n_states, step=step)
    for _ in range(n_episodes):
        traj = simulate_trajectory(mdp, policy, config.x0, rng, horizon)
        critic.run(traj, mdp.gamma, square=True)
    return float(critic.J[config.x0]), float(critic.U[config.x0])


def run_variance_discounted(config: RunConfig) -> RunTrace:
    """Variance-constrained discounted cost via SPSA.

    Per outer iteration both the policy ``theta_n`` and its perturbation
    ``theta_n + delta_n Delta(n)`` are evaluated by coupled TD critics for
    ``J`` and ``U`` over ``m_n`` trajectories of length ``horizon`` from
    ``x0``.  The variance constraint ``U - J^2`` has gradient estimate
    ``grad U - 2 J grad J``.
    """
    mdp, box, state = _setup(config, Discounted, "A4prime", holder_order=config.holder_order)
    sch = config.schedules
    horizon = _horizon(config, mdp)
    zeta3 = sch.zeta3

    def step(visits: int) -> float:
        return zeta3(visits - 1)

    rec = _Recorder(config.algorithm, state.theta, state.lam, config.iterations)
    for n in range(config.iterations):
        pert = Perturbation(sch.delta(n), bernoulli_perturbation(mdp.dim, stream(config.seed, "perturbation", n)))
        m = sch.batch(n)
        policy = SoftmaxPolicy.for_mdp(mdp, state.theta)
        shifted = SoftmaxPolicy.for_mdp(mdp, state.theta + pert.step)
        J, U = _td_evaluate(mdp, policy, config, stream(config.seed, "unperturbed", n), m, horizon, step)
        Jp, Up = _td_evaluate(mdp, shifted, config, stream(config.seed, "perturbed", n), m, horizon, step)
        gJ = spsa_one_sided(Jp, J, pert).vector
        gU = spsa_one_sided(Up, U, pert).vector
        gG = gU - 2.0 * J * gJ
        G = U - J * J
        state = primal_dual_step(state, gJ, gG, G, config.alpha, sch, box)
        rec.put(n, state.theta, state.lam, J, G, _norm(gJ), _norm(gG), 2 * m)
    return rec.trace()


# ---------------------------------------------------------------------------
# Average-cost per-period variance: actor-critic with likelihood ratios


def run_variance_average(config: RunConfig) -> RunTrace:
    """Per-period-variance-constrained average cost along one trajectory.

    Each iteration is one transition.  Running averages of ``k`` and ``k^2``
    (step ``zeta4``) and differential TD critics for ``V`` and ``U`` (step
    ``zeta3``) produce TD errors ``delta`` and ``eps``; with
    ``psi = grad log mu(a|x)`` the actor descends along

        ``delta psi + lambda (eps psi - 2 J delta psi)``,

    i.e. along estimates of ``grad J + lambda grad (eta - J^2)``.
    """
    mdp, box, state = _setup(config, Average, "A4", critic_timescale=True)
    sch = config.schedules
    S, A = mdp.n_states, mdp.n_actions
    critic = DifferentialCritic(S, averages=RunningAverages())
    rng = stream(config.seed, "trajectory")
    theta = state.theta.reshape(S, A).copy()
    lo, hi = box.lower.reshape(S, A), box.upper.reshape(S, A)
    lam, lam_max, alpha = state.lam, config.lambda_max, config.alpha
    P_cum = np.cumsum(mdp.transition, axis=2)
    cost = mdp.cost
    x = config.x0
    rec = _Recorder(config.algorithm, state.theta, state.lam, config.iterations)
    for n in range(config.iterations):
        logits = theta[x]
        w = np.exp(logits - logits.max())
        probs = w / w.sum()
        a = min(int(np.searchsorted(np.cumsum(probs), rng.random(), side="right")), A - 1)
        y = min(int(np.searchsorted(P_cum[x, a], rng.random(), side="right")), S - 1)
        k = float(cost[x, a])
        delta, eps = critic.update(x, k, y, sch.zeta3(n), sch.zeta4(n))
        J_bar, eta_bar = critic.averages.J_bar, critic.averages.eta_bar
        G = eta_bar - J_bar * J_bar
        psi = -probs
        psi[a] += 1.0
        gJ = delta * psi
        gG = eps * psi - 2.0 * J_bar * gJ
        if not (np.all(np.isfinite(gJ)) and np.all(np.isfinite(gG))):
            raise NonFiniteEstimate(f"non-finite actor increment at step {n}")
        theta[x] = np.clip(logits - sch.zeta2(n) * (gJ + lam * gG), lo[x], hi[x])
        lam = min(max(0.0, lam + sch.zeta1(n) * (G - alpha)), lam_max)
        rec.put(n, theta.reshape(-1), lam, J_bar, G, _norm(gJ), _norm(gG), 0)
        x = y
    return rec.trace()


# ---------------------------------------------------------------------------
# SSP CVaR: likelihood-ratio gradients from whole episodes


def run_cvar_ssp(config: RunConfig) -> RunTrace:
    """CVaR-constrained expected total cost in an SSP.

    Per outer iteration ``m_n`` episodes from ``x0`` feed a fresh VaR/CVaR
    stochastic-approximation state (step ``zeta3`` on the episode index).
    The objective gradient is the mean of ``D psi`` over episodes
    (``objective_gradient="paired"``) or the product of the episode means of
    ``D`` and ``psi`` (``"product_of_means"``).  The CVaR gradient is the
    tail-conditional likelihood-ratio estimate at the VaR estimate; an empty
    tail contributes a zero gradient.
    """
    mdp, box, state = _setup(config, Ssp, "A4", var_recursion=True)
    sch = config.schedules
    beta = config.beta
    rec = _Recorder(config.algorithm, state.theta, state.lam, config.iterations)
    for n in range(config.iterations):
        policy = SoftmaxPolicy.for_mdp(mdp, state.theta)
        rng = stream(config.seed, "episodes", n)
        m = sch.batch(n)
        episodes = [simulate_episode(mdp, policy, config.x0, rng, config.max_episode_steps,
                                     strict=False) for _ in range(m)]
        var = VarCvarState(beta)
        for j, ep in enumerate(episodes):
            var.step(ep.total_cost, sch.zeta3(j))
        if config.objective_gradient == "paired":
            gJ = lr_total_cost_gradient(episodes, policy).vector
        else:
            costs = np.array([ep.total_cost for ep in episodes])
            gJ = costs.mean() * np.mean([ep.score_sum for ep in episodes], axis=0)
        try:
            gG = lr_cvar_gradient(episodes, policy, var.xi, beta).vector
        except EmptyTail:
            gG = np.zeros(mdp.dim)
        J = float(np.mean([ep.total_cost for ep in episodes]))
        state = primal_dual_step(state, gJ, gG, var.c, config.alpha, sch, box)
        rec.put(n, state.theta, state.lam, J, var.c, _norm(gJ), _norm(gG), m)
    return rec.trace()


# ---------------------------------------------------------------------------
# CPT: SPSA on Monte Carlo CPT estimates, TD for the objective


def _sample_returns(mdp, policy, config, rng, m, horizon):
    """``m`` returns from ``x0`` plus a TD estimate of ``J(x0)`` over the same paths."""
    ssp = isinstance(mdp.setting, Ssp)
    gamma = 1.0 if ssp else mdp.gamma
    critic = TabularCritic(mdp.n_states)
    returns = np.empty(m)
    truncated = False
    for i in range(m):
        if ssp:
            traj = simulate_episode(mdp, policy, config.x0, rng, config.max_episode_steps,
                                    strict=False)
            truncated |= not traj.terminated
            returns[i] = traj.total_cost
        else:
            traj = simulate_trajectory(mdp, policy, config.x0, rng, horizon)
            returns[i] = discounted_return(traj, gamma)
        critic.run(traj, gamma, square=False)
    return returns, float(critic.J[config.x0]), truncated


def run_cpt(config: RunConfig) -> RunTrace:
    """CPT-constrained expected cost via one-sided SPSA.

    Per outer iteration ``m_n`` returns are sampled under ``theta_n`` and
    under ``theta_n + delta_n Delta(n)``.  Their CPT estimates give the
    constraint gradient; TD estimates of ``J(x0)`` on the same paths give the
    objective gradient.  The multiplier ascends on ``C(theta_n) - alpha``.
    """
    mdp, box, state = _setup(config, (Discounted, Ssp), "A4prime",
                             holder_order=config.holder_order)
    sch = config.schedules
    if config.risk_functional is not None:
        risk = config.risk_functional
    else:
        model = config.cpt_model if config.cpt_model is not None else default_cpt_model()
        def risk(samples):
            return cpt_estimate(samples, model)
    horizon = _horizon(config, mdp) if isinstance(mdp.setting, Discounted) else 0
    rec = _Recorder(config.algorithm, state.theta, state.lam, config.iterations)
    for n in range(config.iterations):
        pert = Perturbation(sch.delta(n), bernoulli_perturbation(mdp.dim, stream(config.seed, "perturbation", n)))
        m = sch.batch(n)
        policy = SoftmaxPolicy.for_mdp(mdp, state.theta)
        shifted = SoftmaxPolicy.for_mdp(mdp, state.theta + pert.step)
        X, J, t0 = _sample_returns(mdp, policy, config, stream(config.seed, "unperturbed", n), m, horizon)
        Xp, Jp, t1 = _sample_returns(mdp, shifted, config, stream(config.seed, "perturbed", n), m, horizon)
        C, Cp = float(risk(X)), float(risk(Xp))
        gJ = spsa_one_sided(Jp, J, pert).vector
        gC = spsa_one_sided(Cp, C, pert).vector
        state = primal_dual_step(state, gJ, gC, C, config.alpha, sch, box)
        rec.put(n, state.theta, state.lam, J, C, _norm(gJ), _norm(gC), 2 * m, t0 or t1)
    return rec.trace()


DRIVERS = {
    "variance_discounted": run_variance_discounted,
    "variance_average": run_variance_average,
    "cvar_ssp": run_cvar_ssp,
    "cpt": run_cpt,
}


def run(config: RunConfig) -> RunTrace:
    """Dispatch ``config`` to its driver."""
    return DRIVERS[config.algorithm](config)


def with_overrides(config: RunConfig, **changes) -> RunConfig:
    return replace(config, **changes)
