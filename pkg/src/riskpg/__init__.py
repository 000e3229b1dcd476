"""Risk-constrained policy gradients for tabular MDPs, with an exact oracle."""

from .algorithms import RunConfig, RunTrace, run
from .environments import EnvSpec, bandit_ssp, grid_ssp, random_mdp, risky_safe, two_stream
from .mdp import Average, Discounted, SoftmaxPolicy, Ssp, TabularMdp
from .optimizer import BatchSchedule, BoxConstraint, PowerSchedule, Schedules, validate_schedules
from .risk import CptModel, DiscreteDistribution, batch_var_cvar, cpt_estimate, cpt_exact

__all__ = [
    "Average", "BatchSchedule", "BoxConstraint", "CptModel", "Discounted", "DiscreteDistribution",
    "EnvSpec", "PowerSchedule", "RunConfig", "RunTrace", "Schedules", "SoftmaxPolicy", "Ssp",
    "TabularMdp", "bandit_ssp", "batch_var_cvar", "cpt_estimate", "cpt_exact", "grid_ssp",
    "random_mdp", "risky_safe", "run", "two_stream", "validate_schedules",
]

__version__ = "0.1.0"
