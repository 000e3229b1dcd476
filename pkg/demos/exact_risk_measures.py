"""
Exact risk measures on a one-decision bandit
============================================

Every learning algorithm in riskpg is checked against exact quantities
computed by dynamic programming. This script walks through those exact
quantities on the smallest interesting problem: one decision, a safe
action that always costs 1, and a risky action that costs 0 or 2.2 with
equal odds.
"""

import numpy as np

from riskpg import SoftmaxPolicy, bandit_ssp, cpt_exact
from riskpg import oracle
from riskpg.environments import BANDIT_DECISION, RISKY, SAFE
from riskpg.risk import default_cpt_model, distribution_var_cvar

mdp = bandit_ssp(cost_safe=1.0, cost_risky_low=0.0, cost_risky_high=2.2, p_high=0.5)

# The policy is a table of logits, one per (state, action) pair. Pushing the
# logit of one action at the decision state up makes that action likelier.
def policy_with(p_risky):
    theta = np.zeros((mdp.n_states, mdp.n_actions))
    theta[BANDIT_DECISION, RISKY] = np.log(p_risky / (1.0 - p_risky))
    return SoftmaxPolicy.for_mdp(mdp, theta.ravel())

# The law of the total episode cost is enumerated exactly. From it we read
# off the mean, CVaR at level 0.9 and the CPT-value with the default
# probability weight.
model = default_cpt_model()
print(f"{'P(risky)':>9} {'mean':>7} {'VaR.9':>7} {'CVaR.9':>7} {'CPT':>7}")
for p in (0.01, 0.25, 0.5, 0.75, 0.99):
    law = oracle.ssp_cost_distribution(mdp, policy_with(p), BANDIT_DECISION).distribution
    var, cvar = distribution_var_cvar(law, 0.9)
    print(f"{p:9.2f} {law.mean():7.3f} {var:7.3f} {cvar:7.3f} {cpt_exact(law, model):7.3f}")

# The mean barely moves (risky is only 0.1 worse on average). CVaR jumps to
# 2.2 once the high cost carries more than a tenth of the probability, since
# the worst 10% of episodes then all cost 2.2.

# Exact gradients are available too. For total cost the gradient at the
# decision state is the probability-weighted advantage of each action.
uniform = SoftmaxPolicy.for_mdp(mdp)
h = 1e-6
grad = []
for i in range(mdp.dim):
    e = np.zeros(mdp.dim)
    e[i] = h
    up = oracle.ssp_solve_value(mdp, SoftmaxPolicy.for_mdp(mdp, uniform.theta + e))
    down = oracle.ssp_solve_value(mdp, SoftmaxPolicy.for_mdp(mdp, uniform.theta - e))
    grad.append((up[BANDIT_DECISION] - down[BANDIT_DECISION]) / (2 * h))
grad = np.reshape(grad, (mdp.n_states, mdp.n_actions))
print("\ngradient of expected cost at the decision state:",
      f"safe {grad[BANDIT_DECISION, SAFE]:+.4f}, risky {grad[BANDIT_DECISION, RISKY]:+.4f}")
