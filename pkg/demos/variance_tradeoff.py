"""
Trading mean for variance in a continuing chain
===============================================

The risky/safe chain charges a fixed cost of 1 after a safe choice and 0 or
2.2 after a risky one. We run the discounted variance algorithm at several
variance limits and look at where each run lands on the mean/variance plane.
Safe is also slightly cheaper on average, so even a loose limit drifts
toward it. A tight limit pushes much harder, and the multiplier shows by
how much.
"""

from riskpg import BatchSchedule, Discounted, RunConfig, Schedules, risky_safe, run
from riskpg.harness import oracle_eval

env = risky_safe(1.0, 0.0, 2.2, 0.5, Discounted(0.5))
print(f"{'alpha':>6} {'mean':>7} {'variance':>9} {'lambda':>7}")
for alpha in (0.25, 0.1, 0.01):
    config = RunConfig(env, "variance_discounted", alpha, iterations=400, seed=0,
                       schedules=Schedules(batch=BatchSchedule(10)))
    trace = run(config)
    exact = oracle_eval(config, trace.final_theta)
    print(f"{alpha:6.2f} {exact.J:7.3f} {exact.G:9.4f} {trace.final_lambda:7.3f}")

start = oracle_eval(config, trace.theta0)
print(f"\nuniform start: mean {start.J:.3f}, variance {start.G:.4f}")
