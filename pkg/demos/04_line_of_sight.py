"""
Approach inside a line-of-sight cone
====================================

A single deputy under Gaussian disturbances stays inside a cone for the
first four steps and ends in a 2 x 1 m box. Gaussian statistics are
unimodal, so the VP bound applies without further checks.
"""

from vpplan import load_fixture, solve_ccp
from vpplan.validation import measure_satisfaction, sample_disturbances

scenario = load_fixture("gaussian_los")
sol = solve_ccp(scenario)
print(f"cost {sol.cost:.3e}, iterations {sol.iterations}, certified {sol.certified}")
for k, x in enumerate(sol.mean_states[0]):
    print(f"k={k}: x={x[0]:7.3f}  y={x[1]:7.3f}")

rep = measure_satisfaction(sol, scenario, sample_disturbances(scenario.disturbance, 10_000, seed=1))
print("joint target satisfaction:", rep.joint["target"])
