"""
Checking unimodality from samples
=================================

The VP bound needs unimodal constraint statistics. The check fits chords
to the empirical CDF and asks whether their slopes rise and then fall.
"""

import numpy as np

from vpplan import load_fixture, solve_ccp
from vpplan.unimodality import UnimodalityConfig, check_unimodal, ecdf, fit_segments, validate_constraint_unimodality

rng = np.random.default_rng(0)
ns = 50_000
samples = {
    "normal": rng.standard_normal(ns),
    "uniform": rng.uniform(size=ns),
    "bimodal": np.where(rng.random(ns) < 0.5, -3.0, 3.0) + rng.standard_normal(ns),
}
cfg = UnimodalityConfig(xi=0.01)
for name, x in samples.items():
    _, slopes = fit_segments(ecdf(x), cfg.xi)
    print(f"{name:8s} segments {slopes.size:3d}  unimodal {check_unimodal(ecdf(x), cfg)}")

###############################################################################
# Constraint statistics of a solved plan
# --------------------------------------

scenario = load_fixture("exponential_rendezvous")
sol = solve_ccp(scenario)
res = validate_constraint_unimodality(sol, scenario, ns, seed=scenario.seed)
print(f"{sum(res.values())} of {len(res)} constraint statistics pass")
