"""
Moments of a squared distance
=============================

Collision constraints bound the squared distance between two vehicles.
Its mean and variance follow from the first four moments of each
disturbance component, which we check here against sampling.
"""

import numpy as np

from vpplan.dynamics import CwhParams, build_concatenated, discretize_cwh
from vpplan.moments import DisturbanceSpec, difference_moments, quadratic_moments

N = 8
cd = build_concatenated(discretize_cwh(CwhParams(), 60.0), N)
S = np.eye(4)[:2]  # positions only

# Exponential disturbances on two vehicles; their difference is Laplace
spec = DisturbanceSpec.exponential([20.0, 20.0, 1e4, 1e4], 2, N)
diff = difference_moments(spec.stacked(0), spec.stacked(1))

k = N
M = S @ cd.D[k]
qmd = quadratic_moments(M, diff)
print(f"step {k}: E||z||^2 = {qmd.e_ztz:.5g},  Var||z||^2 = {qmd.var_ztz:.5g}")

###############################################################################
# Sampling check
# --------------

rng = np.random.default_rng(0)
rates = np.tile([20.0, 20.0, 1e4, 1e4], N)
W = rng.exponential(1 / rates, (200_000, rates.size)) - rng.exponential(1 / rates, (200_000, rates.size))
Z = W @ M.T
Q = np.einsum("ij,ij->i", Z, Z)
print(f"sampled:  E = {Q.mean():.5g},  Var = {Q.var():.5g}")
