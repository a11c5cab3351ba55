"""
Tail bounds and risk allocation
===============================

How many standard deviations of back-off does a chance constraint need?
For a unimodal constraint statistic the one-sided VP bound answers with a
smaller multiplier than Cantelli's distribution-free bound.
"""

import numpy as np

from vpplan.bounds import BoundKind, lambda_for_risk, tail_bound, uniform_allocation

# A risk of 1/6 sits exactly at the edge of the VP domain
print("VP bound at sqrt(5/3):", tail_bound("vp", np.sqrt(5 / 3)))

# Multipliers for a range of risk levels
for omega in (0.1, 0.05, 0.01, 1e-3, 1e-4):
    lv, lc = lambda_for_risk("vp", omega), lambda_for_risk("cantelli", omega)
    print(f"risk {omega:>7g}:  VP lambda {lv:7.3f}   Cantelli lambda {lc:7.3f}   ratio {lv / lc:.3f}")

###############################################################################
# Splitting a joint budget over many constraints
# ----------------------------------------------
# Boole's inequality lets a joint budget be shared out row by row. With 24
# terminal rows and a 0.075 budget each row gets 0.075/24.

for kind in (BoundKind.VP, BoundKind.CANTELLI):
    omega, lam = uniform_allocation(0.075, 24, kind)
    print(f"{kind.value}: per-row risk {omega:.6g}, multiplier {lam:.4f}")
