"""Trace the Stokes branch and find the first momentum maximum.

Run:  python3 demos/01_stokes_branch.py
Takes about ten seconds.
"""
import numpy as np

from babenko.conserved import find_momentum_extrema, refine_momentum_extremum
from babenko.solver import ContinuationConfig, continue_branch, solve_steepness

# steepness-parametrized continuation; steps shrink towards the limiting wave
# and the grid doubles whenever the top octave of the spectrum is not at 1e-13
branch = continue_branch(ContinuationConfig(), 0.138)

print(f"{'s':>12} {'c':>14} {'H':>14} {'P':>14} {'N':>6}")
for p in branch.points[::2]:
    print(f"{p.s:12.8f} {p.c:14.10f} {p.H:14.10f} {p.P:14.10f} {p.N:6d}")

# the speed keeps rising past the momentum maximum, so P(c) has a genuine
# extremum there rather than a fold
(ext,) = find_momentum_extrema(branch)
print("\nfrom the table:   s* = %.10f" % ext.s_star)

near = min(branch.waves, key=lambda w: abs(w.s - ext.s_star))
ext = refine_momentum_extremum(lambda s: solve_steepness(near.eta.samples, near.c, s, tol=1e-12), ext)
print("on fresh waves:   s* = %.10f  c* = %.10f  P = %.10f  d2P/dc2 = %.2f"
      % (ext.s_star, ext.c_star, ext.P, ext.d2P_dc2))

# the largest wave needs many more modes than the small ones
print("\ngrid sizes used:", sorted(set(int(n) for n in branch.column("N"))))
