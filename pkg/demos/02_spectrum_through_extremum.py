"""Watch the pair of eigenvalues nearest zero pass through the origin.

Below the momentum maximum the pair is on the imaginary axis; above it the
pair is real, so the wave is unstable to co-periodic perturbations.

Run:  python3 demos/02_spectrum_through_extremum.py
Takes a few minutes (N = 4096, one Arnoldi run per wave).
"""
import numpy as np

from babenko.solver import solve_steepness, wave_at_steepness
from babenko.spectrum import PencilOperators, eigen_near

s1 = 0.13660354990
base = wave_at_steepness(s1, modes=4096)

for ds in (-4e-4, -1e-4, 1e-4, 4e-4):
    w = solve_steepness(base.eta.samples, base.c, s1 + ds, tol=1e-12)
    res = eigen_near(PencilOperators(w), 0.0, k=4)
    lam = res.eigenvalues[0]
    kind = "real" if abs(lam.imag) < 1e-8 * abs(lam) else "imaginary"
    print(f"s - s1 = {ds:+.0e}   c - c1 = {w.c - base.c:+.3e}   "
          f"lambda = {lam.real:+.6e} {lam.imag:+.6e}i   ({kind}, residual {res.residuals[0]:.1e})")

# a faraway part of the spectrum from the shifted solver, on a wave below the
# extremum (at s1 itself the four-vector deflation is ill-conditioned)
w = wave_at_steepness(0.13, modes=2048)
res = eigen_near(PencilOperators(w), 0.5j, k=3)
print("\nnear 0.5i at s = 0.13:", np.round(res.eigenvalues, 8), " max residual %.1e" % res.residuals.max())
