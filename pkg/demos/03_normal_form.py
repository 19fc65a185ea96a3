"""Jordan chain at the momentum maximum and the predicted eigenvalue split.

At the extremum the zero eigenvalue gains two more generalized eigenvectors.
The coefficient B at the end of the chain and the curvature P''(c) predict
lambda^2 ~ -(P''/B) (c - c0); the script compares that with eigenvalues
computed on nearby waves.

Run:  python3 demos/03_normal_form.py
Takes about two minutes at N = 8192.
"""
import numpy as np

from babenko.jordan import (classify_splitting, generalized_kernel_dimension, normal_form,
                            predict_splitting, refine_critical_point)
from babenko.solver import d_eta_dc, newton_solve, wave_at_steepness
from babenko.spectrum import PencilOperators, eigen_near

wave = wave_at_steepness(0.13660354990, modes=8192)
wave, D = refine_critical_point(wave)
pred, chain = normal_form(wave)
dim, lengths = generalized_kernel_dimension(wave, chain=chain)

print(f"s0 = {wave.s:.11f}  c0 = {wave.c:.10f}  D = {D:.1e}")
print(f"kernel dimension {dim} (chains {lengths})")
print(f"B = {pred.B_coeff:.8f}  P''(c0) = {pred.P2:.4f}  alpha = {chain.alpha:.8f}")
print("chain residuals:", {k: f"{v:.1e}" for k, v in chain.residuals.items()})
print(f"predicted slope of lambda^2 in c - c0: {pred.slope:.4f}\n")

dc = d_eta_dc(wave).samples
print(f"{'eps':>10} {'measured':>14} {'predicted':>14} {'kind':>10}")
for eps in (-3.93e-5, -1.85e-5, 1.78e-5, 3.75e-5):
    w = newton_solve(wave.eta.samples + eps * dc, wave.c + eps, tol=1e-12)
    lam = eigen_near(PencilOperators(w), 0.0, k=4).eigenvalues[0]
    print(f"{eps:10.2e} {(lam * lam).real:14.6e} {predict_splitting(pred, eps):14.6e} "
          f"{classify_splitting(pred, eps):>10}")
