"""Matrix-free eigenvalues against a dense eigensolve of the same pencil.

The dense pencil is assembled in the Fourier basis from Toeplitz matrices of
the wave's coefficients, so it shares no code with the FFT operators.

Run:  python3 demos/04_dense_check.py
"""
import numpy as np

from babenko.solver import wave_at_steepness
from babenko.spectrum import PencilOperators, dense_pencil_eigenvalues, eigen_near

for s in (0.05, 0.12):
    w = wave_at_steepness(s, modes=256)
    dense = dense_pencil_eigenvalues(w)
    res = eigen_near(PencilOperators(w), 0.0, k=20)
    err = max(np.min(np.abs(dense - lam)) for lam in res.eigenvalues)
    print(f"s = {s}: 20 eigenvalues nearest 0, max difference {err:.1e}")
    print("   first few:", np.round(res.eigenvalues[:4], 10))
