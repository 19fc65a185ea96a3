"""Preconditioned MINRES for symmetric indefinite operators.

scipy's ``minres`` stops on a residual estimate scaled by ``||A|| ||x||``; with
the unbounded operators used here that criterion is far too lax, so the
recurrence is implemented directly and stopped on the preconditioned residual
relative to the preconditioned right-hand side.
"""
from dataclasses import dataclass

import numpy as np


@dataclass
class KrylovInfo:
    iterations: int
    converged: bool
    residual_estimate: float


def minres(apply_A, b, apply_M=None, rtol=1e-10, maxiter=1000, x0=None):
    """Solve ``A x = b`` for symmetric ``A`` with SPD preconditioner ``M ~ A^{-1}``.

    Returns ``(x, KrylovInfo)``.  ``residual_estimate`` is the ratio
    ``||r||_M / ||b||_M`` tracked by the recurrence.
    """
    if apply_M is None:
        apply_M = lambda r: r  # noqa: E731
    n = b.size
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r1 = b - apply_A(x) if x0 is not None else np.array(b, dtype=float)
    y = apply_M(r1)
    beta1 = float(r1 @ y)
    if beta1 < 0:
        raise ValueError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    if beta1 == 0.0:
        return x, KrylovInfo(0, True, 0.0)
    bnorm = np.sqrt(float(b @ apply_M(b))) if x0 is not None else beta1
    bnorm = max(bnorm, 1e-300)

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1.copy()

    for itn in range(1, maxiter + 1):
        v = y / beta
        y = apply_A(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        y = apply_M(r2)
        oldb = beta
        beta = float(r2 @ y)
        if beta < 0:
            raise ValueError("preconditioner is not positive definite")
        beta = np.sqrt(beta)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), 1e-300)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w

        if phibar <= rtol * bnorm:
            return x, KrylovInfo(itn, True, phibar / bnorm)
        if beta == 0.0:
            # exact invariant subspace found
            return x, KrylovInfo(itn, True, phibar / bnorm)
    return x, KrylovInfo(maxiter, False, phibar / bnorm)
