"""Co-periodic stability spectrum of a Stokes wave.

The linearization about a traveling wave gives the pencil ``A x = lambda B x``
for ``x = (v, w)`` with

    A = [[0, K], [L, 0]],    B = [[M, 0], [-2c H, M*]],
    M v = (1 + K eta) v + eta' H v,    M* w = (1 + K eta) w - H(eta' w).

Zero is always an eigenvalue, with a generalized kernel of dimension four
(two chains of length two) away from extrema of the momentum.  That subspace
is removed with the spectral projector built from explicit left and right
chains.  On the complement ``B^{-1} A`` is invertible and its inverse is

    G = P A^+ B,

where ``A^+`` inverts ``K`` on zero-mean functions and ``L`` off its kernel
``eta'``.  Eigenvalues nearest the origin are the dominant eigenvalues of
``G`` (ARPACK); each application costs two preconditioned MINRES solves.
Eigenvalues near a nonzero shift come from ``(A - sigma B)^{-1} B`` with
GMRES inner solves, preconditioned by the exact flat-water inverse.
"""
import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, LinearOperator, eigs, gmres

from . import grid as g
from .errors import ArnoldiBreakdown, InnerSolveFailure, IterationFailure, SingularJacobian
from .solver import LinearizedOperator, d_eta_dc

log = logging.getLogger(__name__)

ZERO_EIGENVALUE = 1e-8


class PencilOperators:
    """Matrix-free blocks of the stability pencil at a fixed wave."""

    def __init__(self, wave, solve_rtol=1e-13):
        self.wave = wave
        self.c = float(wave.c)
        self.eta = np.asarray(wave.eta.samples, dtype=float)
        self.N = self.eta.size
        self.k_eta = g.k_op(self.eta)
        self.eta_prime = g.derivative(self.eta)
        self.one_k_eta = 1.0 + self.k_eta
        self.lin = LinearizedOperator(self.eta, self.c)
        self.solve_rtol = solve_rtol
        self._kernel = None

    # scalar blocks
    def K(self, f):
        return g.k_op(f)

    def H(self, f):
        return g.hilbert(f)

    def L(self, v):
        return self.lin.apply(v)

    def M(self, v):
        return g.product(self.one_k_eta, v) + g.product(self.eta_prime, g.hilbert(v))

    def M_star(self, w):
        return g.product(self.one_k_eta, w) - g.hilbert(g.product(self.eta_prime, w))

    # block operators on stacked (v, w)
    def split(self, x):
        x = np.asarray(x)
        return x[:self.N], x[self.N:]

    def A(self, x):
        v, w = self.split(x)
        return np.concatenate([self.K(w), self.L(v)])

    def B(self, x):
        v, w = self.split(x)
        return np.concatenate([self.M(v), -2 * self.c * self.H(v) + self.M_star(w)])

    def A_pinv(self, r):
        """Solve ``A x = r`` for ``r`` in the range of ``A``.

        ``w`` has zero mean and ``v`` is orthogonal to ``eta'``; the odd and even
        parts of ``v`` are solved separately, where ``L`` is invertible.
        """
        r1, r2 = self.split(r)
        w = g.k_inverse(r1)
        v = np.zeros(self.N)
        for part, sub in ((g.project_even(r2), "even"), (g.project_odd(r2), "odd")):
            if g.norm(part) > 0:
                try:
                    x, _ = self.lin.solve(part, sub, rtol=self.solve_rtol, maxiter=5000)
                except SingularJacobian as exc:
                    raise InnerSolveFailure(str(exc)) from exc
                v += x
        return np.concatenate([v, w])

    def kernel(self):
        """Right and left generalized-kernel bases ``(X, Y)`` of shape ``(2N, 4)``."""
        if self._kernel is None:
            N = self.N
            dce = d_eta_dc(self.wave).samples
            one = np.ones(N)
            zero = np.zeros(N)
            h_eta = g.hilbert(self.eta)
            X = np.column_stack([
                np.concatenate([self.eta_prime, zero]),
                np.concatenate([-dce, h_eta]),
                np.concatenate([zero, one]),
                np.concatenate([-one, zero]),
            ])
            Y = np.column_stack([
                np.concatenate([one, zero]),
                np.concatenate([zero, -one]),
                np.concatenate([zero, self.eta_prime]),
                np.concatenate([h_eta, dce]),
            ])
            self._kernel = (X, Y)
        return self._kernel

    def projector(self):
        """Spectral projector onto the complement of the generalized kernel."""
        X, Y = self.kernel()
        BX = np.column_stack([self.B(X[:, j]) for j in range(X.shape[1])])
        gram = Y.T @ BX / self.N
        gram_inv = np.linalg.inv(gram)
        cond = np.linalg.cond(gram)
        if cond > 1e12:
            log.warning("kernel Gram matrix is ill-conditioned (cond %.2e); the wave is "
                        "close to a momentum extremum", cond)

        def apply(x):
            coeff = gram_inv @ (Y.T @ self.B(x) / self.N)
            return x - X @ coeff

        return apply

    def constraint_residuals(self, v, w):
        return constraint_residuals(self, v, w)


def constraint_residuals(ops, v, w):
    """``(<1 + 2K eta, v>, <eta', w> - 2c <K eta, v>)``."""
    v = np.asarray(v, dtype=float) if np.isrealobj(v) else np.asarray(v)
    w = np.asarray(w, dtype=float) if np.isrealobj(w) else np.asarray(w)
    one_2k = 1.0 + 2.0 * ops.k_eta
    r1 = np.dot(one_2k, v) / ops.N
    r2 = np.dot(ops.eta_prime, w) / ops.N - 2 * ops.c * np.dot(ops.k_eta, v) / ops.N
    return r1, r2


def _gmres(apply, rhs, rtol, what, maxiter=500, dtype=float):
    n = rhs.size
    op = LinearOperator((n, n), matvec=apply, dtype=dtype)
    x, info = gmres(op, rhs, rtol=rtol, atol=0.0, restart=min(n, 100), maxiter=maxiter)
    if info != 0:
        raise IterationFailure(f"GMRES failed for {what} (info={info})")
    return x


def apply_B_inverse(ops, r1, r2, rtol=1e-12):
    """Block substitution: ``M v = r1`` then ``M* w = r2 + 2c H v``."""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    v = _gmres(ops.M, r1, rtol, "M") if g.norm(r1) > 0 else np.zeros_like(r1)
    rhs = r2 + 2 * ops.c * g.hilbert(v)
    w = _gmres(ops.M_star, rhs, rtol, "M*") if g.norm(rhs) > 0 else np.zeros_like(rhs)
    return v, w


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenfunctions: list
    constraint_residuals: list
    residuals: np.ndarray
    shift: complex
    seed: int = 0
    kernel_dimension: int = 4
    info: dict = field(default_factory=dict)

    def real_pairs(self, rel=1e-6):
        lam = self.eigenvalues
        return np.sort(lam[(np.abs(lam.imag) <= rel * np.abs(lam)) & (lam.real > 0)].real)

    def to_json(self, s=None, c=None):
        rows = []
        for lam, res, (c1, c2) in zip(self.eigenvalues, self.residuals, self.constraint_residuals):
            rows.append({"re": float(lam.real), "im": float(lam.imag), "residual": float(res),
                         "constraint1": float(abs(c1)), "constraint2": float(abs(c2))})
        doc = {"s": s, "c": c, "sigma": [float(np.real(self.shift)), float(np.imag(self.shift))],
               "seed": self.seed, "eigenvalues": rows}
        return json.dumps(doc, indent=1)


def pencil_residual(ops, lam, x):
    """``||A x - lam B x|| / ||x||`` for a (possibly complex) pair."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        Ax = ops.A(x.real) + 1j * ops.A(x.imag)
        Bx = ops.B(x.real) + 1j * ops.B(x.imag)
    else:
        Ax, Bx = ops.A(x), ops.B(x)
    return float(np.linalg.norm(Ax - lam * Bx) / np.linalg.norm(x))


def quadratic_residual(ops, lam, v, w):
    """Residual of the second-order form ``L v + 2 c lam H v - lam M* w`` with ``K w = lam M v``.

    ``w`` enters only through its mean, so this checks the pair independently of
    the block solver's ``w``.
    """
    def cx(op, f):
        f = np.asarray(f)
        return op(f.real) + 1j * op(f.imag) if np.iscomplexobj(f) else op(f)

    w_q = lam * cx(g.k_inverse, cx(ops.M, v)) + np.mean(w)
    r = cx(ops.L, v) + 2 * ops.c * lam * cx(ops.H, v) - lam * cx(ops.M_star, w_q)
    return float(np.linalg.norm(r) / max(np.linalg.norm(v), 1e-300))


def _complex_apply(f, x):
    if np.iscomplexobj(x):
        return f(x.real) + 1j * f(x.imag)
    return f(x)


def _flat_preconditioner(ops, sigma):
    """Exact inverse of ``A - sigma B`` at ``eta = 0``, applied mode by mode."""
    N, c = ops.N, ops.c
    k = np.fft.fftfreq(N, 1.0 / N)
    k[N // 2] = 0.0
    ak, hs = np.abs(k), 1j * np.sign(k)
    a, b = -sigma, ak
    cc = c * c * ak - 1.0 + 2 * c * sigma * hs
    det = a * a - b * cc

    def apply(x):
        V, W = np.fft.fft(x[:N]), np.fft.fft(x[N:])
        return np.concatenate([np.fft.ifft((a * V - b * W) / det),
                               np.fft.ifft((-cc * V + a * W) / det)])

    return apply


def shifted_solver(ops, sigma, rtol=1e-12, restart=200, maxiter=10):
    """``y -> (A - sigma B)^{-1} y`` by right-preconditioned GMRES (complex)."""
    n = 2 * ops.N
    prec = _flat_preconditioner(ops, sigma)

    def shifted(x):
        return _complex_apply(ops.A, x) - sigma * _complex_apply(ops.B, x)

    op = LinearOperator((n, n), matvec=lambda z: shifted(prec(z)), dtype=complex)

    def solve(y):
        z, info = gmres(op, y.astype(complex), rtol=rtol, atol=0.0, restart=restart, maxiter=maxiter)
        if info != 0:
            raise InnerSolveFailure(f"shifted GMRES did not reach {rtol:.0e} (info={info})")
        return prec(z)

    return solve


def _resolvent_via_G(G, sigma, x, rtol, restart=60, maxiter=20):
    """``(A - sigma B)^{-1} B x`` on the kernel complement, as ``(I - sigma G)^{-1} G x``.

    ``G`` is compact up to rounding, so GMRES on ``I - sigma G`` converges
    superlinearly whatever the steepness.
    """
    n = x.size
    Gc = lambda z: _complex_apply(G, z)  # noqa: E731
    op = LinearOperator((n, n), matvec=lambda z: z - sigma * Gc(z), dtype=complex)
    rhs = Gc(x.astype(complex))
    y, info = gmres(op, rhs, rtol=max(rtol, 1e-11), atol=0.0, restart=restart, maxiter=maxiter)
    if info != 0:
        raise InnerSolveFailure(f"GMRES on I - sigma G did not converge (info={info})")
    return y


def eigen_near(ops, sigma=0.0, k=6, deflate=True, tol=1e-12, seed=0, ncv=None,
               inner_rtol=1e-12):
    """``k`` nonzero eigenvalues of ``B^{-1} A`` nearest ``sigma``.

    ``sigma = 0`` iterates with the kernel-free inverse ``G``.  Other shifts
    use ``(A - sigma B)^{-1} B``; for a nonzero wave the generalized kernel is
    projected out of that operator as well.  With ``deflate=False`` the four
    kernel eigenvalues are appended as exact zeros with their chain vectors.
    """
    if k < 1:
        raise ValueError("k must be positive")
    n = 2 * ops.N
    if k >= n - 6:
        raise ValueError(f"k={k} too large for a pencil of size {n}")
    flat = not np.any(ops.eta)
    if flat:
        P = lambda x: x  # noqa: E731
        X = None
        if sigma == 0:
            raise ValueError("the flat state needs a nonzero shift")
    else:
        P = ops.projector()
        X, _ = ops.kernel()
    sigma = complex(sigma)
    counter = {"applications": 0}

    def G(x):
        return P(ops.A_pinv(ops.B(P(x))))

    if sigma == 0:
        dtype = float

        def op(x):
            counter["applications"] += 1
            return G(x)
    else:
        dtype = complex
        solve = shifted_solver(ops, sigma, rtol=inner_rtol)
        state = {"deflated": False}

        def op(x):
            counter["applications"] += 1
            if not state["deflated"]:
                try:
                    return _complex_apply(P, solve(_complex_apply(ops.B, _complex_apply(P, x))))
                except InnerSolveFailure:
                    if flat:
                        raise
                    # the flat-water preconditioner is too crude for steep waves
                    log.info("shifted solve failed; switching to (I - sigma G) y = G x")
                    state["deflated"] = True
            return _resolvent_via_G(G, sigma, x, inner_rtol)

    # without deflation the flat state's two zero eigenvalues compete for slots
    k_req = k + 4 if flat else k
    rng = np.random.default_rng(seed)
    v0 = P(rng.standard_normal(n)).astype(dtype)
    if ncv is None:
        ncv = min(n - 1, max(2 * k_req + 10, 30))
    lin = LinearOperator((n, n), matvec=op, dtype=dtype)
    try:
        theta, vecs = eigs(lin, k=k_req, which="LM", tol=tol, v0=v0, ncv=ncv, maxiter=2000)
    except ArpackNoConvergence as exc:
        raise ArnoldiBreakdown(f"Arnoldi did not converge: {exc}") from exc
    except ArpackError as exc:
        raise ArnoldiBreakdown(str(exc)) from exc
    except IterationFailure as exc:
        raise InnerSolveFailure(str(exc)) from exc

    lam = sigma + 1.0 / theta
    keep = np.abs(lam) > 1e-6 if flat else np.ones(lam.size, bool)
    lam, vecs = lam[keep], vecs[:, keep]
    order = np.argsort(np.abs(lam - sigma))[:k]
    lam, vecs = lam[order], vecs[:, order]
    residuals = np.array([pencil_residual(ops, l, vecs[:, j]) for j, l in enumerate(lam)])
    funcs = [ops.split(vecs[:, j]) for j in range(vecs.shape[1])]
    cons = [constraint_residuals(ops, v, w) for v, w in funcs]
    if not deflate and X is not None:
        lam = np.concatenate([lam, np.zeros(4)])
        funcs += [ops.split(X[:, j]) for j in range(4)]
        cons += [constraint_residuals(ops, *ops.split(X[:, j])) for j in range(4)]
        residuals = np.concatenate([residuals, [pencil_residual(ops, 0.0, X[:, j]) for j in range(4)]])
    info = {"operator_applications": counter["applications"], "ncv": ncv}
    return SpectrumResult(lam, funcs, cons, residuals, sigma, seed, 4, info)


def dense_pencil(wave):
    """Dense Fourier-basis matrices ``(A, B)`` of the pencil (modes ``|n| < N/2``)."""
    eta = np.asarray(wave.eta.samples, dtype=float)
    N = eta.size
    c = float(wave.c)
    m = np.arange(-N // 2 + 1, N // 2)
    freq = np.fft.fftfreq(N, 1.0 / N)
    freq[N // 2] = 0.0

    def toeplitz(f):
        fh = np.fft.fft(f) / N
        d = m[:, None] - m[None, :]
        return np.where(np.abs(d) < N // 2, fh[d % N], 0.0)

    k_eta = np.real(np.fft.ifft(np.fft.fft(eta) * np.abs(freq)))
    eta_p = np.real(np.fft.ifft(np.fft.fft(eta) * 1j * freq))
    Kd = np.diag(np.abs(m).astype(complex))
    Hd = np.diag(1j * np.sign(m))
    I = np.eye(m.size)
    Te, Tk, Tp = toeplitz(eta), toeplitz(k_eta), toeplitz(eta_p)
    L = c * c * Kd - (I + Tk) - Te @ Kd - Kd @ Te
    M = I + Tk + Tp @ Hd
    Ms = I + Tk - Hd @ Tp
    Z = np.zeros_like(I)
    A = np.block([[Z, Kd], [L, Z]])
    B = np.block([[M, Z], [-2 * c * Hd, Ms]])
    return A, B


def dense_pencil_eigenvalues(wave, drop_below=ZERO_EIGENVALUE ** 0.5):
    """All finite eigenvalues of the dense pencil, nearest the origin first.

    Eigenvalues of modulus below ``drop_below`` belong to the defective zero
    eigenvalue and are discarded; their computed positions are only accurate
    to about the fourth root of machine precision.
    """
    A, B = dense_pencil(wave)
    lam = sla.eig(A, B, right=False)
    lam = lam[np.isfinite(lam)]
    lam = lam[np.abs(lam) > drop_below]
    return lam[np.argsort(np.abs(lam))]


def flat_water_eigenvalues(c, N):
    """Pencil eigenvalues at ``eta = 0``: ``lambda = i (c n -/+ sqrt(n))`` for ``n != 0``."""
    n = np.arange(1, N // 2)
    roots = np.sqrt(n)
    lam = np.concatenate([1j * (c * n - roots), 1j * (c * n + roots)])
    return np.concatenate([lam, np.conj(lam)])
