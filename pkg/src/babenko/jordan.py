"""Jordan chain of the zero eigenvalue and the normal form of its splitting.

Starting from the kernel vector ``(eta', 0)`` the chain solves, with
``x_k = (v_k, w_k)``,

    K w1 = M eta',                  L v1 = -2c H eta'
    K w2 = -M dc_eta,               L v2 = 2c H dc_eta + M* H eta - (D / ||eta'||^2) eta'
    K w3 = M v2,                    L v3 = -2c H v2 + M* w2

where ``dc_eta`` is the derivative of the profile along the branch and

    D = <K eta, eta> + 2c <K eta, dc_eta>

is the derivative of the momentum in the speed (normalized inner product).
The projection term makes the second system solvable off an extremum; at an
extremum D vanishes and the chain extends to length four.  The obstruction to
a fifth vector is

    B = <eta', w3> - 2c <K eta, v3>,

and near the extremum ``c0`` a pair of eigenvalues obeys
``lambda^2 = -(c - c0) P''(c0) / B``.  ``P''`` here is ``dD/dc``.

``K`` is inverted by spectral division on zero-mean right-hand sides; ``L``
is inverted by MINRES on the even subspace, or on the odd subspace with
``eta'`` removed.
"""
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import grid as g
from .errors import DegenerateExtremum, FoldPoint, SingularJacobian
from .solver import LinearizedOperator, d_eta_dc, solve_steepness

ZERO_MODE_TOL = 1e-9
TWO_PI = 2 * np.pi


def _pencil_blocks(wave):
    eta = wave.eta.samples
    k_eta = g.k_op(eta)
    eta_p = g.derivative(eta)
    one_k = 1.0 + k_eta

    def M(v):
        return g.product(one_k, v) + g.product(eta_p, g.hilbert(v))

    def M_star(w):
        return g.product(one_k, w) - g.hilbert(g.product(eta_p, w))

    return eta, k_eta, eta_p, M, M_star


@dataclass
class JordanChain:
    v0: np.ndarray
    v1: np.ndarray
    w1: np.ndarray
    v2_tilde: np.ndarray
    w2_tilde: np.ndarray
    v3_tilde: np.ndarray
    w3_tilde: np.ndarray
    D: float
    alpha: float
    B_coeff: float
    eta_prime_norm: float
    residuals: dict = field(default_factory=dict)
    parity_defects: dict = field(default_factory=dict)
    orthogonality: dict = field(default_factory=dict)
    solvability: float = 0.0


@dataclass
class NormalFormPrediction:
    c0: float
    s0: float
    P2: float
    B_coeff: float

    @property
    def slope(self):
        """``d(lambda^2)/d(c - c0)``."""
        return -self.P2 / self.B_coeff

    def lambda1_sq(self, side):
        """Leading Puiseux coefficient on the branch side ``sign(c - c0) = side``."""
        return -math.copysign(1.0, side) * self.P2 / self.B_coeff

    def real_pair_side(self):
        """Sign of ``c - c0`` on which the split pair is real."""
        return 1 if self.B_coeff * self.P2 < 0 else -1


def _rel(r, b):
    nb = g.norm(b)
    return g.norm(r) / nb if nb > 0 else g.norm(r)


def _solve_L(op, rhs, subspace, rtol):
    try:
        x, _ = op.solve(rhs, subspace, rtol=rtol, maxiter=10000)
    except SingularJacobian as exc:
        raise FoldPoint(f"{subspace}-subspace solve failed: {exc}") from exc
    return x


def _odd_projector(eta_p):
    unit = eta_p / g.norm(eta_p)
    return lambda f: g.project_odd(f) - g.inner(unit, g.project_odd(f)) * unit


def D_direct(wave, dc_eta=None):
    """Derivative of the momentum in ``c`` from inner products (normalized)."""
    eta = wave.eta.samples
    if dc_eta is None:
        dc_eta = d_eta_dc(wave).samples
    k_eta = g.k_op(eta)
    return g.inner(k_eta, eta) + 2 * wave.c * g.inner(k_eta, dc_eta)


def chain_first(wave, rtol=1e-14):
    """``(v1, w1)`` for ``a1 = 1``, ``a2 = 0``."""
    eta, k_eta, eta_p, M, _ = _pencil_blocks(wave)
    if not np.any(eta):
        z = np.zeros_like(eta)
        return z, z
    w1 = g.k_inverse(M(eta_p), zero_mode_tol=ZERO_MODE_TOL)
    op = LinearizedOperator(eta, wave.c)
    v1 = _solve_L(op, -2 * wave.c * g.hilbert(eta_p), "even", rtol)
    return v1, w1


def chain_second(wave, D=None, dc_eta=None, rtol=1e-14):
    """``(v2_tilde, w2_tilde)`` with ``<1, w2> = <eta', v2> = 0``."""
    eta, k_eta, eta_p, M, M_star = _pencil_blocks(wave)
    c = wave.c
    if dc_eta is None:
        dc_eta = d_eta_dc(wave).samples
    if D is None:
        D = D_direct(wave, dc_eta)
    w2 = g.k_inverse(-M(dc_eta), zero_mode_tol=ZERO_MODE_TOL)
    rhs = (2 * c * g.hilbert(dc_eta) + M_star(g.hilbert(eta))
           - D / g.inner(eta_p, eta_p) * eta_p)
    op = LinearizedOperator(eta, c)
    v2 = _solve_L(op, rhs, "odd", rtol)
    return v2, w2


def chain_third(wave, v2_tilde, w2_tilde, rtol=1e-14):
    """``(v3_tilde, w3_tilde)`` with ``<1, w3> = <eta', v3> = 0``."""
    eta, k_eta, eta_p, M, M_star = _pencil_blocks(wave)
    c = wave.c
    w3 = g.k_inverse(M(v2_tilde), zero_mode_tol=ZERO_MODE_TOL)
    rhs = -2 * c * g.hilbert(v2_tilde) + M_star(w2_tilde)
    op = LinearizedOperator(eta, c)
    v3 = _solve_L(op, rhs, "even", rtol)
    return v3, w3


def coefficient_B(wave, chain):
    eta = wave.eta.samples
    eta_p = g.derivative(eta)
    return g.inner(eta_p, chain.w3_tilde) - 2 * wave.c * g.inner(g.k_op(eta), chain.v3_tilde)


def alpha_constant(wave, v3_tilde, form="reduced"):
    """``<1, M v3> / <1, M 1>`` (``form='ratio'``) or ``<1 + 2K eta, v3>``."""
    eta, k_eta, _, M, _ = _pencil_blocks(wave)
    if form == "ratio":
        return g.mean(M(v3_tilde)) / g.mean(M(np.ones_like(eta)))
    if form == "reduced":
        return g.inner(1.0 + 2.0 * k_eta, v3_tilde)
    raise ValueError(f"unknown form {form!r}")


def build_chain(wave, rtol=1e-14):
    """All chain vectors with residual, parity and orthogonality diagnostics."""
    eta, k_eta, eta_p, M, M_star = _pencil_blocks(wave)
    c = wave.c
    op = LinearizedOperator(eta, c)
    dc_eta = d_eta_dc(wave).samples
    D = D_direct(wave, dc_eta)
    v1, w1 = chain_first(wave, rtol)
    v2, w2 = chain_second(wave, D, dc_eta, rtol)
    v3, w3 = chain_third(wave, v2, w2, rtol)
    ep2 = g.inner(eta_p, eta_p)
    odd_proj = _odd_projector(eta_p)

    rhs1 = -2 * c * g.hilbert(eta_p)
    rhs2 = 2 * c * g.hilbert(dc_eta) + M_star(g.hilbert(eta)) - D / ep2 * eta_p
    rhs3 = -2 * c * g.hilbert(v2) + M_star(w2)
    residuals = {
        "chain1": max(_rel(g.k_op(w1) - M(eta_p), M(eta_p)), _rel(op.apply(v1) - rhs1, rhs1)),
        # the L-equation of the second system holds modulo eta', where the
        # Fredholm alternative places the kernel
        "chain2": max(_rel(g.k_op(w2) + M(dc_eta), M(dc_eta)),
                      _rel(odd_proj(op.apply(v2) - rhs2), rhs2)),
        "chain3": max(_rel(g.k_op(w3) - M(v2), M(v2)), _rel(op.apply(v3) - rhs3, rhs3)),
    }
    scale = g.norm(eta)
    parity = {
        "v1": g.norm(g.project_odd(v1)) / max(g.norm(v1), 1e-300),
        "w1": g.norm(g.project_even(w1)) / max(g.norm(w1), 1e-300),
        "v2": g.norm(g.project_even(v2)) / max(g.norm(v2), 1e-300),
        "w2": g.norm(g.project_odd(w2)) / max(g.norm(w2), 1e-300),
        "v3": g.norm(g.project_odd(v3)) / max(g.norm(v3), 1e-300),
        "w3": g.norm(g.project_even(w3)) / max(g.norm(w3), 1e-300),
    }
    orth = {
        "w2_mean": g.mean(w2), "v2_eta_prime": g.inner(eta_p, v2),
        "w3_mean": g.mean(w3), "v3_eta_prime": g.inner(eta_p, v3),
    }
    chain = JordanChain(eta_p, v1, w1, v2, w2, v3, w3, D, 0.0, 0.0, math.sqrt(ep2),
                        residuals, parity, orth)
    chain.alpha = alpha_constant(wave, v3)
    chain.B_coeff = coefficient_B(wave, chain)
    chain.solvability = abs(g.inner(eta_p, rhs2 + D / ep2 * eta_p) - D) / max(scale, 1e-300)
    return chain


def generalized_kernel_dimension(wave, rel_tol=1e-6, chain=None):
    """Algebraic multiplicity of the zero eigenvalue from the chain obstructions.

    The chain from ``(0, 1)`` stops after two vectors because ``<1, M 1> = 1``.
    The chain from ``(eta', 0)`` has two vectors unless ``D`` vanishes, in which
    case it runs through the third system and stops at ``B``.  Quantities are
    declared zero relative to ``<K eta, eta>``.
    """
    if not np.any(wave.eta.samples):
        raise ValueError("the flat state has an infinite-dimensional kernel structure")
    eta = wave.eta.samples
    scale = g.inner(g.k_op(eta), eta)
    if chain is None:
        chain = build_chain(wave)
    lengths = [2, 2]
    if abs(chain.D) <= rel_tol * scale:
        lengths[0] = 4
        if abs(chain.B_coeff) <= rel_tol * scale:
            lengths[0] = 5
    return sum(lengths), lengths


def predict_splitting(pred, eps, p2_threshold=1e-8):
    """``lambda^2`` at ``c = c0 + eps`` from the normal form."""
    if abs(pred.P2) < p2_threshold:
        raise DegenerateExtremum(f"|P''(c0)| = {abs(pred.P2):.3e} is below {p2_threshold:.1e}")
    if eps == 0:
        return 0.0
    return abs(eps) * pred.lambda1_sq(eps)


def classify_splitting(pred, eps):
    if eps == 0:
        return "zero"
    return "real" if pred.B_coeff * pred.P2 * math.copysign(1.0, eps) < 0 else "imaginary"


def local_branch(wave, h=2e-4, tol=1e-12):
    """Five waves at ``s0 + k h``, ``k = -2..2``, continued from ``wave``."""
    s0 = wave.s
    waves = []
    for k in (-2, -1, 0, 1, 2):
        if k == 0:
            waves.append(wave)
            continue
        waves.append(solve_steepness(wave.eta.samples, wave.c, s0 + k * h, tol=tol))
    return waves


def momentum_second_derivative(wave, h=2e-4, tol=1e-12):
    """``dD/dc`` at ``wave`` from a five-point stencil in ``s`` and the chain rule.

    Uses the normalized momentum ``c <K eta, eta>`` so that it pairs with ``B``.
    """
    from .conserved import branch_derivatives, wave_momentum

    waves = local_branch(wave, h, tol)
    cols = {
        "s": np.array([w.s for w in waves]),
        "c": np.array([w.c for w in waves]),
        "P": np.array([wave_momentum(w) / TWO_PI for w in waves]),
        "H": np.zeros(5),
    }
    return branch_derivatives(cols, 2).P_doubleprime_c


def refine_critical_point(wave, tol=1e-12, D_tol=1e-9, h=1e-5, max_iter=20):
    """Secant iteration in ``s`` on ``D(s) = 0`` starting near ``wave``."""
    s_a, w_a = wave.s, wave
    D_a = D_direct(w_a)
    if abs(D_a) <= D_tol:
        return w_a, D_a
    s_b = s_a + h
    w_b = solve_steepness(w_a.eta.samples, w_a.c, s_b, tol=tol)
    D_b = D_direct(w_b)
    for _ in range(max_iter):
        if abs(D_b) <= D_tol:
            return w_b, D_b
        if D_b == D_a:
            break
        s_new = s_b - D_b * (s_b - s_a) / (D_b - D_a)
        w_new = solve_steepness(w_b.eta.samples, w_b.c, s_new, tol=tol)
        s_a, w_a, D_a = s_b, w_b, D_b
        s_b, w_b, D_b = s_new, w_new, D_direct(w_new)
    if abs(D_b) <= 10 * D_tol:
        return w_b, D_b
    raise DegenerateExtremum(f"secant on D(s) did not converge (|D| = {abs(D_b):.3e})")


def normal_form(wave, h=2e-4, tol=1e-12, chain=None):
    """Prediction at the critical wave ``wave``."""
    if chain is None:
        chain = build_chain(wave)
    P2 = momentum_second_derivative(wave, h, tol)
    return NormalFormPrediction(c0=wave.c, s0=wave.s, P2=P2, B_coeff=chain.B_coeff), chain


def chain_report(pred, chain):
    doc = {
        "s0": pred.s0, "c0": pred.c0, "D": chain.D, "P2": pred.P2, "alpha": chain.alpha,
        "B": chain.B_coeff, "lambda1_sq": pred.slope, "eta_prime_norm": chain.eta_prime_norm,
        "residuals": chain.residuals, "parity_defects": chain.parity_defects,
    }
    return json.dumps(doc, indent=1)
