"""Conserved functionals and their derivatives along the wave branch.

Integrals over one period are taken as ``2 pi`` times the normalized
inner product, ``oint f du = 2 pi <1, f>``.  With this convention the momentum
and energy of the Stokes waves match the tabulated reference values.

Branch derivatives are taken in the steepness ``s`` and converted to
derivatives in the speed by the chain rule, since ``c`` is not monotone along
the branch.
"""
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import grid as g
from .errors import BoundaryPoint

TWO_PI = 2 * np.pi
FOLD_THRESHOLD = 1e-6


@dataclass(frozen=True)
class ConservedSet:
    M: float
    P: float
    Q: float
    H: float


def _samples(f):
    return np.asarray(f, dtype=float)


def conserved_eval(psi, eta):
    """Mass, horizontal and vertical momentum, and energy of ``(psi, eta)``."""
    psi, eta = _samples(psi), _samples(eta)
    if psi.shape != eta.shape:
        raise ValueError(f"size mismatch: {psi.size} vs {eta.size}")
    one_k_eta = 1.0 + g.k_op(eta)
    M = TWO_PI * g.inner(eta, one_k_eta)
    P = -TWO_PI * g.inner(psi, g.derivative(eta))
    Q = TWO_PI * g.inner(psi, one_k_eta)
    H = 0.5 * TWO_PI * (g.inner(psi, g.k_op(psi)) + g.inner(g.product(eta, eta), one_k_eta))
    return ConservedSet(M, P, Q, H)


def stokes_potential(wave):
    """Velocity potential of the traveling wave, ``psi = -c H eta``."""
    return -wave.c * g.hilbert(wave.eta.samples)


def wave_momentum(wave):
    eta = wave.eta.samples
    return TWO_PI * wave.c * g.inner(g.k_op(eta), eta)


def wave_energy(wave):
    eta = wave.eta.samples
    ke = g.k_op(eta)
    return TWO_PI * (0.5 * wave.c ** 2 * g.inner(ke, eta)
                     + 0.5 * g.inner(g.product(eta, eta), 1.0 + ke))


def wave_action(wave):
    eta = wave.eta.samples
    ke = g.k_op(eta)
    c2 = wave.c ** 2
    return TWO_PI * (0.5 * g.inner(c2 * ke - eta, eta)
                     - 0.5 * g.inner(g.k_op(g.product(eta, eta)), eta))


def branch_point(wave):
    """Row of the branch table for a converged wave."""
    from .solver import BranchPoint

    eta = wave.eta.samples
    M = TWO_PI * g.inner(eta, 1.0 + g.k_op(eta))
    return BranchPoint(s=wave.s, c=wave.c, H=wave_energy(wave), P=wave_momentum(wave),
                       E=wave_action(wave), M_residual=M, N=wave.N)


def fd_weights(x0, x, order):
    """Finite-difference weights at ``x0`` on arbitrary nodes ``x`` (Fornberg)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    C = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = x[0] - x0
    C[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    C[i, k] = c1 * (k * C[i - 1, k - 1] - c5 * C[i - 1, k]) / c2
                C[i, 0] = -c1 * c5 * C[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                C[j, k] = (c4 * C[j, k] - k * C[j, k - 1]) / c3
            C[j, 0] = c4 * C[j, 0] / c3
        c1 = c2
    return C


@dataclass(frozen=True)
class BranchDerivatives:
    s: float
    dP_ds: float
    dc_ds: float
    d2P_ds2: float
    d2c_ds2: float
    dH_ds: float
    P_prime_c: float
    P_doubleprime_c: float
    H_prime_c: float

    @property
    def near_fold(self):
        return abs(self.dc_ds) <= FOLD_THRESHOLD


def _columns(branch):
    if hasattr(branch, "column"):
        return {k: branch.column(k) for k in ("s", "c", "P", "H", "E")}
    return {k: np.asarray(v, dtype=float) for k, v in branch.items()}


def _derivs_at(cols, i):
    s = cols["s"]
    idx = slice(i - 2, i + 3)
    W = fd_weights(s[i], s[idx], 2)
    dP, d2P = W[:, 1] @ cols["P"][idx], W[:, 2] @ cols["P"][idx]
    dc, d2c = W[:, 1] @ cols["c"][idx], W[:, 2] @ cols["c"][idx]
    dH = W[:, 1] @ cols["H"][idx]
    if abs(dc) > FOLD_THRESHOLD:
        Pc = dP / dc
        Hc = dH / dc
        # d/dc (dP/ds / dc/ds) = (P_ss c_s - P_s c_ss) / c_s^3
        Pcc = (d2P * dc - dP * d2c) / dc ** 3
    else:
        Pc = Hc = Pcc = float("nan")
    return BranchDerivatives(float(s[i]), float(dP), float(dc), float(d2P), float(d2c),
                             float(dH), float(Pc), float(Pcc), float(Hc))


def branch_derivatives(branch, index):
    """Five-point derivatives in ``s`` at ``index`` with chain-rule values in ``c``.

    ``branch`` is a Branch or a mapping of equal-length columns s, c, P, H.
    """
    cols = _columns(branch)
    n = cols["s"].size
    if index < 0:
        index += n
    if index < 2 or index > n - 3:
        raise BoundaryPoint(f"index {index} needs two neighbours on each side (branch has {n} points)")
    return _derivs_at(cols, index)


@dataclass(frozen=True)
class MomentumExtremum:
    s_star: float
    c_star: float
    P: float
    H: float
    d2P_dc2: float

    def to_json(self):
        return json.dumps(asdict(self))


def _fit_extremum(cols, idx, lo, hi, x0):
    """Cubic fits of P, c, H over the nodes ``idx``; root of P' in ``[lo, hi]``."""
    x = cols["s"][idx] - x0
    Pfit = np.poly1d(np.polyfit(x, cols["P"][idx], 3))
    cfit = np.poly1d(np.polyfit(x, cols["c"][idx], 3))
    Hfit = np.poly1d(np.polyfit(x, cols["H"][idx], 3))
    lo_x, hi_x = lo - x0, hi - x0
    pad = 1e-12 * (hi_x - lo_x)
    cand = [r.real for r in np.atleast_1d(Pfit.deriv().roots)
            if abs(r.imag) <= 1e-9 * (hi_x - lo_x) and lo_x - pad <= r.real <= hi_x + pad]
    if not cand:
        return []
    r = min(cand, key=abs)
    c_s = cfit.deriv()(r)
    if abs(c_s) <= FOLD_THRESHOLD:
        return []
    return [MomentumExtremum(s_star=float(x0 + r), c_star=float(cfit(r)), P=float(Pfit(r)),
                             H=float(Hfit(r)), d2P_dc2=float(Pfit.deriv(2)(r) / c_s ** 2))]


def find_momentum_extrema(branch, interior_only=True):
    """Locate sign changes of dP/ds and refine them by cubic fits over five points.

    Fold points (|dc/ds| small at the extremum) are skipped.  With
    ``interior_only=False`` a five-point table is fitted as a whole.
    """
    cols = _columns(branch)
    s = cols["s"]
    n = s.size
    if n < 5:
        return []
    if not interior_only and n == 5:
        return _fit_extremum(cols, slice(0, 5), s[0], s[4], s[2])
    dP = np.empty(n)
    for i in range(n):
        lo = min(max(i - 2, 0), n - 5)
        idx = slice(lo, lo + 5)
        dP[i] = fd_weights(s[i], s[idx], 1)[:, 1] @ cols["P"][idx]
    out = []
    for i in range(n - 1):
        if dP[i] * dP[i + 1] > 0 or not (np.isfinite(dP[i]) and np.isfinite(dP[i + 1])):
            continue
        if dP[i] == 0 and out and abs(out[-1].s_star - s[i]) < 1e-15:
            continue
        # five nodes around the bracketing interval
        lo = min(max(i - 1, 0), n - 5)
        out += _fit_extremum(cols, slice(lo, lo + 5), s[i], s[i + 1], 0.5 * (s[i] + s[i + 1]))
    return out


def refine_momentum_extremum(solve_at, extremum, h=1e-4, rounds=2):
    """Re-fit an extremum on five fresh waves ``s* + k h`` produced by ``solve_at(s)``.

    ``solve_at`` returns an object with ``s``, ``c`` and the attributes used by
    ``wave_momentum``/``wave_energy``.
    """
    ext = extremum
    for _ in range(rounds):
        waves = [solve_at(ext.s_star + k * h) for k in (-2, -1, 0, 1, 2)]
        cols = {"s": np.array([w.s for w in waves]), "c": np.array([w.c for w in waves]),
                "P": np.array([wave_momentum(w) for w in waves]),
                "H": np.array([wave_energy(w) for w in waves])}
        found = find_momentum_extrema(cols, interior_only=False)
        if not found:
            break
        ext = min(found, key=lambda e: abs(e.s_star - ext.s_star))
        h = h / 10
    return ext


def momentum_slope_from_table(branch, s0):
    """``dP/dc / 2 pi`` at steepness ``s0`` from cubic fits to the five nearest rows.

    The factor makes it comparable with the inner-product form of ``D``.
    Returns ``None`` for tables with fewer than five rows or near a fold.
    """
    cols = _columns(branch)
    s = cols["s"]
    if s.size < 5:
        return None
    lo = int(np.clip(np.searchsorted(s, s0) - 2, 0, s.size - 5))
    idx = slice(lo, lo + 5)
    x = s[idx] - s0
    dP = np.polyder(np.polyfit(x, cols["P"][idx], 4))[-1]
    dc = np.polyder(np.polyfit(x, cols["c"][idx], 4))[-1]
    if abs(dc) <= FOLD_THRESHOLD:
        return None
    return float(dP / dc / TWO_PI)
