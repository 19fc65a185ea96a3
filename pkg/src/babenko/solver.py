"""Stokes waves from Babenko's equation.

The traveling-wave profile solves

    (c^2 K - 1) eta = 1/2 K(eta^2) + eta K eta,

and is computed by Newton's method with preconditioned MINRES inner solves
on the linearized operator

    L = c^2 K - (1 + K eta) - eta K - K(eta .).

Profiles are kept even (cosine series), which removes the translational
kernel ``eta'`` from the working subspace.  The branch can be continued in the
speed, in the steepness (bordered Newton with the crest-to-trough height as
an extra equation), or by pseudo-arclength.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import grid as g
from .errors import FoldPoint, NonConvergence, SingularJacobian, StepFailure
from .krylov import minres

log = logging.getLogger(__name__)

__all__ = [
    "StokesWave", "ContinuationConfig", "BranchPoint", "Branch",
    "LinearizedOperator", "babenko_residual", "linearized_apply",
    "steepness_of", "stokes_expansion", "amplitude_for_steepness",
    "newton_solve", "solve_steepness", "continue_branch", "d_eta_dc",
    "refine_grid", "wave_at_steepness", "wave_at_speed", "rounding_floor",
]

LIMITING_STEEPNESS = 0.14106348
NEAR_LIMIT_FRACTION = 0.25
FLOOR_CAP = 1e4


def steepness_of(eta):
    """Crest-to-trough height over wavelength, ``(eta(0) - eta(pi)) / 2pi``."""
    a = np.asarray(eta, dtype=float)
    return float((a[0] - a[a.size // 2]) / (2 * np.pi))


@dataclass(frozen=True, eq=False)
class StokesWave:
    """Converged traveling wave stored as its cosine series."""

    coefficients: np.ndarray
    c: float
    residual_norm: float
    tol: float = 1e-13

    @classmethod
    def from_samples(cls, eta, c, tol=1e-13, residual_norm=None):
        coeffs = g.cosine_coefficients(g.project_even(np.asarray(eta, dtype=float)))
        wave = cls(coeffs, float(c), float("nan"), float(tol))
        if residual_norm is None:
            residual_norm = g.norm(babenko_residual(wave.eta.samples, c))
        object.__setattr__(wave, "residual_norm", float(residual_norm))
        return wave

    @classmethod
    def zero(cls, N=256, c=1.0):
        return cls(np.zeros(N // 2 + 1), float(c), 0.0)

    @property
    def N(self):
        return 2 * (self.coefficients.size - 1)

    @cached_property
    def eta(self):
        return g.GridFunction(g.from_cosine_coefficients(self.coefficients, self.N))

    @property
    def s(self):
        return steepness_of(self.eta.samples)

    def resampled(self, N):
        eta = g.resample(self.eta.samples, N)
        return StokesWave.from_samples(eta, self.c, self.tol)

    def __repr__(self):
        return (f"StokesWave(s={self.s:.12g}, c={self.c:.12g}, N={self.N}, "
                f"residual={self.residual_norm:.2e})")


def babenko_residual(eta, c):
    """``(c^2 K - 1) eta - 1/2 K(eta^2) - eta K eta`` with de-aliased products."""
    wrap = isinstance(eta, g.GridFunction)
    e = np.asarray(eta, dtype=float)
    ke = g.k_op(e)
    out = c * c * ke - e - 0.5 * g.k_op(g.product(e, e)) - g.product(e, ke)
    return g.GridFunction(out) if wrap else out


class LinearizedOperator:
    """The linearized Babenko operator at ``(eta, c)`` and its MINRES inverse."""

    def __init__(self, eta, c):
        self.eta = np.asarray(eta, dtype=float)
        self.c = float(c)
        self.N = self.eta.size
        self.k_eta = g.k_op(self.eta)
        self.eta_prime = g.derivative(self.eta)
        self._ep_unit = self.eta_prime / max(g.norm(self.eta_prime), 1e-300)
        self._precond_symbol = 1.0 / (1.0 + self.c ** 2 * g.symbols(self.N).k_symbol)

    def apply(self, v):
        c2 = self.c ** 2
        kv = g.k_op(v)
        return (c2 * kv - v - g.product(self.k_eta, v)
                - g.product(self.eta, kv) - g.k_op(g.product(self.eta, v)))

    __call__ = apply

    def precondition(self, r):
        """``(1 + c^2 K)^{-1}``."""
        F = g._rfft(r)
        F *= self._precond_symbol
        return g._irfft(F, self.N)

    def _projector(self, subspace):
        if subspace == "even":
            return lambda f: g.project_even(f)
        ep = self._ep_unit
        if subspace == "odd":
            def proj(f):
                h = g.project_odd(f)
                return h - g.inner(ep, h) * ep
            return proj
        if subspace == "full":
            return lambda f: f - g.inner(ep, f) * ep
        raise ValueError(f"unknown subspace {subspace!r}")

    def solve(self, rhs, subspace="even", rtol=1e-12, maxiter=2000, check=None):
        """Solve ``L x = rhs`` on a subspace where ``L`` is invertible.

        ``even``: cosine subspace.  ``odd``/``full``: the kernel direction
        ``eta'`` is projected out of both the right-hand side and the solution.
        Returns ``(x, info)``; raises SingularJacobian if MINRES stalls or the
        true relative residual exceeds ``check``.
        """
        proj = self._projector(subspace)
        b = proj(np.asarray(rhs, dtype=float))
        if g.norm(b) == 0.0:
            return np.zeros(self.N), None
        x, info = minres(lambda v: proj(self.apply(proj(v))), b,
                         lambda r: proj(self.precondition(proj(r))),
                         rtol=rtol, maxiter=maxiter)
        x = proj(x)
        if not info.converged:
            raise SingularJacobian(
                f"MINRES stalled after {info.iterations} iterations "
                f"(relative residual {info.residual_estimate:.2e})")
        if check is not None:
            rel = g.norm(proj(self.apply(x)) - b) / g.norm(b)
            if rel > check:
                raise SingularJacobian(f"linear solve residual {rel:.2e} exceeds {check:.1e}")
        return x, info


def linearized_apply(eta, c, v):
    wrap = isinstance(v, g.GridFunction)
    out = LinearizedOperator(eta, c).apply(np.asarray(v, dtype=float))
    return g.GridFunction(out) if wrap else out


def stokes_expansion(a, N):
    """Third-order small-amplitude wave ``(eta, c)`` for amplitude ``a``."""
    u = g.grid(N)
    eta = a * np.cos(u) + a * a * (np.cos(2 * u) - 0.5) + 1.5 * a ** 3 * np.cos(3 * u)
    return eta, math.sqrt(1.0 + a * a)


def amplitude_for_steepness(s):
    """Invert ``2 a + 3 a^3 = 2 pi s`` (height of the third-order expansion)."""
    if s == 0:
        return 0.0
    roots = np.roots([3.0, 0.0, 2.0, -2 * np.pi * s])
    return float(min(r.real for r in roots if abs(r.imag) < 1e-12 and r.real > 0))


def rounding_floor(eta, c, samples=2):
    """Residual produced by last-bit perturbations of ``eta``.

    No Newton iterate can be certified below this level; it grows with the
    steepness and with N.
    """
    eta = np.asarray(eta, dtype=float)
    eps = np.finfo(float).eps
    rng = np.random.default_rng(12345)
    out = 0.0
    for _ in range(samples):
        pert = eta * (1.0 + eps * rng.standard_normal(eta.size))
        out = max(out, g.norm(babenko_residual(pert, c)))
    return out


def _newton(eta, c, tol, max_iter, inner_rtol, inner_maxiter, border=None):
    """Shared Newton loop; returns ``(eta, c, residual, effective_tol)``.

    If the iteration stalls at a residual below the rounding floor of the
    residual evaluation, the iterate is accepted and the floor becomes the
    effective tolerance.

    ``border`` is ``None`` (fixed speed) or a pair ``(gap, ell, m)`` callables:
    ``gap(eta, c)`` is the scalar constraint value, ``ell(v)`` its derivative in
    ``eta`` and ``m`` its derivative in ``c``.
    """
    eta = g.project_even(np.asarray(eta, dtype=float))
    history = []
    stalled = 0
    for it in range(max_iter + 1):
        S = babenko_residual(eta, c)
        res = g.norm(S)
        gap = 0.0 if border is None else border[0](eta, c)
        history.append(res)
        if not np.isfinite(res):
            raise NonConvergence("residual is not finite")
        if res <= tol and abs(gap) <= max(tol, 1e-14):
            return eta, c, res, tol
        if it == max_iter:
            break
        if len(history) > 1 and res > 0.5 * history[-2]:
            stalled += 1
            if stalled >= 3:
                floor = rounding_floor(eta, c)
                # a diverged iterate has a large floor of its own; only a floor
                # within FLOOR_CAP of tol counts as rounding
                if res <= floor <= FLOOR_CAP * tol and abs(gap) <= max(floor, 1e-14):
                    log.warning("residual %.2e is at the rounding floor %.2e; accepting (tol %.1e)",
                                res, floor, tol)
                    return eta, c, res, floor
            if stalled >= 4:
                raise NonConvergence(
                    f"Newton stalled at residual {res:.3e} (tol {tol:.1e}) after {it} steps")
        else:
            stalled = 0
        op = LinearizedOperator(eta, c)
        rtol = min(inner_rtol, 0.1)
        x1, _ = op.solve(-S, "even", rtol=rtol, maxiter=inner_maxiter)
        if border is None:
            eta = eta + x1
            continue
        _, ell, m = border
        x2, _ = op.solve(-2 * c * op.k_eta, "even", rtol=rtol, maxiter=inner_maxiter)
        denom = ell(x2) + m
        if denom == 0.0:
            raise SingularJacobian("bordered system is singular")
        dc = (-gap - ell(x1)) / denom
        eta = eta + x1 + dc * x2
        c = c + dc
    raise NonConvergence(f"no convergence in {max_iter} Newton steps (residual {history[-1]:.3e})")


def newton_solve(eta0, c, tol=1e-13, max_iter=60, inner_rtol=1e-3, inner_maxiter=500):
    """Solve Babenko's equation at fixed speed ``c`` starting from ``eta0``."""
    eta, c, _, tol_eff = _newton(eta0, c, tol, max_iter, inner_rtol, inner_maxiter)
    return StokesWave.from_samples(eta, c, tol_eff)


def _height_border(s):
    def gap(eta, c):
        return eta[0] - eta[eta.size // 2] - 2 * np.pi * s

    def ell(v):
        return v[0] - v[v.size // 2]

    return gap, ell, 0.0


def solve_steepness(eta0, c0, s, tol=1e-13, max_iter=60, inner_rtol=1e-3, inner_maxiter=500):
    """Solve for ``(eta, c)`` with prescribed steepness ``s``."""
    if s == 0:
        return StokesWave.zero(len(np.asarray(eta0)), c0)
    eta, c, _, tol_eff = _newton(eta0, c0, tol, max_iter, inner_rtol, inner_maxiter,
                                 border=_height_border(s))
    return StokesWave.from_samples(eta, c, tol_eff)


def _arclength_border(eta_prev, c_prev, t_eta, t_c, ds):
    def gap(eta, c):
        return g.inner(t_eta, eta - eta_prev) + t_c * (c - c_prev) - ds

    def ell(v):
        return g.inner(t_eta, v)

    return gap, ell, t_c


def attainable_residual(N):
    """Relative residual of a linear solve with L that rounding allows at grid size N."""
    return 100 * np.finfo(float).eps * N


def d_eta_dc(wave, rtol=1e-14, check=1e-10, maxiter=5000):
    """``d eta / dc`` along the branch: solves ``L x = -2 c K eta`` on even functions.

    ``check`` is raised to the rounding level of ``L`` on fine grids.
    """
    eta = wave.eta.samples
    if not np.any(eta):
        return g.GridFunction(np.zeros_like(eta))
    check = max(check, attainable_residual(eta.size))
    op = LinearizedOperator(eta, wave.c)
    try:
        x, _ = op.solve(-2 * wave.c * op.k_eta, "even", rtol=rtol, maxiter=maxiter, check=check)
    except SingularJacobian as exc:
        raise FoldPoint(f"even-subspace solve failed near a fold: {exc}") from exc
    return g.GridFunction(x)


@dataclass
class ContinuationConfig:
    mode: str = "steepness"
    step: float = 0.01
    tol: float = 1e-12
    max_modes: int = 16384
    spectral_tail_threshold: float = 1e-13
    start_modes: int = 256
    min_step: float = 1e-7

    def __post_init__(self):
        if self.mode not in ("speed", "steepness", "arclength"):
            raise ValueError(f"unknown continuation mode {self.mode!r}")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.tol < 1e-14:
            raise ValueError("tol below 1e-14 is not attainable in double precision")
        if not g.is_power_of_two(self.start_modes) or self.start_modes > self.max_modes:
            raise ValueError("start_modes must be a power of two not above max_modes")


@dataclass
class BranchPoint:
    s: float
    c: float
    H: float
    P: float
    E: float
    M_residual: float
    N: int


@dataclass
class Branch:
    points: list = field(default_factory=list)
    waves: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def column(self, name):
        return np.array([getattr(p, name) for p in self.points], dtype=float)

    def append(self, wave):
        from .conserved import branch_point

        pt = branch_point(wave)
        if self.points and not pt.s > self.points[-1].s:
            raise ValueError(f"steepness must increase along the branch ({pt.s} after {self.points[-1].s})")
        self.points.append(pt)
        self.waves.append(wave)
        return pt


def refine_grid(eta, c, threshold, max_modes):
    """Double ``N`` (by zero padding) while the top-octave tail is above threshold."""
    eta = np.asarray(eta, dtype=float)
    while g.top_octave_tail(eta) > threshold and eta.size < max_modes:
        eta = g.resample(eta, 2 * eta.size)
    return eta


def continue_branch(config, s_max, s_values=None):
    """Trace the even Stokes branch from small amplitude up to steepness ``s_max``.

    ``s_values`` (steepness mode only) overrides the automatic step sequence.
    """
    if s_max >= LIMITING_STEEPNESS:
        raise ValueError(f"s_max={s_max} is beyond the limiting steepness")
    branch = Branch()
    N = config.start_modes
    branch.append(StokesWave.zero(N))
    if s_max < config.step and s_values is None:
        return branch
    if config.mode == "steepness":
        _continue_steepness(branch, config, s_max, s_values)
    elif config.mode == "speed":
        _continue_speed(branch, config, s_max)
    else:
        _continue_arclength(branch, config, s_max)
    return branch


def _predict(branch, target, key):
    """Secant extrapolation of (eta, c) in ``key`` ('s' or 'c') from the last two waves."""
    w1, w2 = branch.waves[-2], branch.waves[-1]
    N = max(w1.N, w2.N)
    e1 = g.resample(w1.eta.samples, N) if w1.N != N else w1.eta.samples
    e2 = g.resample(w2.eta.samples, N) if w2.N != N else w2.eta.samples
    x1, x2 = getattr(w1, key), getattr(w2, key)
    t = (target - x2) / (x2 - x1)
    return e2 + t * (e2 - e1), w2.c + t * (w2.c - w1.c)


def _solve_adaptive(solve, eta, c, config):
    """Run ``solve`` and double N while the spectral tail is too large."""
    eta = refine_grid(eta, c, config.spectral_tail_threshold, config.max_modes)
    while True:
        try:
            wave = solve(eta, c)
        except NonConvergence:
            # an under-resolved profile has a residual floor above tol
            if eta.size >= config.max_modes:
                raise
            eta = g.resample(eta, 2 * eta.size)
            continue
        e = wave.eta.samples
        if g.top_octave_tail(e) <= config.spectral_tail_threshold or wave.N >= config.max_modes:
            return wave
        eta, c = g.resample(e, 2 * wave.N), wave.c


def _first_wave(s, N):
    a = amplitude_for_steepness(s)
    return stokes_expansion(a, N)


def _continue_steepness(branch, config, s_max, s_values):
    if s_values is None:
        targets = None
    else:
        targets = [float(s) for s in s_values if 0 < s <= s_max]
    step = config.step
    s_prev = 0.0
    i = 0
    while True:
        if targets is not None:
            if i >= len(targets):
                return
            s_next = targets[i]
        else:
            # the height constraint is met to rounding, so s may land an ulp short
            if s_prev >= s_max - 1e-14:
                return
            # features of the branch accumulate towards the limiting wave
            s_next = min(s_prev + min(step, NEAR_LIMIT_FRACTION * (LIMITING_STEEPNESS - s_prev)), s_max)
        if len(branch) < 3:
            eta0, c0 = _first_wave(s_next, branch.waves[-1].N)
            if len(branch) == 2:
                eta0 = g.resample(eta0, branch.waves[-1].N) if eta0.size != branch.waves[-1].N else eta0
        else:
            eta0, c0 = _predict(branch, s_next, "s")
        try:
            wave = _solve_adaptive(lambda e, c: solve_steepness(e, c, s_next, tol=config.tol),
                                   eta0, c0, config)
        except (NonConvergence, SingularJacobian) as exc:
            if targets is not None:
                raise StepFailure(f"failed at s={s_next}: {exc}", branch.points[-1]) from exc
            step /= 2
            log.info("step failure at s=%.8g, halving step to %.3g", s_next, step)
            if step < config.min_step:
                raise StepFailure(f"step below minimum at s={s_next}: {exc}",
                                  branch.points[-1]) from exc
            continue
        branch.append(wave)
        log.info("accepted %r", wave)
        s_prev = wave.s
        i += 1
        if targets is None:
            step = min(step * 1.5, config.step)


def _continue_speed(branch, config, s_max):
    step = config.step
    c_prev = 1.0
    while branch.points[-1].s < s_max:
        c_next = c_prev + step
        if len(branch) < 3:
            a = math.sqrt(max(c_next ** 2 - 1.0, 0.0))
            eta0, _ = stokes_expansion(a, branch.waves[-1].N)
        else:
            eta0, _ = _predict(branch, c_next, "c")
        try:
            wave = _solve_adaptive(lambda e, c: newton_solve(e, c, tol=config.tol), eta0, c_next, config)
            if len(branch) > 1 and not wave.s > branch.points[-1].s:
                raise NonConvergence("speed step did not increase the steepness (fold)")
        except (NonConvergence, SingularJacobian) as exc:
            step /= 2
            if step < config.min_step:
                raise StepFailure(f"speed continuation failed near c={c_next}: {exc}",
                                  branch.points[-1]) from exc
            continue
        branch.append(wave)
        c_prev = wave.c


def _continue_arclength(branch, config, s_max):
    # seed with two steepness points, then follow the secant tangent in (eta, c)
    for s in (config.step / 2, config.step):
        _continue_steepness(branch, config, min(s, s_max), [min(s, s_max)])
        if branch.points[-1].s >= s_max:
            return
    ds = config.step
    while branch.points[-1].s < s_max:
        w1, w2 = branch.waves[-2], branch.waves[-1]
        N = w2.N
        e1 = g.resample(w1.eta.samples, N) if w1.N != N else w1.eta.samples
        e2 = w2.eta.samples
        t_eta, t_c = e2 - e1, w2.c - w1.c
        scale = math.sqrt(g.inner(t_eta, t_eta) + t_c * t_c)
        t_eta, t_c = t_eta / scale, t_c / scale
        eta0, c0 = e2 + ds * t_eta, w2.c + ds * t_c
        border = _arclength_border(e2, w2.c, t_eta, t_c, ds)
        try:
            eta, c, _, tol_eff = _newton(eta0, c0, config.tol, 60, 1e-3, 500, border=border)
            wave = StokesWave.from_samples(eta, c, tol_eff)
            if g.top_octave_tail(wave.eta.samples) > config.spectral_tail_threshold and N < config.max_modes:
                branch.waves[-1] = w2.resampled(2 * N)
                continue
            if not wave.s > branch.points[-1].s:
                raise NonConvergence("arclength step went backwards in steepness")
        except (NonConvergence, SingularJacobian) as exc:
            ds /= 2
            if ds < config.min_step:
                raise StepFailure(f"arclength continuation failed: {exc}", branch.points[-1]) from exc
            continue
        if wave.s > s_max:
            wave = solve_steepness(eta, c, s_max, tol=config.tol)
        branch.append(wave)
        ds = min(ds * 1.5, config.step)


def _fixed_modes(wave, modes, solve):
    if modes is None or wave.N == modes:
        return wave
    return solve(g.resample(wave.eta.samples, modes), wave.c)


def wave_at_steepness(s, config=None, modes=None):
    """Single wave of steepness ``s`` by continuation from small amplitude.

    ``modes`` fixes the grid of the returned wave (it also caps refinement).
    """
    config = config or ContinuationConfig()
    if s < 0:
        raise ValueError("steepness must be non-negative")
    if modes is not None:
        config = ContinuationConfig(**{**config.__dict__, "max_modes": modes,
                                       "start_modes": min(config.start_modes, modes)})
    if s == 0:
        return StokesWave.zero(modes or config.start_modes)
    branch = continue_branch(config, s)
    return _fixed_modes(branch.waves[-1], modes,
                        lambda e, c: solve_steepness(e, c, s, tol=config.tol))


def wave_at_speed(c, config=None, modes=None):
    """Wave of speed ``c`` on the first rising part of the branch.

    Continues in steepness until the speed passes ``c``, then solves at fixed
    speed from the interpolated profile.  Speeds at or below 1 give the flat
    state.
    """
    config = config or ContinuationConfig()
    if modes is not None:
        config = ContinuationConfig(**{**config.__dict__, "max_modes": modes,
                                       "start_modes": min(config.start_modes, modes)})
    if c <= 1.0:
        return StokesWave.zero(modes or config.start_modes, c)
    branch = Branch()
    branch.append(StokesWave.zero(config.start_modes))
    s_next = 0.0
    while branch.points[-1].c < c:
        s_next = s_next + config.step
        if s_next >= LIMITING_STEEPNESS:
            raise NonConvergence(f"no wave of speed {c} before the limiting steepness")
        prev = branch.points[-1].c
        _continue_steepness(branch, config, s_next, [s_next])
        if branch.points[-1].c < prev:
            raise NonConvergence(f"speed {c} exceeds the first speed maximum ({prev:.10g})")
    eta0, _ = _predict(branch, c, "c") if len(branch) > 2 else (
        branch.waves[-1].eta.samples, None)
    wave = _solve_adaptive(lambda e, cc: newton_solve(e, c, tol=config.tol), eta0, c, config)
    return _fixed_modes(wave, modes, lambda e, cc: newton_solve(e, c, tol=config.tol))
