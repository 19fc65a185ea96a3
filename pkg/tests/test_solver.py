import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from babenko import grid as g
from babenko.errors import FoldPoint, NonConvergence, StepFailure
from babenko.solver import (Branch, ContinuationConfig, LinearizedOperator, StokesWave,
                            amplitude_for_steepness, babenko_residual, continue_branch,
                            d_eta_dc, linearized_apply, newton_solve, solve_steepness,
                            steepness_of, stokes_expansion, wave_at_speed, wave_at_steepness)


def _cos_series_product(f, h):
    out = {}
    for m, a in f.items():
        for n, b in h.items():
            for k in (m + n, abs(m - n)):
                out[k] = out.get(k, 0) + a * b / 2
    return out


def _babenko_series(eta, c2):
    """Residual of the equation on a cosine series {n: coefficient}."""
    K = lambda f: {n: n * a for n, a in f.items()}
    add = lambda *fs: {n: sum(f.get(n, 0) for f in fs) for n in set().union(*fs)}
    scale = lambda s, f: {n: s * a for n, a in f.items()}
    return add(scale(c2, K(eta)), scale(-1, eta),
               scale(-sp.Rational(1, 2), K(_cos_series_product(eta, eta))),
               scale(-1, _cos_series_product(eta, K(eta))))


def test_third_order_expansion_matches_symbolic_perturbation():
    a = sp.symbols("a")
    b0, b2, b3, b1, g2 = sp.symbols("b0 b2 b3 b1 g2")
    # amplitude normalized by the cos u coefficient; mean fixed by the zero mode
    eta = {1: a, 0: a**2 * b0, 2: a**2 * b2, 3: a**3 * b3}
    res = _babenko_series(eta, 1 + g2 * a**2)
    eqs = []
    for n, order in ((0, 2), (2, 2), (3, 3), (1, 3)):
        eqs.append(sp.expand(res.get(n, 0)).coeff(a, order))
    sol = sp.solve(eqs, [b0, b2, b3, g2], dict=True)[0]
    assert sol[b0] == -sp.Rational(1, 2) and sol[b2] == 1
    assert sol[b3] == sp.Rational(3, 2) and sol[g2] == 1
    # and the numerical profile leaves a fourth-order residual
    r1 = g.norm(babenko_residual(*stokes_expansion(0.02, 64)))
    r2 = g.norm(babenko_residual(*stokes_expansion(0.01, 64)))
    assert 14 < r1 / r2 < 18


def test_amplitude_for_steepness_inverts_height():
    for s in (0.001, 0.02, 0.1):
        a = amplitude_for_steepness(s)
        eta, _ = stokes_expansion(a, 64)
        assert steepness_of(eta) == pytest.approx(s, rel=1e-12)
    assert amplitude_for_steepness(0) == 0


def test_residual_vanishes_on_flat_state_and_is_odd_free():
    assert np.all(babenko_residual(np.zeros(32), 1.3) == 0)
    eta, c = stokes_expansion(0.05, 64)
    S = babenko_residual(g.GridFunction(eta), c)
    assert isinstance(S, g.GridFunction)
    assert g.norm(g.project_odd(S.samples)) < 1e-15


@pytest.fixture(scope="module")
def wave():
    return wave_at_steepness(0.1, modes=256)


def test_linearized_identities(wave):
    eta, c = wave.eta.samples, wave.c
    op = LinearizedOperator(eta, c)
    eta_p = g.derivative(eta)
    # translation kernel and the constant direction
    assert g.norm(op.apply(eta_p)) / g.norm(eta_p) < 1e-10
    one = np.ones_like(eta)
    assert np.allclose(op.apply(one), -(1 + 2 * g.k_op(eta)), atol=1e-10)
    assert np.allclose(linearized_apply(eta, c, one), op.apply(one))


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_linearized_operator_symmetric(seed):
    eta, c = stokes_expansion(0.08, 128)
    op = LinearizedOperator(eta, c)
    rng = np.random.default_rng(seed)
    u, v = (g.resample(g.resample(rng.standard_normal(128), 64), 128) for _ in range(2))
    lhs, rhs = g.inner(op.apply(u), v), g.inner(u, op.apply(v))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, g.norm(op.apply(u)) * g.norm(v))


@given(st.floats(0, 2 * np.pi))
@settings(max_examples=15, deadline=None)
def test_residual_translation_invariant(shift):
    eta, c = stokes_expansion(0.1, 64)
    F = np.fft.rfft(eta) * np.exp(-1j * np.arange(33) * shift)
    shifted = np.fft.irfft(F, 64)
    S = babenko_residual(eta, c)
    S_shift = np.fft.irfft(np.fft.rfft(S) * np.exp(-1j * np.arange(33) * shift), 64)
    assert np.allclose(babenko_residual(shifted, c), S_shift, atol=1e-14)


def test_solve_even_subspace(wave):
    op = LinearizedOperator(wave.eta.samples, wave.c)
    rhs = g.project_even(np.cos(g.grid(256)) ** 3)
    x, info = op.solve(rhs, "even", rtol=1e-13)
    assert g.norm(op.apply(x) - rhs) / g.norm(rhs) < 1e-11
    odd = np.sin(2 * g.grid(256))
    y, _ = op.solve(odd, "odd", rtol=1e-13)
    ep = g.derivative(wave.eta.samples)
    assert abs(g.inner(y, ep)) < 1e-12
    proj = odd - g.inner(ep, odd) / g.inner(ep, ep) * ep
    assert g.norm(op.apply(y) - proj) / g.norm(proj) < 1e-10


def test_newton_at_fixed_speed_recovers_wave(wave):
    eta0 = wave.eta.samples * 1.01
    w = newton_solve(eta0, wave.c, tol=1e-12)
    assert w.residual_norm <= 1e-12
    assert np.allclose(w.eta.samples, wave.eta.samples, atol=1e-10)


def test_steepness_solve_hits_target(wave):
    w = solve_steepness(wave.eta.samples, wave.c, 0.105, tol=1e-12)
    assert w.s == pytest.approx(0.105, abs=1e-14)
    assert w.residual_norm <= 1e-12 and w.c > wave.c


def test_newton_diverges_from_nonsense():
    with pytest.raises(NonConvergence):
        newton_solve(np.full(64, np.nan), 1.1, max_iter=5)


def test_d_eta_dc_matches_finite_difference(wave):
    h = 1e-5
    plus = newton_solve(wave.eta.samples, wave.c + h, tol=1e-13)
    minus = newton_solve(wave.eta.samples, wave.c - h, tol=1e-13)
    fd = (plus.eta.samples - minus.eta.samples) / (2 * h)
    an = d_eta_dc(wave).samples
    assert g.norm(fd - an) / g.norm(an) < 1e-6


def test_stokes_wave_helpers(wave):
    assert wave.N == 256
    up = wave.resampled(512)
    assert up.s == pytest.approx(wave.s, abs=1e-14)
    flat = StokesWave.zero(64, 1.2)
    assert flat.s == 0 and flat.N == 64
    assert wave_at_steepness(0.0, modes=32).N == 32


def test_branch_monotone_and_zero_mean(low_branch):
    s = low_branch.column("s")
    assert s[0] == 0 and np.all(np.diff(s) > 0)
    assert low_branch.points[-1].s == pytest.approx(0.06, abs=1e-14)
    assert np.all(np.abs(low_branch.column("M_residual")) <= 1e-10)
    c = low_branch.column("c")
    assert np.all(np.diff(c) > 0)


def test_branch_is_reproducible(low_branch):
    again = continue_branch(ContinuationConfig(step=0.01, max_modes=256), 0.06)
    assert np.array_equal(again.column("c"), low_branch.column("c"))


def test_empty_branch_below_first_step():
    b = continue_branch(ContinuationConfig(step=0.01), 0.0)
    assert len(b) == 1 and b.points[0].s == 0


def test_branch_rejects_out_of_order_points(low_branch):
    b = Branch()
    b.append(low_branch.waves[2])
    with pytest.raises(ValueError):
        b.append(low_branch.waves[1])


@pytest.mark.parametrize("mode", ["speed", "arclength"])
def test_other_continuation_modes_agree(mode, low_branch):
    b = continue_branch(ContinuationConfig(mode=mode, step=0.005, max_modes=256), 0.04)
    assert np.all(np.diff(b.column("s")) > 0)
    ref = {round(p.s, 12): p.c for p in low_branch.points}
    # compare the speed-steepness relation by interpolation on the reference branch
    s_ref, c_ref = low_branch.column("s"), low_branch.column("c")
    for p in b.points[1:]:
        w = solve_steepness(b.waves[b.points.index(p)].eta.samples, p.c, p.s, tol=1e-12)
        assert w.c == pytest.approx(p.c, abs=1e-10)
    assert b.points[-1].s >= 0.04 - 1e-12


def test_config_validation():
    with pytest.raises(ValueError):
        ContinuationConfig(mode="bogus")
    with pytest.raises(ValueError):
        ContinuationConfig(step=-1)
    with pytest.raises(ValueError):
        ContinuationConfig(tol=1e-16)
    with pytest.raises(ValueError):
        continue_branch(ContinuationConfig(), 0.2)


def test_wave_at_speed():
    w = wave_at_speed(1.05, modes=256)
    assert w.c == pytest.approx(1.05, abs=1e-14)
    assert w.residual_norm <= 1e-12


def test_speed_continuation_stops_at_fold():
    # the speed has a local maximum below the limiting steepness; fixed-speed steps cannot pass it
    with pytest.raises(StepFailure):
        continue_branch(ContinuationConfig(mode="speed", step=0.004, max_modes=4096, min_step=1e-5),
                        0.14)
