import numpy as np
import pytest

from babenko import grid as g
from babenko.errors import DegenerateExtremum
from babenko.jordan import (D_direct, NormalFormPrediction, alpha_constant, build_chain,
                            chain_first, chain_report, classify_splitting,
                            generalized_kernel_dimension, predict_splitting)
from babenko.solver import d_eta_dc, newton_solve, wave_at_steepness
from babenko.conserved import TWO_PI, wave_momentum


@pytest.fixture(scope="module")
def generic():
    return wave_at_steepness(0.12, modes=512)


def test_first_chain_closed_forms(wave_s1):
    v1, w1 = chain_first(wave_s1)
    eta = wave_s1.eta.samples
    w_exact = g.hilbert(eta)
    v_exact = -d_eta_dc(wave_s1).samples
    assert g.norm(w1 - w_exact) / g.norm(w_exact) < 1e-8
    assert g.norm(v1 - v_exact) / g.norm(v_exact) < 1e-8


def test_parity_ladder(chain_s1):
    for name, defect in chain_s1.parity_defects.items():
        assert defect <= 1e-9, name


def test_back_substitution_residuals(chain_s1):
    assert chain_s1.residuals["chain2"] <= 1e-9
    assert chain_s1.residuals["chain3"] <= 1e-9
    assert chain_s1.residuals["chain1"] <= 1e-9


def test_chain_orthogonality(chain_s1):
    for name, val in chain_s1.orthogonality.items():
        assert abs(val) <= 1e-10, name


def test_D_direct_matches_momentum_derivative(generic):
    h = 1e-5
    waves = [newton_solve(generic.eta.samples, generic.c + k * h, tol=1e-13) for k in (-1, 1)]
    fd = (wave_momentum(waves[1]) - wave_momentum(waves[0])) / (2 * h) / TWO_PI
    D = D_direct(generic)
    assert abs(D - fd) <= 1e-5 * abs(D)


def test_D_vanishes_at_extremum(chain_s1, critical):
    assert abs(chain_s1.D) <= 1e-6
    _, chain, _ = critical
    assert abs(chain.D) <= 1e-9


def test_alpha_forms_agree(chain_s1, wave_s1):
    a1 = alpha_constant(wave_s1, chain_s1.v3_tilde, form="reduced")
    a2 = alpha_constant(wave_s1, chain_s1.v3_tilde, form="ratio")
    assert a1 == pytest.approx(a2, rel=1e-8)
    assert chain_s1.alpha == pytest.approx(a1)


def test_kernel_dimension(generic, chain_s1, wave_s1):
    dim, lengths = generalized_kernel_dimension(generic)
    assert dim == 4 and lengths == [2, 2]
    dim, lengths = generalized_kernel_dimension(wave_s1, chain=chain_s1)
    assert dim >= 6 and lengths[0] == 4
    assert abs(chain_s1.B_coeff) > 1.0


@pytest.mark.slow
def test_B_converges_under_refinement(critical):
    wave, chain, _ = critical
    from babenko.solver import solve_steepness

    fine = solve_steepness(g.resample(wave.eta.samples, 2 * wave.N), wave.c, wave.s, tol=1e-12)
    B_fine = build_chain(fine).B_coeff
    assert B_fine == pytest.approx(chain.B_coeff, rel=1e-6)


def test_prediction_sign_rules():
    pred = NormalFormPrediction(c0=1.09, s0=0.1366, P2=-300.0, B_coeff=10.0)
    assert pred.slope == pytest.approx(30.0)
    assert predict_splitting(pred, 1e-5) == pytest.approx(3e-4)
    assert predict_splitting(pred, -1e-5) == pytest.approx(-3e-4)
    assert predict_splitting(pred, 0.0) == 0
    assert classify_splitting(pred, 1e-5) == "real"
    assert classify_splitting(pred, -1e-5) == "imaginary"
    assert classify_splitting(pred, 0) == "zero"
    assert pred.real_pair_side() == 1
    flipped = NormalFormPrediction(1.09, 0.1366, 300.0, 10.0)
    assert flipped.real_pair_side() == -1 and classify_splitting(flipped, 1e-5) == "imaginary"


def test_degenerate_extremum():
    pred = NormalFormPrediction(1.0, 0.1, 1e-12, 10.0)
    with pytest.raises(DegenerateExtremum):
        predict_splitting(pred, 1e-5)


def test_critical_prediction(critical):
    wave, chain, pred = critical
    # the momentum has a maximum: P'' < 0, and the chain coefficient is positive
    assert pred.P2 < 0 and pred.B_coeff > 0
    assert pred.real_pair_side() == 1
    doc = chain_report(pred, chain)
    assert '"B"' in doc and '"lambda1_sq"' in doc


def test_flat_state_has_no_finite_kernel():
    from babenko.solver import StokesWave

    with pytest.raises(ValueError):
        generalized_kernel_dimension(StokesWave.zero(32, 1.1))
