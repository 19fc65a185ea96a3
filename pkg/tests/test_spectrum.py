import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from babenko import grid as g
from babenko.solver import StokesWave
from babenko.spectrum import (PencilOperators, apply_B_inverse, constraint_residuals,
                              dense_pencil, dense_pencil_eigenvalues, eigen_near,
                              flat_water_eigenvalues, pencil_residual, quadratic_residual)

NEAREST = 20


def _ordered(z):
    z = np.asarray(z)
    return z[np.lexsort((np.round(z.real, 8), z.imag))]


@pytest.fixture(scope="module")
def ops(small_waves):
    return PencilOperators(small_waves[0.12])


def _smooth(seed, N):
    rng = np.random.default_rng(seed)
    return g.resample(g.resample(rng.standard_normal(N), N // 4), N)


def test_block_identities(ops):
    eta, ep = ops.eta, ops.eta_prime
    assert np.allclose(ops.M(ep), ep, atol=1e-13)
    assert np.allclose(ops.M_star(np.ones(ops.N)), 1 + 2 * ops.k_eta, atol=1e-13)


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_M_star_is_adjoint_of_M(seed):
    from babenko.solver import stokes_expansion

    eta, c = stokes_expansion(0.1, 64)
    o = PencilOperators(StokesWave.from_samples(eta, c))
    v, w = _smooth(seed, 64), _smooth(seed + 1, 64)
    assert abs(g.inner(o.M(v), w) - g.inner(v, o.M_star(w))) <= 1e-13 * max(1, g.norm(v) * g.norm(w))


def test_B_inverse_round_trip(ops):
    r1, r2 = _smooth(1, ops.N), _smooth(2, ops.N)
    v, w = apply_B_inverse(ops, r1, r2)
    back = ops.B(np.concatenate([v, w]))
    assert np.allclose(back, np.concatenate([r1, r2]), atol=1e-10)


def test_kernel_chains(ops):
    X, Y = ops.kernel()
    # right chains: A x0 = 0, A x1 = B x0
    for j0, j1 in ((0, 1), (2, 3)):
        assert np.linalg.norm(ops.A(X[:, j0])) / np.sqrt(ops.N) < 1e-10
        r = ops.A(X[:, j1]) - ops.B(X[:, j0])
        assert np.linalg.norm(r) / np.sqrt(ops.N) < 1e-9
    # left kernel vectors annihilate the range of A
    x = np.concatenate([_smooth(3, ops.N), _smooth(4, ops.N)])
    for j in (0, 2):
        assert abs(Y[:, j] @ ops.A(x)) / ops.N < 1e-10


def test_projector_is_idempotent(ops):
    P = ops.projector()
    x = np.concatenate([_smooth(5, ops.N), _smooth(6, ops.N)])
    assert np.allclose(P(P(x)), P(x), atol=1e-10)
    X, _ = ops.kernel()
    assert np.linalg.norm(P(X[:, 1])) < 1e-8 * np.linalg.norm(X[:, 1])


@pytest.mark.parametrize("s", [0.05, 0.12])
def test_matrix_free_matches_dense(small_waves, s):
    wave = small_waves[s]
    dense = dense_pencil_eigenvalues(wave)[:NEAREST + 8]
    res = eigen_near(PencilOperators(wave), 0.0, k=NEAREST)
    assert np.max(res.residuals) < 1e-7
    for lam in res.eigenvalues:
        assert np.min(np.abs(dense - lam)) < 1e-8


def test_spectrum_symmetries_and_constraints(ops):
    res = eigen_near(ops, 0.0, k=8)
    lam = res.eigenvalues
    # Hamiltonian and reversible: lambda, -lambda, conj(lambda) come together
    for l in lam:
        assert np.min(np.abs(lam + l)) < 1e-8
        assert np.min(np.abs(lam - np.conj(l))) < 1e-8
    for c1, c2 in res.constraint_residuals:
        assert abs(c1) < 1e-10 and abs(c2) < 1e-10
    for l, (v, w) in zip(lam, res.eigenfunctions):
        assert quadratic_residual(ops, l, v, w) < 1e-6
    doc = res.to_json(s=0.12, c=ops.c)
    assert '"eigenvalues"' in doc


def test_no_deflation_appends_kernel(ops):
    res = eigen_near(ops, 0.0, k=2, deflate=False)
    assert np.sum(res.eigenvalues == 0) == 4
    assert np.all(res.residuals[-4:][[0, 2]] < 1e-9)


def test_shifted_spectrum_matches_dense(ops):
    sigma = 0.4j
    res = eigen_near(ops, sigma, k=3)
    dense = dense_pencil_eigenvalues(ops.wave)
    expected = dense[np.argsort(np.abs(dense - sigma))[:3]]
    assert np.allclose(_ordered(res.eigenvalues), _ordered(expected), atol=1e-8)
    assert np.max(res.residuals) < 1e-9


def test_flat_water_anchor():
    flat = StokesWave.zero(64, 1.1)
    ops = PencilOperators(flat)
    res = eigen_near(ops, 0.5j, k=2)
    exact = flat_water_eigenvalues(1.1, 64)
    expected = exact[np.argsort(np.abs(exact - 0.5j))[:2]]
    assert np.allclose(_ordered(res.eigenvalues), _ordered(expected), atol=1e-10)
    dense = dense_pencil_eigenvalues(flat)
    assert np.allclose(_ordered(dense[np.argsort(np.abs(dense))][:20]),
                       _ordered(exact[np.argsort(np.abs(exact))][:20]), atol=1e-8)
    with pytest.raises(ValueError):
        eigen_near(ops, 0.0)


def test_dense_pencil_shapes(small_waves):
    A, B = dense_pencil(small_waves[0.05])
    assert A.shape == B.shape == (2 * 255, 2 * 255)


def test_argument_checks(ops):
    with pytest.raises(ValueError):
        eigen_near(ops, 0.0, k=0)
    with pytest.raises(ValueError):
        eigen_near(ops, 0.0, k=2 * ops.N)


def test_pencil_residual_of_exact_pair():
    flat = StokesWave.zero(32, 1.2)
    ops = PencilOperators(flat)
    u = g.grid(32)
    # mode n = 2: v = e^{2iu}, w from K w = lambda v
    lam = 1j * (1.2 * 2 - np.sqrt(2))
    v = np.exp(2j * u)
    w = lam * v / 2
    assert pencil_residual(ops, lam, np.concatenate([v, w])) < 1e-13
    assert constraint_residuals(ops, v, w)[0] == pytest.approx(0, abs=1e-15)
