import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_hermitian
from steadygrad.numerics import (
    InvalidInputError,
    QuadratureError,
    dopri5_to_stationary,
    eig_hermitian,
    quad_adaptive,
    solve_min_norm,
)


# ---------------------------------------------------------------- eigensolver


def test_eig_pauli_z():
    es = eig_hermitian(np.diag([1.0, -1.0]).astype(complex))
    np.testing.assert_allclose(es.eigenvalues, [-1.0, 1.0], atol=1e-15)


def test_eig_diagonal_hamiltonian():
    es = eig_hermitian(np.diag([0.05, -0.05]).astype(complex))
    np.testing.assert_allclose(es.eigenvalues, [-0.05, 0.05], atol=1e-15)


def test_eig_two_level_closed_form():
    H = 0.5 * np.array([[0.1, 0.1], [0.1, -0.1]], dtype=complex)
    es = eig_hermitian(H)
    r = math.sqrt(2) * 0.05
    np.testing.assert_allclose(es.eigenvalues, [-r, r], atol=1e-15)


def test_eig_rejects_non_square_and_non_hermitian():
    with pytest.raises(InvalidInputError, match="square"):
        eig_hermitian(np.zeros((2, 3)))
    with pytest.raises(InvalidInputError, match="ermitian"):
        eig_hermitian(np.array([[0, 1], [0, 0]], dtype=complex))


def test_eig_phase_convention():
    rng = np.random.default_rng(3)
    es = eig_hermitian(random_hermitian(rng, 5))
    for v in es.eigenvectors.T:
        k = int(np.argmax(np.abs(v)))
        assert abs(v[k].imag) < 1e-14 and v[k].real > 0


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_eig_residual_and_unitarity(d, seed):
    H = random_hermitian(np.random.default_rng(seed), d)
    es = eig_hermitian(H)
    U, lam = es.eigenvectors, es.eigenvalues
    norm = np.linalg.norm(H, 2)
    assert np.all(np.diff(lam) >= 0)
    for k in range(d):
        assert np.linalg.norm(H @ U[:, k] - lam[k] * U[:, k]) <= 1e-12 * max(norm, 1.0)
    assert np.linalg.norm(U.conj().T @ U - np.eye(d)) <= 1e-12
    rec = U @ np.diag(lam) @ U.conj().T
    assert np.linalg.norm(rec - H) <= 1e-10 * max(np.linalg.norm(H), 1e-300)


def test_eig_matches_numpy_eigvalsh():
    rng = np.random.default_rng(11)
    H = random_hermitian(rng, 6)
    np.testing.assert_allclose(eig_hermitian(H).eigenvalues, np.linalg.eigvalsh(H), atol=1e-12)


def test_bohr_frequencies_antisymmetric():
    es = eig_hermitian(np.diag([0.3, -0.2, 0.1]).astype(complex))
    w = es.bohr_frequencies()
    np.testing.assert_allclose(w, -w.T)
    assert w[2, 0] == pytest.approx(0.5)


# ------------------------------------------------------------ min-norm solve


def test_min_norm_identity():
    sol = solve_min_norm(np.eye(2), np.array([1.0, 2.0]))
    np.testing.assert_allclose(sol.x, [1, 2])
    assert sol.residual == pytest.approx(0.0, abs=1e-15)
    assert sol.rank == 2


def test_min_norm_deflates_null_direction():
    sol = solve_min_norm(np.diag([1.0, 0.0]), np.array([3.0, 0.0]))
    np.testing.assert_allclose(sol.x, [3, 0])
    assert sol.residual == pytest.approx(0.0, abs=1e-15)
    assert sol.rank == 1


def test_min_norm_rank_deficient_random():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(8, 7)) @ rng.normal(size=(7, 8))
    b = A @ rng.normal(size=8)
    sol = solve_min_norm(A, b)
    assert sol.rank == 7
    assert sol.residual <= 1e-10 * np.linalg.norm(b)
    # minimum norm: no component along the null space
    null = np.linalg.svd(A)[2][-1].conj()
    assert abs(null.conj() @ sol.x) < 1e-10 * np.linalg.norm(sol.x)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8))
def test_min_norm_full_rank_exact(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) + 4 * n * np.eye(n)
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    sol = solve_min_norm(A, b)
    assert sol.residual <= 1e-12 * np.linalg.norm(b)


def test_min_norm_shape_mismatch():
    with pytest.raises(InvalidInputError):
        solve_min_norm(np.eye(3), np.ones(2))


# ------------------------------------------------------------------ quadrature


def test_quad_constant():
    v, err = quad_adaptive(lambda w: np.ones_like(w), 0.0, 1.0)
    assert v == pytest.approx(1.0, abs=1e-14)


def test_quad_gamma_four():
    v, _ = quad_adaptive(lambda w: w**3 * np.exp(-w), 0.0, 40.0, abs_tol=1e-12)
    assert v == pytest.approx(6.0, abs=1e-8)


def test_quad_sine():
    v, _ = quad_adaptive(np.sin, 0.0, math.pi, abs_tol=1e-12)
    assert v == pytest.approx(2.0, abs=1e-12)


def test_quad_complex_integrand():
    v, _ = quad_adaptive(lambda w: np.exp(1j * w), 0.0, math.pi / 2, abs_tol=1e-13)
    assert v == pytest.approx(1.0 + 1.0j, abs=1e-12)


def test_quad_panel_budget_exhausted():
    with pytest.raises(QuadratureError) as info:
        quad_adaptive(lambda w: np.sin(1.0 / (w + 1e-9)), 0.0, 1.0, abs_tol=1e-15, max_panels=10)
    a, b, _err = info.value.worst_panel
    assert 0.0 <= a < b <= 1.0


def test_quad_rejects_bad_interval():
    with pytest.raises(InvalidInputError):
        quad_adaptive(np.sin, 1.0, 0.0)


# ------------------------------------------------------------------ integrator


def test_dopri5_linear_decay_to_fixed_point():
    # y' = -(y - c) relaxes to c
    c = np.array([1.0, -2.0])
    run = dopri5_to_stationary(lambda y: -(y - c), np.zeros(2), 1e-12, h_max=0.9)
    assert run.converged
    np.testing.assert_allclose(run.y, c, atol=1e-11)


def test_dopri5_reports_nonconvergence():
    # pure rotation never becomes stationary
    M = np.array([[0.0, 1.0], [-1.0, 0.0]])
    run = dopri5_to_stationary(lambda y: M @ y, np.array([1.0, 0.0]), 1e-10, h_max=0.5, t_max=50.0)
    assert not run.converged
    assert run.residual > 0.5


def test_dopri5_already_stationary():
    run = dopri5_to_stationary(lambda y: np.zeros_like(y), np.ones(3), 1e-10)
    assert run.converged and run.steps == 0
