import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_density
from steadygrad.bath import BathParams
from steadygrad.redfield import SIGMA_Z, ModelParams, build_liouvillian, rhs
from steadygrad.steady import (
    DEFAULT_RHO0,
    DegenerateSteadyStateError,
    IntegratorOptions,
    InvalidDensityMatrix,
    NonConvergenceError,
    gibbs_state,
    integrate_to_steady,
    kernel_dimension,
    null_space_steady,
    steady_state,
    validate_density_matrix,
)


def test_default_initial_state():
    validate_density_matrix(DEFAULT_RHO0)
    assert np.trace(SIGMA_Z @ DEFAULT_RHO0).real == pytest.approx(0.5)
    assert np.linalg.eigvalsh(DEFAULT_RHO0) == pytest.approx([0.0, 1.0], abs=1e-15)


def test_validate_names_violated_check():
    with pytest.raises(InvalidDensityMatrix, match="trace"):
        validate_density_matrix(np.diag([0.5, 0.6]))
    with pytest.raises(InvalidDensityMatrix, match="hermitian"):
        validate_density_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(InvalidDensityMatrix, match="shape"):
        validate_density_matrix(np.eye(3) / 3, d=2)


def test_reference_point_methods_agree(reference_point):
    L = build_liouvillian(reference_point)
    a = integrate_to_steady(L, DEFAULT_RHO0)
    b = null_space_steady(L)
    assert a.residual_norm <= 1e-10
    assert abs(np.trace(a.rho_ss) - 1) < 1e-10
    assert np.max(np.abs(a.rho_ss - b.rho_ss)) < 1e-8
    assert np.max(np.abs(b.rho_ss - b.rho_ss.conj().T)) < 1e-12
    assert np.all(np.linalg.eigvalsh(b.rho_ss) > 0)
    assert a.method == "time-integration" and b.method == "null-space"


def test_steady_state_is_gibbs(reference_point):
    # Redfield with a bath obeying detailed balance relaxes to the bare-system thermal state
    r = null_space_steady(build_liouvillian(reference_point))
    np.testing.assert_allclose(r.rho_ss, gibbs_state(reference_point), atol=1e-14)
    assert r.expectation(SIGMA_Z) == pytest.approx(oracles.gibbs_sigma_z(0.1, 0.1, 0.1), rel=1e-12)


def test_already_stationary_returns_immediately(reference_point):
    L = build_liouvillian(reference_point)
    rho = null_space_steady(L).rho_ss
    r = integrate_to_steady(L, rho)
    assert r.steps <= 1


def test_independent_of_initial_state(reference_point):
    L = build_liouvillian(reference_point)
    rng = np.random.default_rng(1)
    a = integrate_to_steady(L, random_density(rng))
    b = integrate_to_steady(L, random_density(rng))
    assert np.max(np.abs(a.rho_ss - b.rho_ss)) < 1e-8


def test_pure_dephasing_keeps_populations():
    L = build_liouvillian(ModelParams(0.1, 0.0))
    r = integrate_to_steady(L, DEFAULT_RHO0)
    assert r.degenerate and r.kernel_dim == 2
    np.testing.assert_allclose(np.diag(r.rho_ss).real, [0.75, 0.25], atol=1e-12)
    assert r.expectation(SIGMA_Z) == pytest.approx(0.5, abs=1e-12)
    assert r.warnings and "degenerate" in r.warnings[0]


def test_null_space_degenerate_at_delta_zero():
    with pytest.raises(DegenerateSteadyStateError) as info:
        null_space_steady(build_liouvillian(ModelParams(0.1, 0.0)))
    assert info.value.dimension == 2


def test_closed_system_degenerate():
    L = build_liouvillian(ModelParams(0.1, 0.2, BathParams(eta=0.0)))
    with pytest.raises(DegenerateSteadyStateError) as info:
        null_space_steady(L)
    assert info.value.dimension >= 2
    # without the degenerate fallback the coherent oscillation never settles
    opts = IntegratorOptions(allow_degenerate=False, t_max=2e3)
    with pytest.raises(NonConvergenceError) as nc:
        integrate_to_steady(L, DEFAULT_RHO0, opts=opts)
    assert nc.value.residual > 1e-10


def test_closed_system_ergodic_average():
    # kernel projection = time average of the trajectory: dephased in the eigenbasis
    p = ModelParams(0.1, 0.2, BathParams(eta=0.0))
    L = build_liouvillian(p)
    r = integrate_to_steady(L, DEFAULT_RHO0)
    rho_e = L.to_eigenbasis(DEFAULT_RHO0)
    expected = L.to_site(np.diag(np.diag(rho_e)))
    np.testing.assert_allclose(r.rho_ss, expected, atol=1e-12)


def test_kernel_dimension(reference_point):
    assert kernel_dimension(build_liouvillian(reference_point).site_matrix) == 1
    assert kernel_dimension(build_liouvillian(ModelParams(0.1, 0.0)).site_matrix) == 2


def test_dispatcher_rejects_unknown_method(reference_point):
    from steadygrad.numerics import InvalidInputError

    with pytest.raises(InvalidInputError):
        steady_state(build_liouvillian(reference_point), method="newton")


@settings(max_examples=8, deadline=None)
@given(
    eps=st.floats(0.05, 1.0), delta=st.floats(0.1, 1.0), beta=st.floats(0.05, 1.0),
    eta=st.floats(0.005, 0.05), seed=st.integers(0, 2**16),
)
def test_methods_agree_random(eps, delta, beta, eta, seed):
    p = ModelParams(eps, delta, BathParams(eta=eta, beta=beta))
    L = build_liouvillian(p)
    rho0 = random_density(np.random.default_rng(seed))
    a = integrate_to_steady(L, rho0)
    b = null_space_steady(L)
    assert np.max(np.abs(a.rho_ss - b.rho_ss)) < 1e-8
    for r in (a, b):
        assert abs(np.trace(r.rho_ss) - 1) < 1e-10
        assert np.max(np.abs(r.rho_ss - r.rho_ss.conj().T)) < 1e-10
        assert np.linalg.norm(rhs(L, r.rho_ss, "site")) <= 1e-10
