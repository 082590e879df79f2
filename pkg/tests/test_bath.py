import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from steadygrad.bath import BathParams, HalfFourierOptions, correlation, half_fourier, spectral_density
from steadygrad.numerics import InvalidInputError

P = BathParams()  # eta=0.01, s=3, omega_c=1, beta=0.1

# scipy.integrate.quad of the correlation integrand at tau = 0 (oracles.correlation_scipy)
RE_F0_ORACLE = 0.40398026085797073


def test_bath_params_validation():
    for bad in (dict(eta=-1e-3), dict(s_exponent=0.0), dict(omega_c=0.0), dict(beta=-1.0), dict(beta=math.nan)):
        with pytest.raises(InvalidInputError):
            BathParams(**bad)


def test_spectral_density_values():
    assert spectral_density(1.0, P) == pytest.approx(0.01 * math.exp(-1.0), rel=1e-15)
    assert spectral_density(0.0, P) == 0.0


def test_spectral_density_peak_at_s_omega_c():
    w = np.linspace(0.0, 10.0, 100001)
    assert w[np.argmax(spectral_density(w, P))] == pytest.approx(3.0, abs=1e-4)


def test_spectral_density_rejects_negative():
    with pytest.raises(InvalidInputError):
        spectral_density(-0.1, P)


def test_correlation_at_zero():
    F0 = correlation(0.0, P)
    assert F0.imag == 0.0
    assert F0.real == pytest.approx(RE_F0_ORACLE, rel=1e-10)


@pytest.mark.parametrize("tau", [0.3, 2.0, 7.5])
def test_correlation_matches_scipy(tau):
    ref = oracles.correlation_scipy(tau)
    assert abs(correlation(tau, P) - ref) <= 1e-10 * abs(oracles.correlation_scipy(0.0))


def test_correlation_decays():
    assert abs(correlation(50.0, P)) < 1e-3 * abs(correlation(0.0, P))


def test_half_fourier_closed_form():
    # Re C = pi/2 g(|W|) (coth(beta|W|/2) - sign W)
    for w in (0.3, -0.3, 2.5, -2.5):
        a = abs(w)
        ref = 0.5 * math.pi * spectral_density(a, P) * (1.0 / math.tanh(0.5 * P.beta * a) - math.copysign(1, w))
        assert half_fourier(w, P).value.real == pytest.approx(ref, rel=1e-13)


def test_detailed_balance_single():
    r = half_fourier(0.5, P).value.real / half_fourier(-0.5, P).value.real
    assert r == pytest.approx(0.951229424500714, rel=1e-12)


def test_zero_frequency_limit():
    assert half_fourier(0.0, P).value == 0.0
    d = 1e-7
    assert abs(half_fourier(d, P).value - half_fourier(-d, P).value) < 1e-15


@pytest.mark.parametrize("omega", [0.1, -0.1, 1.0, -1.0])
def test_half_fourier_matches_damped_oracle(omega):
    ref = oracles.re_half_fourier_extrapolated(omega)
    assert half_fourier(omega, P).value.real == pytest.approx(ref, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(w=st.floats(1e-3, 5.0), beta=st.floats(0.01, 5.0), eta=st.floats(1e-4, 1.0))
def test_detailed_balance_property(w, beta, eta):
    p = BathParams(eta=eta, beta=beta)
    up, down = half_fourier(w, p).value.real, half_fourier(-w, p).value.real
    assert up / down == pytest.approx(math.exp(-beta * w), rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(w=st.floats(-8.0, 8.0), s=st.floats(1.5, 4.0), omega_c=st.floats(0.2, 3.0))
def test_rates_nonnegative(w, s, omega_c):
    assert half_fourier(w, BathParams(s_exponent=s, omega_c=omega_c)).value.real >= -1e-12


def test_cache_reuses_entries():
    cache = {}
    a = half_fourier(0.4, P, cache=cache)
    assert half_fourier(0.4, P, cache=cache) is a
    assert len(cache) == 1


def test_imaginary_part_off_by_default_and_finite_when_on():
    assert half_fourier(0.7, P).value.imag == 0.0
    im = half_fourier(0.7, P, HalfFourierOptions(include_imag=True)).value.imag
    assert math.isfinite(im) and im != 0.0


def test_imaginary_part_matches_damped_oracle():
    # Im of the damped transform at small eps approaches the principal value
    from scipy import integrate

    omega, eps = 0.7, 1e-4

    def f(w):
        z = eps + 1j * omega
        den = z * z + w * w
        coth = 1.0 / np.tanh(0.5 * P.beta * w)
        return (spectral_density(w, P) * (coth * z / den - 1j * w / den)).imag

    pts = [0.0, omega - 0.05, omega, omega + 0.05, 40.0]
    ref = sum(integrate.quad(f, lo, hi, limit=500, epsabs=1e-14)[0] for lo, hi in zip(pts[:-1], pts[1:]))
    im = half_fourier(omega, P, HalfFourierOptions(include_imag=True)).value.imag
    assert im == pytest.approx(ref, rel=1e-3)
