"""Super-Ohmic harmonic bath: spectral density, correlation function, and the
one-sided Fourier transform ``C(W) = int_0^inf F(t) exp(-i W t) dt`` that sets the
Redfield rates.

The real part of ``C`` is the delta-function limit of the damped time integral
and has a closed form. The imaginary part is a principal-value frequency
integral, evaluated only on request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import MutableMapping

import numpy as np

from .numerics import InvalidInputError, quad_adaptive

__all__ = [
    "BathParams",
    "HalfFourier",
    "HalfFourierOptions",
    "spectral_density",
    "correlation",
    "half_fourier",
]


@dataclass(frozen=True)
class BathParams:
    """Bath parameters.

    eta : friction (coupling strength, dimensionless), ``>= 0``
    s_exponent : Ohmicity ``s`` of ``g(w) ~ w**s``, ``> 0``
    omega_c : cutoff frequency, ``> 0``
    beta : inverse temperature, ``> 0``
    """

    eta: float = 0.01
    s_exponent: float = 3.0
    omega_c: float = 1.0
    beta: float = 0.1

    def __post_init__(self):
        for name in ("eta", "s_exponent", "omega_c", "beta"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidInputError(f"{name} must be finite, got {v}")
        if self.eta < 0:
            raise InvalidInputError(f"eta must be >= 0, got {self.eta}")
        if self.s_exponent <= 0:
            raise InvalidInputError(f"s_exponent must be > 0, got {self.s_exponent}")
        if self.omega_c <= 0:
            raise InvalidInputError(f"omega_c must be > 0, got {self.omega_c}")
        if self.beta <= 0:
            raise InvalidInputError(f"beta must be > 0, got {self.beta}")

    @property
    def cutoff(self) -> float:
        return 40.0 * self.omega_c


@dataclass(frozen=True)
class HalfFourierOptions:
    include_imag: bool = False
    abs_tol: float = 1e-13
    cutoff_factor: float = 40.0


@dataclass(frozen=True)
class HalfFourier:
    omega: float
    value: complex


def spectral_density(w, p: BathParams):
    """``g(w) = eta * w**s * omega_c**(1-s) * exp(-w/omega_c)`` for ``w >= 0``."""
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr < 0):
        raise InvalidInputError("spectral density is defined for w >= 0 only")
    out = p.eta * w_arr**p.s_exponent * p.omega_c ** (1.0 - p.s_exponent) * np.exp(-w_arr / p.omega_c)
    return float(out) if out.ndim == 0 else out


def _g_times_n(w: np.ndarray, p: BathParams) -> np.ndarray:
    """``g(w) * n(w)`` with ``n = 1/(exp(beta w) - 1)``, continuous at ``w = 0``."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    pos = w > 0
    wp = w[pos]
    out[pos] = spectral_density(wp, p) / np.expm1(p.beta * wp)
    # w -> 0: g(w)/(beta w) ~ eta w**(s-1) omega_c**(1-s) / beta
    if p.s_exponent > 1:
        zero = 0.0
    elif p.s_exponent == 1:
        zero = p.eta / p.beta
    else:
        zero = math.inf
    out[~pos] = zero
    return out


def correlation(tau: float, p: BathParams, abs_tol: float = 1e-12) -> complex:
    """Bath correlation ``F(tau) = int_0^W g(w) [coth(beta w/2) cos(w tau) - i sin(w tau)] dw``.

    The frequency integral is truncated at ``W = 40 * omega_c``.
    """
    if tau < 0:
        raise InvalidInputError(f"tau must be >= 0, got {tau}")
    top = p.cutoff

    def integrand(w):
        g = spectral_density(w, p)
        g_coth = 2.0 * _g_times_n(w, p) + g
        return g_coth * np.cos(w * tau) - 1j * g * np.sin(w * tau)

    panels = 1 + int(tau * top / (2.0 * math.pi))
    value, _ = quad_adaptive(integrand, 0.0, top, abs_tol, max_panels=max(4000, 4 * panels),
                             initial_panels=panels)
    return complex(value)


def _principal_value(h, w0: float, top: float, abs_tol: float) -> float:
    """``PV int_0^top h(w) / (w - w0) dw`` by pairing points symmetric about ``w0``."""
    if w0 <= 0.0 or w0 >= top:
        v, _ = quad_adaptive(lambda w: h(w) / (w - w0), 0.0, top, abs_tol, initial_panels=8)
        return float(np.real(v))
    half = min(w0, top - w0)

    def paired(u):
        return (h(w0 + u) - h(w0 - u)) / u

    total, _ = quad_adaptive(paired, 0.0, half, abs_tol, initial_panels=4)
    if w0 - half > 0.0:
        v, _ = quad_adaptive(lambda w: h(w) / (w - w0), 0.0, w0 - half, abs_tol, initial_panels=4)
        total += v
    if w0 + half < top:
        v, _ = quad_adaptive(lambda w: h(w) / (w - w0), w0 + half, top, abs_tol, initial_panels=8)
        total += v
    return float(np.real(total))


def half_fourier(
    omega: float,
    p: BathParams,
    opts: HalfFourierOptions = HalfFourierOptions(),
    cache: MutableMapping | None = None,
) -> HalfFourier:
    """One-sided transform ``C(omega)`` of the bath correlation function.

    Real part (closed form, ``n`` the Bose occupation)::

        Re C(W) = pi g(W) n(W)              W > 0
        Re C(W) = pi g(|W|) (n(|W|) + 1)    W < 0

    Imaginary part (only with ``opts.include_imag``)::

        Im C(W) = -PV int g (n+1)/(w + W) dw + PV int g n/(w - W) dw

    ``cache`` is an optional dict shared across calls of one Liouvillian build.
    """
    omega = float(omega)
    key = (omega, p, opts)
    if cache is not None and key in cache:
        return cache[key]
    a = abs(omega)
    gn = float(_g_times_n(np.array([a]), p)[0])
    if omega > 0:
        re = math.pi * gn
    elif omega < 0:
        re = math.pi * (gn + spectral_density(a, p))
    else:
        re = math.pi * gn
    im = 0.0
    if opts.include_imag and p.eta > 0:
        top = opts.cutoff_factor * p.omega_c

        def h_minus(w):
            return _g_times_n(w, p)

        def h_plus(w):
            return _g_times_n(w, p) + spectral_density(w, p)

        im = (-_principal_value(h_plus, -omega, top, opts.abs_tol)
              + _principal_value(h_minus, omega, top, opts.abs_tol))
    out = HalfFourier(omega, complex(re, im))
    if cache is not None:
        cache[key] = out
    return out
