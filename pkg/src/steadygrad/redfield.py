"""Spin-boson Redfield generator.

Vectorisation is column stacking throughout: matrix entry ``(mu, nu)`` sits at
index ``mu + d*nu`` of ``vec(rho)``, so ``vec(A X B) = (B.T kron A) vec(X)``.

The Liouvillian is assembled in the eigenbasis of the system Hamiltonian and
also exposed in the fixed site basis (the basis ``H_S`` is written in). The
site-basis form is the one to use whenever parameters change, because the
eigenbasis itself moves with the parameters.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .bath import BathParams, HalfFourierOptions, half_fourier
from .numerics import EigenSystem, InvalidInputError, eig_hermitian
from . import instrument

__all__ = [
    "PARAM_NAMES",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "ModelParams",
    "Liouvillian",
    "vec",
    "unvec",
    "build_hamiltonian",
    "coupling_in_eigenbasis",
    "gamma_plus",
    "gamma_minus",
    "redfield_tensor",
    "build_liouvillian",
    "rhs",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

SYSTEM_PARAMS = ("epsilon", "delta")
BATH_PARAMS = ("beta", "eta", "omega_c", "s_exponent")
PARAM_NAMES = SYSTEM_PARAMS + BATH_PARAMS


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(x: np.ndarray, d: int | None = None) -> np.ndarray:
    x = np.asarray(x)
    if d is None:
        d = math.isqrt(x.shape[0])
    return x.reshape(d, d, order="F")


@dataclass(frozen=True)
class ModelParams:
    """Full parameter vector: system splitting ``epsilon``, tunnelling ``delta``,
    and the bath. ``free`` lists the parameters treated as variables."""

    epsilon: float = 0.1
    delta: float = 0.0
    bath: BathParams = field(default_factory=BathParams)
    free: frozenset = frozenset()

    def __post_init__(self):
        for name in SYSTEM_PARAMS:
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")
        unknown = set(self.free) - set(PARAM_NAMES)
        if unknown:
            raise InvalidInputError(f"unknown parameter(s): {sorted(unknown)}")
        object.__setattr__(self, "free", frozenset(self.free))

    @property
    def free_mask(self) -> dict[str, bool]:
        return {name: name in self.free for name in PARAM_NAMES}

    def free_names(self) -> list[str]:
        """Free parameters in canonical order."""
        return [n for n in PARAM_NAMES if n in self.free]

    def get(self, name: str) -> float:
        if name in SYSTEM_PARAMS:
            return getattr(self, name)
        if name in BATH_PARAMS:
            return getattr(self.bath, name)
        raise InvalidInputError(f"unknown parameter {name!r}")

    def with_value(self, name: str, value: float) -> "ModelParams":
        if name in SYSTEM_PARAMS:
            return dataclasses.replace(self, **{name: float(value)})
        if name in BATH_PARAMS:
            return dataclasses.replace(self, bath=dataclasses.replace(self.bath, **{name: float(value)}))
        raise InvalidInputError(f"unknown parameter {name!r}")

    def with_free(self, names) -> "ModelParams":
        return dataclasses.replace(self, free=frozenset(names))


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Generator ``d vec(rho)/dt = matrix @ vec(rho)`` in the eigenbasis of ``H_S``."""

    dim: int
    matrix: np.ndarray
    basis: EigenSystem
    bohr_frequencies: np.ndarray
    coupling: np.ndarray
    params: ModelParams | None = None

    def __post_init__(self):
        for arr in (self.matrix, self.bohr_frequencies, self.coupling):
            arr.setflags(write=False)

    @cached_property
    def _to_site(self) -> np.ndarray:
        U = self.basis.eigenvectors
        return np.kron(U.conj(), U)

    @cached_property
    def site_matrix(self) -> np.ndarray:
        """Generator acting on ``vec(rho)`` expressed in the site basis."""
        T = self._to_site
        m = T @ self.matrix @ T.conj().T
        m.setflags(write=False)
        return m

    def to_eigenbasis(self, rho_site: np.ndarray) -> np.ndarray:
        U = self.basis.eigenvectors
        return U.conj().T @ rho_site @ U

    def to_site(self, rho_eig: np.ndarray) -> np.ndarray:
        U = self.basis.eigenvectors
        return U @ rho_eig @ U.conj().T


def build_hamiltonian(p: ModelParams) -> np.ndarray:
    """``H_S = epsilon/2 sigma_z + delta/2 sigma_x``."""
    return 0.5 * p.epsilon * SIGMA_Z + 0.5 * p.delta * SIGMA_X


def coupling_in_eigenbasis(basis: EigenSystem, operator: np.ndarray = SIGMA_Z) -> np.ndarray:
    """Matrix elements ``<mu|S|nu>`` of the system coupling operator."""
    U = basis.eigenvectors
    return U.conj().T @ operator @ U


def _rate_table(basis: EigenSystem, bath: BathParams, opts: HalfFourierOptions, cache=None) -> np.ndarray:
    w = basis.bohr_frequencies()
    if cache is None:
        cache = {}
    table = np.empty(w.shape, dtype=complex)
    for idx, omega in np.ndenumerate(w):
        table[idx] = half_fourier(omega, bath, opts, cache).value
    return table


def gamma_plus(basis: EigenSystem, coupling: np.ndarray, bath: BathParams,
               opts: HalfFourierOptions = HalfFourierOptions(), cache=None) -> np.ndarray:
    """``G+[l, n, m, k] = S[l, n] S[m, k] C(w[m, k])``."""
    C = _rate_table(basis, bath, opts, cache)
    return np.einsum("ln,mk->lnmk", coupling, coupling * C)


def gamma_minus(basis: EigenSystem, coupling: np.ndarray, bath: BathParams,
                opts: HalfFourierOptions = HalfFourierOptions(), cache=None,
                g_plus: np.ndarray | None = None, independent: bool = False) -> np.ndarray:
    """``G-[l, n, m, k] = S[l, n] S[m, k] conj(C(w[n, l]))``.

    By default obtained from ``G+`` through ``G-[l, n, m, k] = conj(G+[k, m, n, l])``.
    ``independent=True`` evaluates the rates afresh instead (used in tests).
    """
    if independent:
        C = _rate_table(basis, bath, opts, cache)
        return np.einsum("ln,mk->lnmk", coupling * np.conj(C.T), coupling)
    if g_plus is None:
        g_plus = gamma_plus(basis, coupling, bath, opts, cache)
    return np.conj(g_plus.transpose(3, 2, 1, 0))


def redfield_tensor(g_plus: np.ndarray, g_minus: np.ndarray) -> np.ndarray:
    """``R[m, n, k, l]`` from the transition-rate tensors.

    ``R = G+[l,n,m,k] + G-[l,n,m,k] - d(n,l) sum_a G+[m,a,a,k] - d(m,k) sum_a G-[l,a,a,n]``
    """
    d = g_plus.shape[0]
    eye = np.eye(d)
    R = np.einsum("lnmk->mnkl", g_plus + g_minus)
    R -= np.einsum("mk,nl->mnkl", np.einsum("maak->mk", g_plus), eye)
    R -= np.einsum("mk,ln->mnkl", eye, np.einsum("laan->ln", g_minus))
    return R


def build_liouvillian(p: ModelParams, opts: HalfFourierOptions = HalfFourierOptions(),
                      coupling_operator: np.ndarray = SIGMA_Z) -> Liouvillian:
    """Assemble ``L[(m,n),(k,l)] = -i w[m,n] d(m,k) d(n,l) + R[m,n,k,l]``."""
    instrument.count("liouvillian_builds")
    H = build_hamiltonian(p)
    basis = eig_hermitian(H)
    d = basis.dim
    w = basis.bohr_frequencies()
    S = coupling_in_eigenbasis(basis, coupling_operator)
    cache: dict = {}
    gp = gamma_plus(basis, S, p.bath, opts, cache)
    gm = gamma_minus(basis, S, p.bath, opts, cache, g_plus=gp)
    R = redfield_tensor(gp, gm)
    # R[m,n,k,l] -> row m + d n, column k + d l
    L = R.transpose(1, 0, 3, 2).reshape(d * d, d * d)
    L = L + np.diag(-1j * vec(w))
    return Liouvillian(dim=d, matrix=L, basis=basis, bohr_frequencies=w, coupling=S, params=p)


def rhs(L: Liouvillian, rho: np.ndarray, basis: str = "eigen") -> np.ndarray:
    """``d rho/dt`` for a density matrix in the eigenbasis (or ``basis="site"``)."""
    rho = np.asarray(rho)
    if rho.shape != (L.dim, L.dim):
        raise InvalidInputError(f"density matrix shape {rho.shape} does not match dimension {L.dim}")
    M = L.matrix if basis == "eigen" else L.site_matrix
    return unvec(M @ vec(rho), L.dim)
