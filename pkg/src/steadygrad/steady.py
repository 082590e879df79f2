"""Steady states of a Liouvillian: time integration to stationarity and a direct
null-space solve. Density matrices passed in and out are in the site basis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import instrument
from .numerics import InvalidInputError, dopri5_to_stationary, solve_min_norm
from .numerics import eig_hermitian
from .redfield import Liouvillian, ModelParams, build_hamiltonian, unvec, vec

__all__ = [
    "DEFAULT_RHO0",
    "SteadyStateError",
    "NonConvergenceError",
    "DegenerateSteadyStateError",
    "InvalidDensityMatrix",
    "IntegratorOptions",
    "SteadyStateResult",
    "validate_density_matrix",
    "kernel_dimension",
    "integrate_to_steady",
    "null_space_steady",
    "steady_state",
    "gibbs_state",
]

log = logging.getLogger(__name__)

_S3 = np.sqrt(3.0) / 4.0
#: Initial state used for the spin-boson sensitivity runs (pure state, <sigma_z> = 1/2).
DEFAULT_RHO0 = np.array([[0.75, -1j * _S3], [1j * _S3, 0.25]])


class SteadyStateError(RuntimeError):
    pass


class NonConvergenceError(SteadyStateError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class DegenerateSteadyStateError(SteadyStateError):
    def __init__(self, message: str, dimension: int):
        super().__init__(message)
        self.dimension = dimension


class InvalidDensityMatrix(InvalidInputError):
    pass


def validate_density_matrix(rho, d: int | None = None, atol: float = 1e-10) -> np.ndarray:
    """Check shape, Hermiticity and unit trace; positivity is only logged."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or (d is not None and rho.shape[0] != d):
        raise InvalidDensityMatrix(f"density matrix has wrong shape {rho.shape}")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > atol:
        raise InvalidDensityMatrix(f"density matrix is not hermitian (deviation {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > atol:
        raise InvalidDensityMatrix(f"density matrix trace is {tr.real:.12g}, expected 1")
    lo = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    if lo < -1e-10:
        log.warning("density matrix has a negative eigenvalue %.3e", lo)
    return rho


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    t_max: float = 1e6
    max_steps: int = 500_000
    rank_tol: float = 1e-10
    allow_degenerate: bool = True
    # step cap h <= stability_factor / ||L||; DP5 has |P(iy)| > 1 for y > ~1, which
    # would amplify weakly damped oscillations
    stability_factor: float = 0.9


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    rho_ss: np.ndarray
    residual_norm: float
    elapsed_model_time: float
    steps: int
    method: str
    kernel_dim: int = 1
    degenerate: bool = False
    warnings: tuple[str, ...] = ()

    def expectation(self, O: np.ndarray) -> float:
        return float(np.real(np.trace(O @ self.rho_ss)))


def kernel_dimension(M: np.ndarray, rank_tol: float = 1e-10) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.count_nonzero(s <= rank_tol * s[0])) if s[0] > 0 else M.shape[0]


def _hermitize(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _spectral_projectors(M: np.ndarray, rank_tol: float):
    """Projectors onto the kernel and onto all non-decaying modes of ``M``."""
    lam, V = np.linalg.eig(M)
    W = np.linalg.inv(V)
    scale = max(float(np.max(np.abs(lam))), 1e-300)
    undamped = lam.real >= -rank_tol * scale
    zero = np.abs(lam) <= rank_tol * scale
    P0 = V[:, zero] @ W[zero]
    Pi = V[:, undamped] @ W[undamped]
    return P0, Pi, int(zero.sum()), int(undamped.sum())


def integrate_to_steady(L: Liouvillian, rho0, tol_ss: float = 1e-10,
                        opts: IntegratorOptions = IntegratorOptions()) -> SteadyStateResult:
    """Run ``d vec(rho)/dt = L vec(rho)`` until ``||d rho/dt||_F <= tol_ss``.

    Dormand-Prince 5(4) with step control; the state is re-Hermitised and
    re-normalised after every accepted step.

    If the generator has more than one stationary state, or modes that never
    decay, the trajectory has no limit point. With ``opts.allow_degenerate``
    the run then stops once every decaying mode is below ``tol_ss`` and
    returns the projection onto the kernel (the long-time average of the
    trajectory), flagged ``degenerate``. Otherwise the run continues to
    ``opts.t_max`` and raises :class:`NonConvergenceError`.
    """
    instrument.count("steady_solves")
    d = L.dim
    rho0 = validate_density_matrix(rho0, d)
    M = L.site_matrix

    def func(y):
        return M @ y

    transpose = vec(np.arange(d * d).reshape(d, d, order="F").T)
    diag = np.arange(d) * (d + 1)

    def project(y):
        y = 0.5 * (y + y[transpose].conj())
        return y / y[diag].sum().real

    m_norm = max(np.linalg.norm(M, 2), 1e-300)
    h0 = 1e-2 / m_norm
    P0, Pi, kdim, n_undamped = _spectral_projectors(M, opts.rank_tol)
    degenerate = kdim > 1 or n_undamped > kdim
    metric = None
    if degenerate and opts.allow_degenerate:
        Q = np.eye(d * d) - Pi

        def metric(y, _dy):
            return float(np.linalg.norm(M @ (Q @ y)))

    run = dopri5_to_stationary(func, vec(rho0), tol_ss, rtol=opts.rtol, atol=opts.atol, h0=h0,
                               h_max=opts.stability_factor / m_norm, t_max=opts.t_max,
                               max_steps=opts.max_steps, project=project, metric=metric)
    if not run.converged:
        raise NonConvergenceError(
            f"no steady state within t = {run.t:.6g} ({run.steps} steps); "
            f"final residual {run.residual:.3e} > {tol_ss:.1e}", run.residual)
    warnings: tuple[str, ...] = ()
    if degenerate:
        rho = _hermitize(unvec(P0 @ run.y, d))
        residual = float(np.linalg.norm(M @ vec(rho)))
        msg = (f"degenerate generator: {kdim}-dimensional zero eigenspace, "
               f"{n_undamped - kdim} undamped oscillating mode(s); "
               "the fixed point depends on the initial state")
        log.info(msg)
        warnings = (msg,)
    else:
        rho = unvec(run.y, d)
        residual = run.residual
    return SteadyStateResult(rho, residual, run.t, run.steps, "time-integration",
                             kernel_dim=kdim, degenerate=degenerate, warnings=warnings)


def null_space_steady(L: Liouvillian, trace_target: float = 1.0,
                      rank_tol: float = 1e-10) -> SteadyStateResult:
    """Solve ``L vec(rho) = 0`` with ``Tr rho = trace_target`` by min-norm least squares."""
    instrument.count("steady_solves")
    d = L.dim
    M = L.site_matrix
    kdim = kernel_dimension(M, rank_tol)
    if kdim > 1:
        raise DegenerateSteadyStateError(
            f"steady state is not unique: zero eigenspace has dimension {kdim}", kdim)
    tr = vec(np.eye(d))
    A = np.vstack([M, tr[None, :]])
    b = np.zeros(d * d + 1, dtype=complex)
    b[-1] = trace_target
    sol = solve_min_norm(A, b, rank_tol)
    rho = unvec(sol.x, d)
    rho = 0.5 * (rho + rho.conj().T)
    residual = float(np.linalg.norm(M @ vec(rho)))
    return SteadyStateResult(rho, residual, 0.0, 0, "null-space", kernel_dim=kdim)


def steady_state(L: Liouvillian, rho0=None, method: str = "time-integration", tol_ss: float = 1e-10,
                 opts: IntegratorOptions = IntegratorOptions()) -> SteadyStateResult:
    if method == "time-integration":
        return integrate_to_steady(L, DEFAULT_RHO0 if rho0 is None else rho0, tol_ss, opts)
    if method == "null-space":
        return null_space_steady(L, rank_tol=opts.rank_tol)
    raise InvalidInputError(f"unknown steady-state method {method!r}")


def gibbs_state(p: ModelParams) -> np.ndarray:
    """Thermal state ``exp(-beta H_S) / Z`` of the bare system at the bath temperature."""
    es = eig_hermitian(build_hamiltonian(p))
    x = -p.bath.beta * (es.eigenvalues - es.eigenvalues.min())
    w = np.exp(x)
    U = es.eigenvectors
    return (U * (w / w.sum())) @ U.conj().T
