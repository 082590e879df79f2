"""Gradients of steady-state expectation values by implicit differentiation.

With ``f(rho, theta) = L(theta) vec(rho)`` and ``f(rho_ss, theta) = 0``::

    d<O>/d theta_i = -w . df/d theta_i,    w J = v,    J = df/d rho

where ``v`` is the gradient of ``<O> = Tr[O rho]`` with respect to ``rho``.
All of this is done on the real embedding ``x = [Re vec(rho), Im vec(rho)]``.

``J`` is singular: trace preservation gives it a zero mode, the steady state
itself. Since every ``df/d theta_i`` is traceless, ``v`` may be shifted by any
multiple of the trace functional without changing the result; shifting
``O -> O - <O> I`` makes ``v`` orthogonal to the zero mode, so ``w J = v`` is
consistent and its minimum-norm solution gives the right gradient. The same
shift keeps the adjoint ODE ``dy/dt = y J - v`` from drifting along the zero
mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import instrument
from .bath import HalfFourierOptions
from .numerics import dopri5_to_stationary, solve_min_norm
from .redfield import Liouvillian, ModelParams, build_liouvillian, unvec, vec
from .steady import (
    DegenerateSteadyStateError,
    IntegratorOptions,
    SteadyStateError,
    steady_state,
)

__all__ = [
    "GradientEntry",
    "GradientReport",
    "AdjointNonConvergenceError",
    "RedfieldResidual",
    "observable_gradient",
    "residual_param_tangent",
    "implicit_gradient_direct",
    "implicit_gradient_adjoint_ode",
    "finite_difference_gradient",
]

# lower bounds of the parameter domains; (bound, inclusive)
_DOMAIN = {"beta": (0.0, False), "omega_c": (0.0, False), "s_exponent": (0.0, False), "eta": (0.0, True)}


class AdjointNonConvergenceError(SteadyStateError):
    def __init__(self, message: str, mode_eigenvalue: complex | None, residual: float):
        super().__init__(message)
        self.mode_eigenvalue = mode_eigenvalue
        self.residual = residual


@dataclass
class GradientEntry:
    name: str
    value: float
    method: str
    diagnostics: dict = field(default_factory=dict)


@dataclass
class GradientReport:
    observable_value: float
    entries: list[GradientEntry]
    method: str
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        for e in self.entries:
            if e.name == name:
                return e.value
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def as_dict(self) -> dict[str, float]:
        return {e.name: e.value for e in self.entries}


# ---------------------------------------------------------------------------
# real embedding
# ---------------------------------------------------------------------------


def _to_real(z: np.ndarray) -> np.ndarray:
    return np.concatenate([z.real, z.imag])


def _real_jacobian(M: np.ndarray) -> np.ndarray:
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def observable_gradient(O: np.ndarray) -> np.ndarray:
    """Real gradient of ``Re Tr[O rho]`` with respect to the embedded ``rho``."""
    o = vec(np.asarray(O).T)
    return np.concatenate([o.real, -o.imag])


class RedfieldResidual:
    """Residual ``f(rho) = L vec(rho)`` in the site basis, on the real embedding.

    ``J = df/drho`` is ``L`` itself because the generator is linear; the
    class is the seam where a nonlinear residual would plug in.
    """

    def __init__(self, L: Liouvillian):
        self.L = L
        self._M = L.site_matrix

    def __call__(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[0] // 2
        return _to_real(self._M @ (x[:n] + 1j * x[n:]))

    def jacobian(self) -> np.ndarray:
        return _real_jacobian(self._M)

    def vjp(self, y: np.ndarray) -> np.ndarray:
        """Row-vector product ``y J`` without forming ``J``."""
        n = y.shape[0] // 2
        zM = (y[:n] - 1j * y[n:]) @ self._M
        return np.concatenate([zM.real, -zM.imag])

    def norm_estimate(self) -> float:
        return float(np.linalg.norm(self._M, 2))


# ---------------------------------------------------------------------------
# df/dtheta
# ---------------------------------------------------------------------------


def _default_step(value: float) -> float:
    return 1e-6 * max(1.0, abs(value))


def _below_domain(name: str, value: float) -> bool:
    if name not in _DOMAIN:
        return False
    bound, inclusive = _DOMAIN[name]
    return value < bound if inclusive else value <= bound


def _site_residual(L: Liouvillian, rho: np.ndarray) -> np.ndarray:
    return unvec(L.site_matrix @ vec(rho), L.dim)


def _tangent(p: ModelParams, rho_ss: np.ndarray, param: str, h: float | None,
             opts: HalfFourierOptions, L0: Liouvillian | None):
    theta = p.get(param)
    if h is None:
        h = _default_step(theta)
    if h <= 0:
        raise ValueError("step must be positive")
    if not _below_domain(param, theta - h):
        fp = _site_residual(build_liouvillian(p.with_value(param, theta + h), opts), rho_ss)
        fm = _site_residual(build_liouvillian(p.with_value(param, theta - h), opts), rho_ss)
        return (fp - fm) / (2.0 * h), {"fd_step": h, "scheme": "central"}
    # second-order forward difference at the edge of the domain
    if L0 is None:
        L0 = build_liouvillian(p, opts)
    f0 = _site_residual(L0, rho_ss)
    f1 = _site_residual(build_liouvillian(p.with_value(param, theta + h), opts), rho_ss)
    f2 = _site_residual(build_liouvillian(p.with_value(param, theta + 2 * h), opts), rho_ss)
    return (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h), {"fd_step": h, "scheme": "one-sided"}


def residual_param_tangent(p: ModelParams, rho_ss: np.ndarray, param: str, h: float | None = None,
                           opts: HalfFourierOptions = HalfFourierOptions(),
                           L0: Liouvillian | None = None) -> np.ndarray:
    """``df/d theta_param`` at fixed ``rho_ss`` (site basis) by central differences.

    Only the residual is differenced: two Liouvillian builds, no steady-state
    solve. Where ``theta - h`` leaves the parameter domain a one-sided
    second-order difference is used instead.
    """
    return _tangent(p, np.asarray(rho_ss), param, h, opts, L0)[0]


# ---------------------------------------------------------------------------
# implicit gradients
# ---------------------------------------------------------------------------


def _prepare(p, rho_ss, O, free, L, opts):
    rho_ss = np.asarray(rho_ss, dtype=complex)
    O = np.asarray(O, dtype=complex)
    free = p.free_names() if free is None else list(free)
    if L is None:
        L = build_liouvillian(p, opts)
    value = float(np.real(np.trace(O @ rho_ss)))
    d = L.dim
    # O -> O - <O> I: removes the component of v along the steady state
    v = observable_gradient(O - value * np.eye(d))
    return rho_ss, free, L, value, v


def _assemble(p, rho_ss, free, w, opts, L, method, value, diagnostics):
    entries = []
    for name in free:
        t, info = _tangent(p, rho_ss, name, None, opts, L)
        g = -float(w @ _to_real(vec(t)))
        entries.append(GradientEntry(name, g, method, {**diagnostics, **info}))
    return GradientReport(value, entries, method, diagnostics)


def implicit_gradient_direct(p: ModelParams, rho_ss, O, free=None, *, L: Liouvillian | None = None,
                             opts: HalfFourierOptions = HalfFourierOptions(), rank_tol: float = 1e-10,
                             allow_degenerate: bool = False) -> GradientReport:
    """Gradient of ``Tr[O rho_ss]`` for every free parameter with one linear solve.

    ``w J = v`` is solved once by minimum-norm least squares (SVD) with the
    zero mode deflated; each parameter then costs one inner product with a
    residual tangent. A zero eigenspace of dimension > 1 violates the
    premise of the implicit function theorem and raises
    :class:`DegenerateSteadyStateError` unless ``allow_degenerate``.
    """
    rho_ss, free, L, value, v = _prepare(p, rho_ss, O, free, L, opts)
    J = RedfieldResidual(L).jacobian()
    instrument.count("adjoint_solves")
    sol = solve_min_norm(J.T, v, rank_tol)
    kernel_dim = (J.shape[0] - sol.rank) // 2
    degenerate = kernel_dim > 1
    if degenerate and not allow_degenerate:
        raise DegenerateSteadyStateError(
            f"implicit gradient undefined: zero eigenspace of df/drho has dimension {kernel_dim}",
            kernel_dim)
    diagnostics = {"adjoint_residual": sol.residual, "kernel_dim": kernel_dim, "degenerate": degenerate}
    return _assemble(p, rho_ss, free, sol.x, opts, L, "implicit-direct", value, diagnostics)


def _offending_mode(res: RedfieldResidual, v: np.ndarray, rank_tol: float):
    n = v.shape[0]
    # diagnostics only: materialise J column by column through the product form
    J = np.array([res.vjp(e) for e in np.eye(n)])
    lam, R = np.linalg.eig(J)
    Wl = np.linalg.inv(R)
    scale = max(float(np.max(np.abs(lam))), 1e-300)
    coeff = v @ R  # components of v (row vector) on the left eigenbasis of J
    worst = None
    for k in np.argsort(-lam.real):
        if lam[k].real >= -rank_tol * scale and abs(coeff[k]) * np.linalg.norm(Wl[k]) > 1e-8 * np.linalg.norm(v):
            worst = complex(lam[k])
            break
    return worst


def implicit_gradient_adjoint_ode(p: ModelParams, rho_ss, O, free=None, tol_ss: float | None = None, *,
                                  L: Liouvillian | None = None,
                                  opts: HalfFourierOptions = HalfFourierOptions(),
                                  integ: IntegratorOptions = IntegratorOptions()) -> GradientReport:
    """As :func:`implicit_gradient_direct`, but ``w = v J^-1`` is the stationary
    point of ``dy/dt = y J - v`` and only vector-Jacobian products are used.

    ``tol_ss`` bounds ``||y J - v||``; it defaults to ``1e-12 * ||v||``.
    """
    rho_ss, free, L, value, v = _prepare(p, rho_ss, O, free, L, opts)
    res = RedfieldResidual(L)
    vnorm = float(np.linalg.norm(v))
    tol = tol_ss if tol_ss is not None else 1e-12 * max(vnorm, 1e-300)
    instrument.count("adjoint_solves")
    if vnorm == 0.0:
        w = np.zeros_like(v)
        diagnostics = {"adjoint_residual": 0.0, "adjoint_time": 0.0, "adjoint_steps": 0, "degenerate": False}
        return _assemble(p, rho_ss, free, w, opts, L, "implicit-adjoint-ode", value, diagnostics)
    m_norm = max(res.norm_estimate(), 1e-300)
    # rho_ss is only approximately in the kernel, so v keeps a residual component
    # ~ ||f(rho_ss)|| along the zero mode and y drifts along the trace functional
    # at that rate. The drift is harmless (every df/dtheta is traceless) and is
    # left out of the stationarity test.
    r0 = _to_real(vec(rho_ss))
    trace_row = observable_gradient(np.eye(L.dim))

    def metric(_y, dy):
        return float(np.linalg.norm(dy - (dy @ r0) * trace_row))

    run = dopri5_to_stationary(lambda y: res.vjp(y) - v, np.zeros_like(v), tol,
                               rtol=integ.rtol, atol=integ.atol * vnorm, h0=1e-2 / m_norm,
                               h_max=integ.stability_factor / m_norm, t_max=integ.t_max,
                               max_steps=integ.max_steps, metric=metric)
    if not run.converged:
        mode = _offending_mode(res, v, integ.rank_tol)
        where = f"non-decaying left mode with eigenvalue {mode:.6g}" if mode is not None else "slow decay"
        raise AdjointNonConvergenceError(
            f"adjoint ODE did not reach stationarity by t = {run.t:.6g} "
            f"(residual {run.residual:.3e}); cause: {where}", mode, run.residual)
    diagnostics = {"adjoint_residual": run.residual, "adjoint_time": run.t, "adjoint_steps": run.steps,
                   "degenerate": False}
    return _assemble(p, rho_ss, free, run.y, opts, L, "implicit-adjoint-ode", value, diagnostics)


# ---------------------------------------------------------------------------
# end-to-end finite differences
# ---------------------------------------------------------------------------


def finite_difference_gradient(p: ModelParams, O, free=None, h: float | None = None, *,
                               method: str = "null-space", rho0=None, tol_ss: float = 1e-10,
                               opts: HalfFourierOptions = HalfFourierOptions(),
                               integ: IntegratorOptions = IntegratorOptions()) -> GradientReport:
    """Central differences of ``<O>`` with a fresh steady-state solve per
    perturbed parameter value (two solves per free parameter).

    ``h`` defaults to ``1e-4 * max(1, |theta|)`` per parameter; smaller steps
    amplify the ~1e-13 noise of the steady-state solve. The reported
    observable value is the mean of the ``+h`` / ``-h`` evaluations of the
    first parameter (second-order accurate); with no free parameters one
    solve at ``theta`` is made instead.

    ``method="auto"`` uses the null-space solve and falls back to time
    integration from ``rho0`` where the fixed point is not unique.
    """
    O = np.asarray(O, dtype=complex)
    free = p.free_names() if free is None else list(free)

    def expectation(q: ModelParams):
        L = build_liouvillian(q, opts)
        if method == "auto":
            try:
                r = steady_state(L, rho0, "null-space", tol_ss, integ)
            except DegenerateSteadyStateError:
                r = steady_state(L, rho0, "time-integration", tol_ss, integ)
        else:
            r = steady_state(L, rho0, method, tol_ss, integ)
        return float(np.real(np.trace(O @ r.rho_ss))), r.degenerate

    entries = []
    value = math.nan
    for name in free:
        theta = p.get(name)
        step = h if h is not None else 1e-4 * max(1.0, abs(theta))
        if _below_domain(name, theta - step):
            f0, d0 = expectation(p)
            f1, d1 = expectation(p.with_value(name, theta + step))
            g = (f1 - f0) / step
            mid, scheme, degen = f0, "forward", d0 or d1
        else:
            fp, d1 = expectation(p.with_value(name, theta + step))
            fm, d0 = expectation(p.with_value(name, theta - step))
            g = (fp - fm) / (2.0 * step)
            mid, scheme, degen = 0.5 * (fp + fm), "central", d0 or d1
        if math.isnan(value):
            value = mid
        entries.append(GradientEntry(name, g, "finite-difference",
                                     {"fd_step": step, "scheme": scheme, "degenerate": degen,
                                      "steady_method": method}))
    if not free:
        value, _ = expectation(p)
    return GradientReport(value, entries, "finite-difference", {"steady_method": method})
