"""Dense numerical kernels: Hermitian eigensolver, min-norm solves, quadrature, and
an embedded Runge-Kutta integrator that runs a linear flow to stationarity.

Matrices are plain ``numpy.ndarray`` objects (complex128 where it matters).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "InvalidInputError",
    "QuadratureError",
    "EigenSystem",
    "MinNormSolution",
    "StationaryRun",
    "check_hermitian",
    "eig_hermitian",
    "solve_min_norm",
    "quad_adaptive",
    "dopri5_to_stationary",
]


class InvalidInputError(ValueError):
    """Input failed a structural check (shape, Hermiticity, domain)."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature exhausted its panel budget.

    ``worst_panel`` is the ``(a, b, error_estimate)`` of the panel with the
    largest remaining error.
    """

    def __init__(self, message: str, worst_panel: tuple[float, float, float]):
        super().__init__(message)
        self.worst_panel = worst_panel


# ---------------------------------------------------------------------------
# Hermitian eigendecomposition (cyclic Jacobi)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs of a Hermitian matrix.

    ``eigenvalues`` are ascending; column ``k`` of ``eigenvectors`` is the
    eigenvector for ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def bohr_frequencies(self) -> np.ndarray:
        """Table ``w[mu, nu] = e_mu - e_nu``."""
        e = self.eigenvalues
        return e[:, None] - e[None, :]


def check_hermitian(H: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise InvalidInputError(f"matrix must be square, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H), initial=0.0)))
    dev = float(np.max(np.abs(H - H.conj().T), initial=0.0))
    if dev > atol * scale:
        raise InvalidInputError(f"matrix is not Hermitian (max |H - H^dagger| = {dev:.3e})")
    return H


def _fix_phases(V: np.ndarray) -> np.ndarray:
    # Largest-magnitude component made real-positive; ties go to the lowest index.
    V = V.copy()
    for k in range(V.shape[1]):
        col = V[:, k]
        mags = np.abs(col)
        j = int(np.flatnonzero(mags >= mags.max() * (1.0 - 1e-10))[0])
        V[:, k] = col * (np.conj(col[j]) / mags[j])
    return V


def eig_hermitian(H: np.ndarray, atol: float = 1e-12, max_sweeps: int = 60) -> EigenSystem:
    """Diagonalise a Hermitian matrix with cyclic complex Jacobi rotations.

    Parameters
    ----------
    H : (d, d) array_like
        Hermitian matrix (checked to ``atol`` relative to ``max(1, max|H|)``).
    atol : float
        Hermiticity tolerance.
    max_sweeps : int
        Upper bound on full cyclic sweeps.

    Returns
    -------
    EigenSystem
        Ascending eigenvalues and unitary eigenvectors with a deterministic
        phase (largest component real and positive).
    """
    A = check_hermitian(H, atol).copy()
    A = 0.5 * (A + A.conj().T)
    d = A.shape[0]
    V = np.eye(d, dtype=complex)
    norm = np.linalg.norm(A)
    if d > 1 and norm > 0.0:
        for _ in range(max_sweeps):
            off = np.linalg.norm(A - np.diag(np.diag(A)))
            if off <= 1e-15 * norm:
                break
            for p in range(d - 1):
                for q in range(p + 1, d):
                    z = A[p, q]
                    r = abs(z)
                    if r <= 1e-300:
                        continue
                    phase = z / r
                    tau = (A[q, q].real - A[p, p].real) / (2.0 * r)
                    if tau >= 0.0:
                        t = 1.0 / (tau + np.hypot(1.0, tau))
                    else:
                        t = -1.0 / (-tau + np.hypot(1.0, tau))
                    c = 1.0 / np.hypot(1.0, t)
                    s = t * c
                    # G acts on the (p, q) plane: columns p, q of the identity replaced by
                    # [c, -s*conj(phase)] and [s*phase, c] respectively.
                    gp = np.array([c, -s * np.conj(phase)])
                    gq = np.array([s * phase, c])
                    cols = A[:, [p, q]]
                    A[:, p] = cols @ gp
                    A[:, q] = cols @ gq
                    rows = A[[p, q], :]
                    A[p, :] = gp.conj() @ rows
                    A[q, :] = gq.conj() @ rows
                    A[p, q] = A[q, p] = 0.0
                    vcols = V[:, [p, q]]
                    V[:, p] = vcols @ gp
                    V[:, q] = vcols @ gq
        else:
            raise RuntimeError("Jacobi iteration did not converge")
    w = np.real(np.diag(A))
    order = np.argsort(w, kind="stable")
    return EigenSystem(eigenvalues=w[order], eigenvectors=_fix_phases(V[:, order]))


# ---------------------------------------------------------------------------
# Minimum-norm least squares
# ---------------------------------------------------------------------------


class MinNormSolution(NamedTuple):
    x: np.ndarray
    residual: float
    rank: int
    singular_values: np.ndarray


def solve_min_norm(A: np.ndarray, b: np.ndarray, rank_tol: float = 1e-10) -> MinNormSolution:
    """Minimum-norm least-squares solution of ``A x = b`` through the SVD.

    Singular values below ``rank_tol * s_max`` are treated as zero, so the
    corresponding directions are dropped from ``x``.
    """
    if rank_tol <= 0:
        raise InvalidInputError("rank_tol must be positive")
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or b.shape[0] != A.shape[0]:
        raise InvalidInputError(f"shape mismatch: A {A.shape}, b {b.shape}")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    cut = rank_tol * (s[0] if s.size else 0.0)
    keep = s > cut
    rank = int(np.count_nonzero(keep))
    coef = (U[:, keep].conj().T @ b) / s[keep]
    x = Vh[keep].conj().T @ coef
    residual = float(np.linalg.norm(A @ x - b))
    return MinNormSolution(x, residual, rank, s)


# ---------------------------------------------------------------------------
# Adaptive Gauss-Kronrod quadrature
# ---------------------------------------------------------------------------

_XK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
# 15 abscissae on [-1, 1] and the matching Kronrod / Gauss weights
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, a: float, b: float):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    fx = np.asarray(f(mid + half * _NODES))
    k = half * (_KRONROD @ fx)
    g = half * (_GAUSS @ fx)
    return k, float(abs(k - g))


def quad_adaptive(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    abs_tol: float = 1e-12,
    max_panels: int = 4000,
    initial_panels: int = 1,
) -> tuple[complex, float]:
    """Globally adaptive 7/15-point Gauss-Kronrod quadrature.

    ``f`` must be vectorised: it receives an array of abscissae and returns
    real or complex values of the same shape. The panel with the largest
    error estimate is bisected until the summed estimate falls below
    ``abs_tol``.

    Returns ``(value, error_estimate)``.
    """
    if not a < b:
        raise InvalidInputError(f"need a < b, got [{a}, {b}]")
    if abs_tol <= 0:
        raise InvalidInputError("abs_tol must be positive")
    edges = np.linspace(a, b, initial_panels + 1)
    heap = []
    total = 0.0
    err = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = _gk15(f, lo, hi)
        heap.append((-e, lo, hi, v))
        total += v
        err += e
    heapq.heapify(heap)
    n = len(heap)
    while err > abs_tol:
        if n >= max_panels:
            e, lo, hi, _ = heap[0]
            raise QuadratureError(
                f"quadrature on [{a}, {b}] did not reach {abs_tol:.1e} "
                f"(estimate {err:.2e}) within {max_panels} panels",
                (lo, hi, -e),
            )
        e, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        v1, e1 = _gk15(f, lo, mid)
        v2, e2 = _gk15(f, mid, hi)
        heapq.heappush(heap, (-e1, lo, mid, v1))
        heapq.heappush(heap, (-e2, mid, hi, v2))
        total += v1 + v2 - v
        err += e1 + e2 + e
        n += 1
    # re-sum to shed accumulated cancellation in the running total
    total = sum(item[3] for item in heap)
    err = sum(-item[0] for item in heap)
    return total, err


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) run to a stationary point
# ---------------------------------------------------------------------------

_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class StationaryRun(NamedTuple):
    y: np.ndarray
    t: float
    steps: int
    residual: float
    converged: bool


def dopri5_to_stationary(
    func: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    tol: float,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    h0: float | None = None,
    h_max: float = np.inf,
    t_max: float = 1e6,
    max_steps: int = 2_000_000,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    metric: Callable[[np.ndarray, np.ndarray], float] | None = None,
) -> StationaryRun:
    """Integrate the autonomous ODE ``y' = func(y)`` until it stops moving.

    Stops as soon as ``metric(y, func(y)) <= tol`` (default metric: the 2-norm
    of ``func(y)``). ``h_max`` caps the step; for a linear flow ``y' = M y``
    keep ``h_max * ||M||`` inside the stability region, otherwise step-size
    control parks decaying modes at the tolerance level instead of damping
    them. ``project`` is applied to every accepted state to re-impose
    constraints the flow conserves only up to round-off; it must be a
    round-off-sized correction because the last stage derivative is reused
    (FSAL). Returns with ``converged=False`` once ``t_max`` or ``max_steps``
    is hit.
    """
    if metric is None:
        def metric(_y, dy):
            return float(np.linalg.norm(dy))

    y = np.array(y0, copy=True)
    if project is not None:
        y = project(y)
    k1 = func(y)
    res = metric(y, k1)
    if res <= tol:
        return StationaryRun(y, 0.0, 0, res, True)
    t = 0.0
    h = min(h0 if h0 is not None else 1e-2, h_max)
    steps = 0
    K = np.empty((7,) + y.shape, dtype=np.result_type(y, k1))
    while t < t_max and steps < max_steps:
        h = min(h, t_max - t)
        K[0] = k1
        for i in range(1, 7):
            K[i] = func(y + h * (_A[i, :i] @ K[:i]))
        # stage 7 is evaluated at the 5th-order solution (FSAL)
        y_new = y + h * (_A[6] @ K[:6])
        err_vec = h * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean(np.abs(err_vec / scale) ** 2)))
        if err <= 1.0:
            t += h
            steps += 1
            y = project(y_new) if project is not None else y_new
            k1 = K[6].copy()
            res = metric(y, k1)
            if res <= tol:
                return StationaryRun(y, t, steps, res, True)
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            factor = max(0.2, 0.9 * err ** -0.2)
        h = min(h * factor, h_max)
    return StationaryRun(y, t, steps, res, False)
