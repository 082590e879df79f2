"""Inverse design: fit Hamiltonian parameters to a target steady-state
expectation value with Adam on softplus-parameterised variables."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .bath import HalfFourierOptions
from .numerics import InvalidInputError
from .redfield import SIGMA_Z, ModelParams, build_liouvillian
from .sensitivity import implicit_gradient_direct
from .steady import DegenerateSteadyStateError, IntegratorOptions, steady_state

__all__ = [
    "AdamHyper",
    "OptimizerState",
    "LossRecord",
    "PoisonedStateError",
    "softplus",
    "softplus_inverse",
    "sigmoid",
    "loss",
    "loss_gradient_factor",
    "adam_init",
    "adam_step",
    "optimize",
]

log = logging.getLogger(__name__)

DESIGN_PARAMS = ("epsilon", "delta")
INIT_RANGE = (0.01, 0.5)


def softplus(x: float) -> float:
    """``log(1 + exp(x))``; exact to double precision for any finite ``x``."""
    if x > 35.0:
        return float(x)
    return math.log1p(math.exp(x))


def softplus_inverse(y: float) -> float:
    """``log(exp(y) - 1)`` for ``y > 0``."""
    if not y > 0.0:
        raise InvalidInputError(f"softplus_inverse needs y > 0, got {y}")
    if y > 35.0:
        return y + math.log1p(-math.exp(-y))
    return math.log(math.expm1(y))


def sigmoid(x: float) -> float:
    """Derivative of :func:`softplus`."""
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def loss(observable: float, target: float) -> float:
    return abs(observable - target)


def loss_gradient_factor(observable: float, target: float) -> float:
    """``dL/d<O>``: the sign of the mismatch, 0 at equality."""
    return float(np.sign(observable - target))


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8


@dataclass(frozen=True)
class OptimizerState:
    step: int
    raw_params: np.ndarray
    m: np.ndarray
    v_hat: np.ndarray
    hyper: AdamHyper = AdamHyper()

    def __post_init__(self):
        n = len(self.raw_params)
        if len(self.m) != n or len(self.v_hat) != n:
            raise InvalidInputError("moment estimates must match the parameter count")
        if np.any(np.asarray(self.v_hat) < 0):
            raise InvalidInputError("second-moment estimates must be >= 0")


@dataclass(frozen=True)
class LossRecord:
    iteration: int
    params_physical: dict
    observable: float
    loss: float
    best_loss: float
    degenerate: bool = False


class PoisonedStateError(RuntimeError):
    """Non-finite gradient; carries the records emitted so far."""

    def __init__(self, message: str, records: list[LossRecord]):
        super().__init__(message)
        self.records = records

    @property
    def last_record(self) -> LossRecord | None:
        return self.records[-1] if self.records else None


def adam_init(raw_params, hyper: AdamHyper = AdamHyper()) -> OptimizerState:
    raw = np.array(raw_params, dtype=float)
    return OptimizerState(0, raw, np.zeros_like(raw), np.zeros_like(raw), hyper)


def adam_step(state: OptimizerState, grads) -> OptimizerState:
    """One bias-corrected Adam update of the raw parameters."""
    g = np.asarray(grads, dtype=float)
    if g.shape != state.raw_params.shape:
        raise InvalidInputError(f"expected {state.raw_params.shape[0]} gradients, got {g.shape}")
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient")
    hp = state.hyper
    t = state.step + 1
    m = hp.beta1 * state.m + (1 - hp.beta1) * g
    v = hp.beta2 * state.v_hat + (1 - hp.beta2) * g * g
    m_hat = m / (1 - hp.beta1**t)
    v_hat = v / (1 - hp.beta2**t)
    raw = state.raw_params - hp.lr * m_hat / (np.sqrt(v_hat) + hp.eps_hat)
    return replace(state, step=t, raw_params=raw, m=m, v_hat=v)


def _forward(p: ModelParams, O, method: str, opts: HalfFourierOptions, integ: IntegratorOptions,
             tol_ss: float):
    L = build_liouvillian(p, opts)
    try:
        res = steady_state(L, None, method, tol_ss, integ)
    except DegenerateSteadyStateError:
        res = steady_state(L, None, "time-integration", tol_ss, integ)
    return L, res


def optimize(p0: ModelParams, target: float, O=SIGMA_Z, free=DESIGN_PARAMS, iters: int = 100,
             seed: int | None = 0, *, lr: float = 0.1, random_init: bool = True,
             steady_method: str = "null-space", tol_ss: float = 1e-12,
             opts: HalfFourierOptions = HalfFourierOptions(),
             integ: IntegratorOptions = IntegratorOptions()) -> list[LossRecord]:
    """Minimise ``|<O> - target|`` over ``free`` (a subset of epsilon, delta).

    Physical values are ``softplus(raw)``, so they stay strictly positive.
    With ``random_init`` the raw values are drawn uniformly between
    ``softplus_inverse(0.01)`` and ``softplus_inverse(0.5)``; otherwise the
    run starts from the values in ``p0``.

    Returns one record per iteration ``0..iters``; record ``k`` holds the
    parameters before the ``k``-th update.
    """
    free = list(free)
    bad = [n for n in free if n not in DESIGN_PARAMS]
    if bad or not free:
        raise InvalidInputError(f"free parameters must be a non-empty subset of {DESIGN_PARAMS}, got {free}")
    O = np.asarray(O, dtype=complex)
    if random_init:
        rng = np.random.default_rng(seed)
        lo, hi = (softplus_inverse(v) for v in INIT_RANGE)
        raw0 = rng.uniform(lo, hi, size=len(free))
    else:
        raw0 = np.array([softplus_inverse(p0.get(n)) for n in free])
    state = adam_init(raw0, AdamHyper(lr=lr))
    records: list[LossRecord] = []
    best = math.inf
    for it in range(iters + 1):
        p = p0
        for name, r in zip(free, state.raw_params):
            p = p.with_value(name, softplus(r))
        p = p.with_free(free)
        L, res = _forward(p, O, steady_method, opts, integ, tol_ss)
        obs = res.expectation(O)
        ell = loss(obs, target)
        best = min(best, ell)
        records.append(LossRecord(it, {n: p.get(n) for n in free}, obs, ell, best, res.degenerate))
        if it == iters:
            break
        rep = implicit_gradient_direct(p, res.rho_ss, O, free, L=L, opts=opts, rank_tol=integ.rank_tol,
                                       allow_degenerate=res.degenerate)
        factor = loss_gradient_factor(obs, target)
        grads = [factor * rep[n] * sigmoid(r) for n, r in zip(free, state.raw_params)]
        try:
            state = adam_step(state, grads)
        except FloatingPointError as exc:
            raise PoisonedStateError(f"iteration {it}: {exc}", records) from exc
    return records
