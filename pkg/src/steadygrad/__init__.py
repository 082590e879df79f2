"""Redfield spin-boson steady states and implicit gradients of steady-state observables."""

from .bath import BathParams, HalfFourierOptions, correlation, half_fourier, spectral_density
from .design import LossRecord, adam_step, optimize, softplus, softplus_inverse
from .redfield import SIGMA_X, SIGMA_Y, SIGMA_Z, Liouvillian, ModelParams, build_liouvillian
from .sensitivity import (
    GradientReport,
    finite_difference_gradient,
    implicit_gradient_adjoint_ode,
    implicit_gradient_direct,
    residual_param_tangent,
)
from .steady import (
    DEFAULT_RHO0,
    DegenerateSteadyStateError,
    IntegratorOptions,
    NonConvergenceError,
    SteadyStateResult,
    integrate_to_steady,
    null_space_steady,
    steady_state,
)

__all__ = [
    "BathParams",
    "HalfFourierOptions",
    "correlation",
    "half_fourier",
    "spectral_density",
    "LossRecord",
    "adam_step",
    "optimize",
    "softplus",
    "softplus_inverse",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "Liouvillian",
    "ModelParams",
    "build_liouvillian",
    "GradientReport",
    "finite_difference_gradient",
    "implicit_gradient_adjoint_ode",
    "implicit_gradient_direct",
    "residual_param_tangent",
    "DEFAULT_RHO0",
    "DegenerateSteadyStateError",
    "IntegratorOptions",
    "NonConvergenceError",
    "SteadyStateResult",
    "integrate_to_steady",
    "null_space_steady",
    "steady_state",
]

__version__ = "0.1.0"
