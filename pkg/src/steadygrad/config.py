"""Run configuration: a flat ``key = value`` text file.

::

    # spin-boson defaults
    epsilon = 0.1
    delta = 0.1
    rho0 = 0.75, -0.4330127018922193i, 0.4330127018922193i, 0.25
    observable = sigma_z
    free = beta, eta, delta

Complex numbers are written ``a+bi``. ``observable`` is ``sigma_x``,
``sigma_y``, ``sigma_z`` or four row-major complex entries.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .bath import BathParams, HalfFourierOptions
from .numerics import InvalidInputError
from .redfield import PARAM_NAMES, SIGMA_X, SIGMA_Y, SIGMA_Z, ModelParams
from .steady import DEFAULT_RHO0, IntegratorOptions, validate_density_matrix

__all__ = ["ConfigError", "RunConfig", "parse_complex", "parse_config", "load_config"]

NAMED_OBSERVABLES = {"sigma_x": SIGMA_X, "sigma_y": SIGMA_Y, "sigma_z": SIGMA_Z}
GRAD_METHODS = ("direct", "adjoint-ode")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


@dataclass
class RunConfig:
    epsilon: float = 0.1
    delta: float = 0.0
    beta: float = 0.1
    eta: float = 0.01
    omega_c: float = 1.0
    s_exponent: float = 3.0
    rho0: np.ndarray = field(default_factory=lambda: DEFAULT_RHO0.copy())
    observable: str = "sigma_z"
    observable_matrix: np.ndarray = field(default_factory=lambda: SIGMA_Z.copy())
    # tighter than the library default: the implicit gradient error scales
    # like ||f(rho_ss)|| / gap**2
    tol_ss: float = 1e-12
    rank_tol: float = 1e-10
    fd_step: float | None = None
    include_imag: bool = False
    grad_method: str = "direct"
    free: tuple[str, ...] = ()

    def model_params(self) -> ModelParams:
        bath = BathParams(eta=self.eta, s_exponent=self.s_exponent, omega_c=self.omega_c, beta=self.beta)
        return ModelParams(self.epsilon, self.delta, bath, frozenset(self.free))

    def half_fourier_options(self) -> HalfFourierOptions:
        return HalfFourierOptions(include_imag=self.include_imag)

    def integrator_options(self) -> IntegratorOptions:
        return IntegratorOptions(rank_tol=self.rank_tol)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


def parse_complex(text: str) -> complex:
    """``"0.5"``, ``"-0.25i"``, ``"0.75-0.43i"`` -> complex."""
    s = text.strip().replace(" ", "").replace("I", "i")
    if not s:
        raise ValueError("empty number")
    if s.endswith("i"):
        body = s[:-1]
        if body in ("", "+", "-"):
            s = body + "1i"
        s = s[:-1] + "j"
    if "j" in s[:-1]:
        raise ValueError(f"malformed complex number {text!r}")
    return complex(s)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_matrix(text: str) -> np.ndarray:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if len(parts) != 4:
        raise ValueError(f"expected 4 row-major entries, got {len(parts)}")
    return np.array([parse_complex(p) for p in parts], dtype=complex).reshape(2, 2)


_FLOATS = {"epsilon", "delta", "beta", "eta", "omega_c", "s_exponent", "tol_ss", "rank_tol", "fd_step"}


def parse_config(text: str, source: str | None = None) -> RunConfig:
    """Parse configuration text; unknown keys and bad values raise
    :class:`ConfigError` naming the line."""
    values: dict = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, _, val = (s.strip() for s in line.partition("="))
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno, source)
        lines[key] = lineno
        try:
            if key in _FLOATS:
                values[key] = float(val)
            elif key == "include_imag":
                values[key] = _parse_bool(val)
            elif key == "rho0":
                values[key] = _parse_matrix(val)
            elif key == "observable":
                if val in NAMED_OBSERVABLES:
                    values["observable"] = val
                    values["observable_matrix"] = NAMED_OBSERVABLES[val].copy()
                else:
                    values["observable"] = "custom"
                    values["observable_matrix"] = _parse_matrix(val)
            elif key == "grad_method":
                if val not in GRAD_METHODS:
                    raise ValueError(f"grad_method must be one of {GRAD_METHODS}")
                values[key] = val
            elif key == "free":
                names = tuple(n.strip() for n in val.split(",") if n.strip())
                unknown = [n for n in names if n not in PARAM_NAMES]
                if unknown:
                    raise ValueError(f"unknown parameter(s) {unknown}; known: {list(PARAM_NAMES)}")
                values[key] = names
            else:
                raise ValueError(f"unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, source) from None
    cfg = RunConfig(**values)
    return validate_config(cfg, lines, source)


def validate_config(cfg: RunConfig, lines: dict | None = None, source: str | None = None) -> RunConfig:
    lines = lines or {}
    try:
        cfg.model_params()
    except InvalidInputError as exc:
        raise ConfigError(str(exc), None, source) from None
    try:
        cfg.rho0 = validate_density_matrix(cfg.rho0, 2)
    except InvalidInputError as exc:
        raise ConfigError(f"rho0: {exc}", lines.get("rho0"), source) from None
    O = cfg.observable_matrix
    if np.max(np.abs(O - O.conj().T)) > 1e-12:
        raise ConfigError("observable is not hermitian", lines.get("observable"), source)
    for key in ("tol_ss", "rank_tol"):
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{key} must be > 0", lines.get(key), source)
    if cfg.fd_step is not None and not cfg.fd_step > 0:
        raise ConfigError("fd_step must be > 0", lines.get("fd_step"), source)
    return cfg


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
    return parse_config(text, source=path)
