"""Command-line interface: ``steadygrad {steady,sweep,grad,optimize}``.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 degenerate
steady state.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import contextlib
import csv
import io
import logging
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import instrument
from .config import ConfigError, RunConfig, load_config
from .design import DESIGN_PARAMS, LossRecord, optimize
from .numerics import InvalidInputError, QuadratureError
from .redfield import PARAM_NAMES, ModelParams, build_liouvillian
from .sensitivity import (
    AdjointNonConvergenceError,
    GradientReport,
    finite_difference_gradient,
    implicit_gradient_adjoint_ode,
    implicit_gradient_direct,
)
from .steady import (
    DegenerateSteadyStateError,
    SteadyStateError,
    SteadyStateResult,
    gibbs_state,
    steady_state,
)

__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_SOLVER",
    "EXIT_DEGENERATE",
    "SWEEP_HEADER",
    "OPTIMIZE_HEADER",
    "GradOutcome",
    "cmd_steady",
    "cmd_sweep",
    "cmd_grad",
    "cmd_optimize",
    "main",
]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_DEGENERATE = 0, 2, 3, 4
SWEEP_HEADER = ["param_name", "param_value", "expectation", "grad_implicit", "grad_fd"]
OPTIMIZE_HEADER = ["seed", "iteration", "epsilon", "delta", "expectation", "loss"]

log = logging.getLogger("steadygrad")


def fmt(x) -> str:
    """17 significant digits: round-trips any double."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x) + 0.0, ".17g")  # + 0.0 folds -0.0 into 0.0


def _workers(n_jobs: int) -> int:
    cap = os.environ.get("THREADS")
    limit = os.cpu_count() or 1
    if cap:
        try:
            limit = max(1, int(cap))
        except ValueError:
            raise ConfigError(f"THREADS must be an integer, got {cap!r}") from None
    return max(1, min(limit, n_jobs))


def _ordered_map(fn, items: list) -> list:
    """``map`` over independent jobs; results keep input order."""
    workers = _workers(len(items))
    if workers == 1:
        return [fn(x) for x in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _solve(cfg: RunConfig, p: ModelParams | None = None, method: str = "time-integration"):
    p = cfg.model_params() if p is None else p
    L = build_liouvillian(p, cfg.half_fourier_options())
    res = steady_state(L, cfg.rho0, method, cfg.tol_ss, cfg.integrator_options())
    return p, L, res


def _implicit(cfg: RunConfig, p: ModelParams, L, res: SteadyStateResult, free,
              allow_degenerate: bool = False) -> GradientReport:
    O = cfg.observable_matrix
    opts = cfg.half_fourier_options()
    if cfg.grad_method == "adjoint-ode" and not res.degenerate:
        return implicit_gradient_adjoint_ode(p, res.rho_ss, O, free, L=L, opts=opts,
                                             integ=cfg.integrator_options())
    return implicit_gradient_direct(p, res.rho_ss, O, free, L=L, opts=opts, rank_tol=cfg.rank_tol,
                                    allow_degenerate=allow_degenerate)


def _matrix_lines(rho: np.ndarray, indent: str = "  ") -> list[str]:
    out = []
    for row in rho:
        out.append(indent + "  ".join(f"{z.real:+.12f}{z.imag:+.12f}i" for z in row))
    return out


# ---------------------------------------------------------------------------
# steady
# ---------------------------------------------------------------------------


def cmd_steady(cfg: RunConfig, method: str = "both") -> tuple[list[str], dict]:
    """Steady state by time integration and/or the null-space solve.

    Returns the report lines and the results keyed by method. At a
    degenerate point the conserved-population value and the thermal value
    are both reported.
    """
    p = cfg.model_params()
    L = build_liouvillian(p, cfg.half_fourier_options())
    O = cfg.observable_matrix
    lines = [f"parameters: epsilon={p.epsilon:g} delta={p.delta:g} beta={p.bath.beta:g} "
             f"eta={p.bath.eta:g} omega_c={p.bath.omega_c:g} s={p.bath.s_exponent:g}"]
    results: dict = {}
    methods = ["time-integration", "null-space"] if method == "both" else [method]
    for m in methods:
        try:
            res = steady_state(L, cfg.rho0, m, cfg.tol_ss, cfg.integrator_options())
        except DegenerateSteadyStateError as exc:
            lines.append(f"[{m}] {exc}")
            results[m] = exc
            continue
        results[m] = res
        lines.append(f"[{m}] <{cfg.observable}> = {fmt(res.expectation(O))}")
        lines.append(f"[{m}] residual ||L rho|| = {res.residual_norm:.3e}, "
                     f"model time {res.elapsed_model_time:.6g}, steps {res.steps}")
        lines.append(f"[{m}] trace = {fmt(np.trace(res.rho_ss).real)}")
        lines.append(f"[{m}] rho_ss =")
        lines.extend(_matrix_lines(res.rho_ss))
        for w in res.warnings:
            lines.append(f"[{m}] warning: {w}")
        if res.degenerate:
            lines.append(f"[{m}] conserved-population value <{cfg.observable}> = {fmt(res.expectation(O))} "
                         "(fixed point depends on rho0)")
    ok = [r for r in results.values() if isinstance(r, SteadyStateResult)]
    if len(ok) == 2:
        diff = float(np.max(np.abs(ok[0].rho_ss - ok[1].rho_ss)))
        lines.append(f"methods agree to {diff:.3e} (max entrywise)")
    if any(r.degenerate for r in ok) or any(isinstance(r, DegenerateSteadyStateError) for r in results.values()):
        thermal = float(np.real(np.trace(O @ gibbs_state(p))))
        lines.append(f"thermal (Gibbs) value <{cfg.observable}> = {fmt(thermal)}")
    return lines, results


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_point(job) -> dict:
    cfg, name, value = job
    row = {"param_name": name, "param_value": value, "expectation": math.nan,
           "grad_implicit": math.nan, "grad_fd": math.nan, "error": "", "degenerate": False}
    try:
        p = cfg.model_params().with_value(name, value).with_free([name])
        p, L, res = _solve(cfg, p)
        row["expectation"] = res.expectation(cfg.observable_matrix)
        row["degenerate"] = res.degenerate
        rep = _implicit(cfg, p, L, res, [name], allow_degenerate=res.degenerate)
        row["grad_implicit"] = rep[name]
        fd = finite_difference_gradient(p, cfg.observable_matrix, [name], cfg.fd_step, method="auto",
                                        rho0=cfg.rho0, tol_ss=cfg.tol_ss,
                                        opts=cfg.half_fourier_options(), integ=cfg.integrator_options())
        row["grad_fd"] = fd[name]
    except (SteadyStateError, InvalidInputError, QuadratureError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(cfg: RunConfig, param: str, start: float, stop: float, steps: int) -> list[dict]:
    """One row per grid point; a failing point is recorded, not fatal."""
    if param not in PARAM_NAMES:
        raise ConfigError(f"unknown sweep parameter {param!r}; known: {list(PARAM_NAMES)}")
    if steps < 2:
        raise ConfigError("steps must be >= 2")
    grid = np.linspace(start, stop, steps)
    return _ordered_map(_sweep_point, [(cfg, param, float(v)) for v in grid])


def write_sweep_csv(rows: list[dict], fh) -> None:
    with_error = any(r["error"] for r in rows)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_HEADER + (["error"] if with_error else []))
    for r in rows:
        out = [r["param_name"]] + [fmt(r[k]) for k in SWEEP_HEADER[1:]]
        if with_error:
            out.append(r["error"])
        w.writerow(out)


# ---------------------------------------------------------------------------
# grad
# ---------------------------------------------------------------------------


@dataclass
class GradOutcome:
    report: GradientReport
    counters: dict
    steady: SteadyStateResult
    fd_report: GradientReport | None = None
    fd_counters: dict = field(default_factory=dict)


def cmd_grad(cfg: RunConfig, with_fd: bool = False) -> GradOutcome:
    """One steady solve and one adjoint solve for all free parameters.

    A degenerate fixed point raises :class:`DegenerateSteadyStateError`.
    """
    with instrument.counting() as c:
        p, L, res = _solve(cfg)
        if res.degenerate:
            raise DegenerateSteadyStateError(
                f"implicit gradient undefined at a degenerate fixed point "
                f"(zero eigenspace dimension {res.kernel_dim})", res.kernel_dim)
        rep = _implicit(cfg, p, L, res, p.free_names())
    out = GradOutcome(rep, dict(c), res)
    if with_fd:
        with instrument.counting() as c_fd:
            out.fd_report = finite_difference_gradient(
                p, cfg.observable_matrix, p.free_names(), cfg.fd_step, method="auto", rho0=cfg.rho0,
                tol_ss=cfg.tol_ss, opts=cfg.half_fourier_options(), integ=cfg.integrator_options())
        out.fd_counters = dict(c_fd)
    return out


def write_grad_csv(out: GradOutcome, fh) -> None:
    names = out.report.names()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["method", "expectation"] + [f"grad_{n}" for n in names])
    w.writerow([out.report.method, fmt(out.report.observable_value)] + [fmt(out.report[n]) for n in names])
    if out.fd_report is not None:
        w.writerow([out.fd_report.method, fmt(out.fd_report.observable_value)]
                   + [fmt(out.fd_report[n]) for n in names])


def grad_report_lines(out: GradOutcome, observable: str) -> list[str]:
    rep = out.report
    lines = [f"<{observable}> = {fmt(rep.observable_value)} ({rep.method})"]
    for e in rep.entries:
        lines.append(f"  d<{observable}>/d{e.name} = {fmt(e.value)}  "
                     f"[fd step {e.diagnostics.get('fd_step', math.nan):.1e}, {e.diagnostics.get('scheme', '')}]")
        if out.fd_report is not None:
            lines.append(f"      finite difference   = {fmt(out.fd_report[e.name])}")
    if not rep.entries:
        lines.append("  no free parameters")
    lines.append("adjoint residual = {:.3e}".format(rep.diagnostics.get("adjoint_residual", math.nan)))
    keys = ("steady_solves", "adjoint_solves", "liouvillian_builds")
    lines.append("counters: " + " ".join(f"{k}={out.counters.get(k, 0)}" for k in keys))
    if out.fd_report is not None:
        lines.append("finite-difference counters: "
                     + " ".join(f"{k}={out.fd_counters.get(k, 0)}" for k in keys[::2]))
    return lines


# ---------------------------------------------------------------------------
# optimize
# ---------------------------------------------------------------------------


def _optimize_seed(job):
    cfg, target, free, iters, lr, seed = job
    try:
        return seed, optimize(cfg.model_params(), target, cfg.observable_matrix, free, iters, seed, lr=lr,
                              tol_ss=cfg.tol_ss, opts=cfg.half_fourier_options(),
                              integ=cfg.integrator_options()), None
    except Exception as exc:  # isolate: one failing seed must not stop the others
        records = getattr(exc, "records", [])
        return seed, records, f"{type(exc).__name__}: {exc}"


def cmd_optimize(cfg: RunConfig, target: float, free=DESIGN_PARAMS, iters: int = 100, lr: float = 0.1,
                 seeds: int = 5, seed_base: int = 0) -> list[tuple[int, list[LossRecord], str | None]]:
    free = list(free)
    bad = [n for n in free if n not in DESIGN_PARAMS]
    if bad:
        raise ConfigError(f"optimize supports only {list(DESIGN_PARAMS)}, got {bad}")
    if iters < 0 or seeds < 1:
        raise ConfigError("iters must be >= 0 and seeds >= 1")
    jobs = [(cfg, target, free, iters, lr, seed_base + k) for k in range(seeds)]
    return _ordered_map(_optimize_seed, jobs)


def write_optimize_csv(runs, cfg: RunConfig, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(OPTIMIZE_HEADER)
    for seed, records, _err in runs:
        for r in records:
            eps = r.params_physical.get("epsilon", cfg.epsilon)
            dl = r.params_physical.get("delta", cfg.delta)
            w.writerow([fmt(seed), fmt(r.iteration), fmt(eps), fmt(dl), fmt(r.observable), fmt(r.loss)])


def optimize_summary_lines(runs, cfg: RunConfig) -> list[str]:
    lines = [f"{'seed':>4}  {'epsilon':>10}  {'delta':>10}  {'<O>':>12}  {'loss':>10}"]
    for seed, records, err in runs:
        if err is not None:
            lines.append(f"{seed:>4}  failed: {err}")
            continue
        r = records[-1]
        eps = r.params_physical.get("epsilon", cfg.epsilon)
        dl = r.params_physical.get("delta", cfg.delta)
        lines.append(f"{seed:>4}  {eps:>10.4f}  {dl:>10.4f}  {r.observable:>12.6f}  {r.loss:>10.1e}")
    return lines


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steadygrad", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("steady", parents=[common], help="steady state and <O>")
    s.add_argument("--method", choices=["both", "time-integration", "null-space"], default="both")

    s = sub.add_parser("sweep", parents=[common], help="<O> and gradients along one parameter")
    s.add_argument("--param", required=True, choices=PARAM_NAMES)
    s.add_argument("--from", dest="start", type=float, required=True)
    s.add_argument("--to", dest="stop", type=float, required=True)
    s.add_argument("--steps", type=int, default=20)
    s.add_argument("--figure", metavar="PATH", help="also render a figure (png/pdf/svg)")

    s = sub.add_parser("grad", parents=[common], help="gradient for all free parameters")
    s.add_argument("--free", help="comma-separated free parameters (overrides config)")
    s.add_argument("--fd", action="store_true", help="add the finite-difference cross-check")

    s = sub.add_parser("optimize", parents=[common], help="fit epsilon/delta to a target <O>")
    s.add_argument("--target", type=float, required=True)
    s.add_argument("--free", default="epsilon,delta")
    s.add_argument("--iters", type=int, default=100)
    s.add_argument("--lr", type=float, default=0.1)
    s.add_argument("--seeds", type=int, default=5, help="number of random initialisations")
    s.add_argument("--seed-base", type=int, default=0)
    s.add_argument("--figure", metavar="PATH", help="also render a figure (png/pdf/svg)")
    return parser


@contextlib.contextmanager
def _output(path: str | None):
    if path is None:
        yield sys.stdout
        return
    buf = io.StringIO()
    yield buf
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _split_names(text: str) -> list[str]:
    names = [n.strip() for n in text.split(",") if n.strip()]
    unknown = [n for n in names if n not in PARAM_NAMES]
    if unknown:
        raise ConfigError(f"unknown parameter(s) {unknown}")
    return names


def _run(args) -> int:
    cfg = load_config(args.config)
    err = sys.stderr
    if args.command == "steady":
        lines, results = cmd_steady(cfg, args.method)
        with _output(args.out) as fh:
            fh.write("\n".join(lines) + "\n")
        if all(isinstance(r, DegenerateSteadyStateError) for r in results.values()):
            return EXIT_DEGENERATE
        return EXIT_OK

    if args.command == "sweep":
        rows = cmd_sweep(cfg, args.param, args.start, args.stop, args.steps)
        with _output(args.out) as fh:
            write_sweep_csv(rows, fh)
        for r in rows:
            if r["degenerate"]:
                print(f"warning: {r['param_name']}={fmt(r['param_value'])}: degenerate fixed point, "
                      "value depends on rho0", file=err)
        if args.figure:
            from .plotting import sweep_figure

            sweep_figure(rows, args.figure, cfg.observable)
            print(f"figure written to {args.figure}", file=err)
        failed = sum(1 for r in rows if r["error"])
        if failed:
            print(f"{failed} of {len(rows)} points failed", file=err)
            return EXIT_SOLVER
        return EXIT_OK

    if args.command == "grad":
        if args.free is not None:
            cfg = cfg.replace(free=tuple(_split_names(args.free)))
        out = cmd_grad(cfg, with_fd=args.fd)
        with _output(args.out) as fh:
            write_grad_csv(out, fh)
        print("\n".join(grad_report_lines(out, cfg.observable)), file=err)
        return EXIT_OK

    if args.command == "optimize":
        runs = cmd_optimize(cfg, args.target, _split_names(args.free), args.iters, args.lr, args.seeds,
                            args.seed_base)
        with _output(args.out) as fh:
            write_optimize_csv(runs, cfg, fh)
        print("\n".join(optimize_summary_lines(runs, cfg)), file=err)
        if args.figure:
            from .plotting import optimize_figure

            optimize_figure({seed: recs for seed, recs, _ in runs}, args.target, args.figure)
            print(f"figure written to {args.figure}", file=err)
        return EXIT_SOLVER if any(e is not None for _, _, e in runs) else EXIT_OK
    raise AssertionError(args.command)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateSteadyStateError as exc:
        print(f"degenerate steady state: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (SteadyStateError, QuadratureError, AdjointNonConvergenceError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
