"""Static figures for the ``sweep`` and ``optimize`` commands.

matplotlib is imported lazily with the non-interactive Agg backend so the
library and the CSV path never need a display.
"""

from __future__ import annotations

import math


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update({"font.size": 9, "axes.spines.top": False, "axes.spines.right": False})
    return plt


def _golden(width: float = 6.5) -> tuple[float, float]:
    return width, width * (math.sqrt(5) - 1.0) / 2.0


def sweep_figure(rows: list[dict], path: str, observable: str = "sigma_z") -> None:
    """Expectation value (main axis) and both gradients (inset) against the swept parameter."""
    plt = _pyplot()
    ok = [r for r in rows if not r.get("error")]
    if not ok:
        raise ValueError("no successful sweep points to plot")
    name = ok[0]["param_name"]
    x = [r["param_value"] for r in ok]
    fig, ax = plt.subplots(figsize=_golden())
    ax.plot(x, [r["expectation"] for r in ok], "-o", ms=3, label=f"<{observable}>")
    ax.set_xlabel(name)
    ax.set_ylabel(f"<{observable}> (steady state)")
    inset = ax.inset_axes([0.58, 0.14, 0.38, 0.36])
    inset.plot(x, [r["grad_implicit"] for r in ok], "-", lw=1.5, label="implicit")
    inset.plot(x, [r["grad_fd"] for r in ok], "--", lw=1.2, label="finite diff.")
    inset.set_title(f"d<{observable}>/d{name}", fontsize=8)
    inset.tick_params(labelsize=7)
    inset.legend(fontsize=6, frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def optimize_figure(runs: dict[int, list], target: float, path: str) -> None:
    """Expectation per iteration and the (epsilon, delta) path, one curve per seed."""
    plt = _pyplot()
    w, h = _golden(9.0)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(w, h * 0.7))
    for seed, records in sorted(runs.items()):
        if not records:
            continue
        it = [r.iteration for r in records]
        ax1.plot(it, [r.observable for r in records], lw=1.2, label=f"seed {seed}")
        eps = [r.params_physical.get("epsilon", math.nan) for r in records]
        dl = [r.params_physical.get("delta", math.nan) for r in records]
        line, = ax2.plot(eps, dl, lw=1.0)
        ax2.plot(eps[-1], dl[-1], "o", color=line.get_color(), ms=4)
    ax1.axhline(target, color="k", ls="--", lw=1.0, label="target")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("<O>")
    ax1.legend(fontsize=7, frameon=False)
    ax2.set_xlabel("epsilon")
    ax2.set_ylabel("delta")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
