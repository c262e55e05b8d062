"""Convergence and profile figures for study outputs (headless Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def render_study(study, outdir, basename: str = "study") -> list:
    """One log-log figure per study with the fitted slope in the legend."""
    outdir = Path(outdir)
    cols = study.columns
    xkey = "tau" if study.kind == "time" else "N_total"
    x = np.asarray(cols[xkey], dtype=np.float64)

    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for key, values in cols.items():
        if key in ("tau", "N", "N_total"):
            continue
        name = key.split("_", 1)[1]
        fit = study.fits.get(name)
        label = key if fit is None else f"{key} (slope {fit.slope:.3f})"
        ax.loglog(x, values, "o-", label=label)
        if fit is not None:
            sign = 1.0 if study.kind == "time" else -1.0
            xw = x[list(fit.window)]
            ax.loglog(xw, np.exp(fit.intercept) * xw ** (sign * fit.slope),
                      "k--", linewidth=0.8)
    ax.set_xlabel(r"$\tau$" if study.kind == "time" else r"$N_{\mathrm{tot}}$")
    ax.set_ylabel("error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = outdir / f"{basename}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def render_field(field, outdir, basename: str) -> list:
    """Plot a grid profile (density, current, ...) over the torus."""
    outdir = Path(outdir)
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    ax.plot(field.grid.nodes, field.values)
    ax.set_xlabel("x")
    ax.set_ylabel(field.name)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = outdir / f"{basename}.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]
