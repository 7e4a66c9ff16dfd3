"""Static figures written next to the CSV outputs (Agg backend, no display)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .limits import yao_tail_cdf  # noqa: E402

_RC = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.4,
    "savefig.dpi": 150,
}


def plot_variance_panels(summaries, path):
    """Panel A: log Var(zeta_H) against H.  Panel B: Var(xi_H)/Var(zeta_H)."""
    hs = [s.H for s in summaries]
    with plt.rc_context(_RC):
        fig, (ax_a, ax_b) = plt.subplots(1, 2, figsize=(9, 3.6))
        ax_a.plot(hs, [math.log(s.var_zeta) for s in summaries], "o-", color="C0")
        ax_a.set_xlabel("H")
        ax_a.set_ylabel(r"$\log \widehat{Var}[\zeta_H]$")
        ax_a.set_title("A", loc="left", fontweight="bold")
        ax_b.plot(hs, [s.var_ratio for s in summaries], "s-", color="C3")
        ax_b.axhline(1.0, color="0.5", lw=0.8, ls="--")
        ax_b.set_xlabel("H")
        ax_b.set_ylabel(r"$\widehat{Var}[\xi_H] / \widehat{Var}[\zeta_H]$")
        ax_b.set_title("B", loc="left", fontweight="bold")
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)


def plot_densities(H, zeta_curve, xi_curve, path):
    """KDE curves of both limit variables; the exact xi density is overlaid at H = 1/2."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(zeta_curve.x, zeta_curve.density, color="C0", label=r"$\widehat{\zeta}_H$ (KDE)")
        ax.plot(xi_curve.x, xi_curve.density, color="C3", label=r"$\widehat{\xi}_H$ (KDE)")
        if abs(H - 0.5) < 1e-12:
            x = np.linspace(0.0, max(abs(xi_curve.x[0]), xi_curve.x[-1]), 2000)
            tail = yao_tail_cdf(x)
            dens = -np.gradient(tail, x) / 2
            ax.plot(np.concatenate([-x[::-1], x]), np.concatenate([dens[::-1], dens]),
                    color="k", ls="--", lw=1.0, label=r"$\xi_{1/2}$ exact")
        lim = 4 * math.sqrt(max(np.sum(xi_curve.x**2 * xi_curve.density)
                                * (xi_curve.x[1] - xi_curve.x[0]), 1e-12))
        ax.set_xlim(-lim, lim)
        ax.set_xlabel("u")
        ax.set_ylabel("density")
        ax.set_title(f"H = {H:g}")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata={"Software": None})
        plt.close(fig)
