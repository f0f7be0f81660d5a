"""PNG figures that accompany the CSV reports.

Each function takes already computed arrays and writes one file; none of
them recompute anything.  The Agg backend is forced so the figures render
without a display.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_bound_curves(path, t, tv, vnorm, tau_tv=None, tau_v=None, target_tv=None, target_v=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(t, tv, label="TV bound")
    ax.semilogy(t, vnorm, label="V-norm bound")
    for tau, target, style in ((tau_tv, target_tv, "C0"), (tau_v, target_v, "C1")):
        if tau is not None:
            ax.axvline(tau, color=style, ls=":", lw=1)
        if target is not None:
            ax.axhline(target, color=style, ls="--", lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("bound")
    ax.legend()
    return _save(fig, path)


def plot_tail(path, t, empirical, upper, bound, lower=None, exact=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(t, empirical, where="post", label="empirical P(T > t)")
    if lower is not None:
        ax.fill_between(t, lower, upper, step="post", alpha=0.25, label="Wilson band")
    else:
        ax.step(t, upper, where="post", ls="--", lw=0.8, label="Wilson upper")
    if exact is not None:
        ax.plot(t, exact, "k.", ms=3, label="exact")
    ax.plot(t, np.minimum(bound, 1.0), label="tail bound")
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.legend()
    return _save(fig, path)


def plot_lambda_curve(path, lams, rhos, best=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(lams, rhos, ".-")
    if best is not None:
        ax.axvline(best, color="k", ls=":", lw=1)
    ax.set_xlabel("lambda")
    ax.set_ylabel("rho")
    return _save(fig, path)


def plot_distance_curves(path, t, tv, l2=None, vnorm=None, bound=None):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(t, np.maximum(tv, 1e-300), label="TV")
    if l2 is not None:
        ax.semilogy(t, np.maximum(l2, 1e-300), label="L2")
    if vnorm is not None:
        ax.semilogy(t, np.maximum(vnorm, 1e-300), label="V-norm")
    if bound is not None:
        ax.semilogy(t, bound, "k--", label="TV bound")
    ax.set_xlabel("t")
    ax.legend()
    return _save(fig, path)


def plot_scaling(path, N, gaps, slope, intercept):
    N = np.asarray(N, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(N, gaps, "o", label="1 - rho_TV")
    ax.loglog(N, np.exp(intercept) * N**slope, "--", label=f"slope {slope:.3f}")
    ax.set_xlabel("N")
    ax.legend()
    return _save(fig, path)
