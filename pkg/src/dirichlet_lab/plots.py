"""Matplotlib figures rendered next to the delimited report output.

Everything renders through the Agg backend straight to PNG files; the
library modules never import this.  PNGs are written without the Software
tag so identical runs produce identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIG_SIZE = (6.4, 4.0)
_SAVE_KW = {"dpi": 130, "metadata": {"Software": None}}


def _new_axes(xlabel: str, ylabel: str, title: str):
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _finish(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def save_spectrum_figure(path: str, per_degree: list[tuple[int, list[tuple[float, int]]]]) -> str:
    """Eigenvalues by degree; marker area scales with multiplicity."""
    fig, ax = _new_axes("degree", "eigenvalue", "generator spectrum by degree")
    for degree, clusters in per_degree:
        values = [v for v, _ in clusters]
        sizes = [24 * m for _, m in clusters]
        ax.scatter([degree] * len(values), values, s=sizes, alpha=0.7, color="tab:blue")
    return _finish(fig, path)


def save_gap_figure(path: str, degrees: list[int], minima: list[float], gap: float) -> str:
    fig, ax = _new_axes("degree", "smallest eigenvalue", "per-degree minima and the gap")
    ax.plot(degrees, minima, "o-", color="tab:blue", label="degree minimum")
    ax.axhline(gap, color="tab:red", ls="--", label=f"gap = {gap:g}")
    ax.legend()
    return _finish(fig, path)


def save_chain_spectrum_figure(path: str, eigenvalues: np.ndarray, gap: float) -> str:
    fig, ax = _new_axes("index", "eigenvalue of -A", "chain generator spectrum")
    ax.plot(np.arange(len(eigenvalues)), eigenvalues, ".", color="tab:blue")
    ax.axhline(gap, color="tab:red", ls="--", label=f"gap = {gap:g}")
    ax.legend()
    return _finish(fig, path)


def save_balance_figure(path: str, labels: list[str], values: list[float]) -> str:
    fig, ax = _new_axes("", "max |log ratio mismatch|", "detailed balance check")
    ax.bar(labels, [max(v, 1e-18) for v in values], color="tab:blue")
    ax.set_yscale("log")
    return _finish(fig, path)


def save_ensemble_figure(
    path: str,
    times: np.ndarray,
    means: np.ndarray,
    ses: np.ndarray,
    exact: list[float],
) -> str:
    fig, ax = _new_axes("time", "coordinate mean", "ensemble means vs exact")
    for i in range(means.shape[1]):
        line, = ax.plot(times, means[:, i], label=f"x{i + 1}")
        ax.fill_between(
            times,
            means[:, i] - 2 * ses[:, i],
            means[:, i] + 2 * ses[:, i],
            alpha=0.2,
            color=line.get_color(),
        )
        ax.axhline(exact[i], color=line.get_color(), ls=":", lw=1)
    ax.legend()
    return _finish(fig, path)


def save_decay_figure(
    path: str,
    times: np.ndarray,
    variances: np.ndarray,
    rate: float,
    window: tuple[float, float],
    target: float | None,
) -> str:
    fig, ax = _new_axes("time", "debiased variance", "semigroup decay fit")
    keep = variances > 0
    ax.semilogy(times[keep], variances[keep], ".", color="tab:blue", label="estimate")
    t0, t1 = window
    mask = (times >= t0) & (times <= t1) & keep
    if mask.any():
        v0 = variances[mask][0]
        tt = times[mask]
        ax.semilogy(tt, v0 * np.exp(-2 * rate * (tt - tt[0])), "-", color="tab:red",
                    label=f"fit rate = {rate:.3g}")
        if target is not None:
            ax.semilogy(tt, v0 * np.exp(-2 * target * (tt - tt[0])), "--", color="tab:green",
                        label=f"target = {target:g}")
    ax.legend()
    return _finish(fig, path)


def save_poincare_figure(
    path: str, labels: list[str], exact: list[float], estimates: list[float]
) -> str:
    fig, ax = _new_axes("", "energy / variance", "Poincare ratios: exact vs sampled")
    pos = np.arange(len(labels))
    ax.bar(pos - 0.18, exact, width=0.36, label="exact", color="tab:blue")
    ax.bar(pos + 0.18, estimates, width=0.36, label="Monte Carlo", color="tab:orange")
    ax.set_xticks(pos, labels)
    ax.legend()
    return _finish(fig, path)


def save_sweep_figure(path: str, rows: list[dict]) -> str:
    """Coupling sweep: estimate with 3-sigma whiskers against the bound."""
    fig, ax = _new_axes("sweep point", "sup-distance", "coupled truncations vs bound")
    pos = np.arange(len(rows))
    est = [r["estimate"] for r in rows]
    err = [3 * r["se"] for r in rows]
    bound = [r["bound"] for r in rows]
    ax.errorbar(pos, est, yerr=err, fmt="o", color="tab:blue", label="estimate (3 SE)")
    ax.plot(pos, bound, "_", ms=18, color="tab:red", label="bound")
    ax.set_xticks(pos, [f"m={r['m']},n={r['n']},T={r['T']:g}" for r in rows], rotation=45,
                  ha="right", fontsize=7)
    ax.legend()
    return _finish(fig, path)
