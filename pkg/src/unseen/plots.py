"""Figure rendering for experiment reports.

Every report path writes delimited output first; these helpers render the
matching figure next to it.  Backend is forced to Agg so rendering works
headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_extrapolation_report(report, out_path: str, title: str = "") -> None:
    """True vs predicted new-element counts over the extrapolation grid."""
    t = [p.t_max for p in report.points]
    true_mean = [p.mean_true for p in report.points]
    est_mean = [p.mean_estimate for p in report.points]
    est_sd = [p.sd_estimate for p in report.points]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(t, true_mean, color="black", label="true new elements")
    ax.plot(t, est_mean, color="crimson", label=f"{report.estimator} estimate")
    lo = np.array(est_mean) - np.array(est_sd)
    hi = np.array(est_mean) + np.array(est_sd)
    ax.fill_between(t, lo, hi, color="crimson", alpha=0.2, linewidth=0)
    ax.set_xlabel("maximum extrapolation factor")
    ax.set_ylabel("new distinct elements")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_recovery_rows(rows, out_path: str, title: str = "") -> None:
    """EMD to the true histogram for the empirical and fitted estimates."""
    n = [row["n"] for row in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key, color, label in (
        ("emd_empirical", "steelblue", "empirical"),
        ("emd_counts", "crimson", "counts objective"),
        ("emd_loglik", "seagreen", "likelihood objective"),
    ):
        mean = [float(np.mean(row[key])) for row in rows]
        sd = [float(np.std(row[key], ddof=1)) if len(row[key]) > 1 else 0.0 for row in rows]
        ax.errorbar(n, mean, yerr=sd, color=color, label=label, capsize=3)
    ax.set_xlabel("samples per population")
    ax.set_ylabel("EMD to true histogram")
    ax.set_xscale("log")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def plot_allocation_curves(curves: dict, out_path: str, title: str = "") -> None:
    """Expected gain along each allocation scenario."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in sorted(curves):
        totals = [t for t, _ in curves[name]]
        gains = [g for _, g in curves[name]]
        ax.plot(totals, gains, label=name)
    ax.set_xlabel("total new samples")
    ax.set_ylabel("expected new discoveries")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
