"""Matplotlib figures written next to the delimited CLI output.

SVG output is made reproducible by fixing the id hash salt and dropping the
creation date, so identical inputs give identical bytes.
"""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .artifacts import atomic_write  # noqa: E402

style = {
    "figure.figsize": (6.4, 4.0),
    "font.size": 10,
    "axes.grid": True,
    "grid.color": "#CCCCCC",
    "grid.linestyle": "--",
    "grid.linewidth": 0.6,
    "lines.linewidth": 1.5,
    "legend.frameon": False,
    "svg.hashsalt": "hypertilt",
    "svg.fonttype": "path",
}

pair_color = "#C0392B"
fisher_color = "#2166AC"
single_color = "#222222"


def save_svg(fig, path, description: str) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Description": description})
    plt.close(fig)
    atomic_write(path, buf.getvalue())


def plot_fringe(path, theta_urad, probability, description, counts=None, model=None):
    with plt.rc_context(style):
        fig, ax = plt.subplots()
        if counts is not None:
            ax.plot(theta_urad, counts, "o", ms=3, color=pair_color, label="data")
        if probability is not None:
            ax.plot(theta_urad, probability, "-", color=pair_color if counts is None else "k", label="model")
        if model is not None:
            ax.plot(model[0], model[1], "-", color="k", label="fit")
        ax.set_xlabel(r"$\theta$ ($\mu$rad)")
        ax.set_ylabel(r"$p(\theta)$")
        ax.set_ylim(0, 1)
        ax.legend(loc="lower right")
        fig.tight_layout()
        save_svg(fig, path, description)


def plot_fisher(path, theta_urad, cfi, shot_noise, description, qfi=None, band=None):
    """CFI curve with the shot-noise level as a dashed rule."""
    with plt.rc_context(style):
        fig, ax = plt.subplots()
        if band is not None:
            ax.fill_between(theta_urad, band[0], band[1], color=fisher_color, alpha=0.2, lw=0)
        ax.plot(theta_urad, cfi, color=fisher_color, label="Fisher information")
        ax.axhline(shot_noise, color="k", ls="--", lw=1, label="shot noise")
        if qfi is not None:
            ax.axhline(qfi, color="0.5", ls=":", lw=1, label="quantum bound")
        ax.set_xlabel(r"$\theta$ ($\mu$rad)")
        ax.set_ylabel(r"$F(\theta)$ (rad$^{-2}$)")
        ax.set_ylim(bottom=0)
        ax.legend(loc="upper right")
        fig.tight_layout()
        save_svg(fig, path, description)


def plot_scaling(path, series: dict, description):
    """``series`` maps a label to (N, qfi, baseline) arrays; drawn on log-log axes."""
    with plt.rc_context(style):
        fig, ax = plt.subplots()
        markers = iter("os^d")
        baseline_drawn = False
        for label, (ns, q, base) in series.items():
            ax.loglog(ns, q, marker=next(markers), ms=4, label=f"cov rule: {label}")
            if not baseline_drawn:
                ax.loglog(ns, base, "k--", lw=1, label="shot noise")
                baseline_drawn = True
        ax.set_xlabel("N")
        ax.set_ylabel(r"QFI (rad$^{-2}$)")
        ax.legend(loc="upper left")
        fig.tight_layout()
        save_svg(fig, path, description)


def plot_estimates(path, estimates_urad, theta_true_urad, crb_sd_urad, description):
    """Histogram of MLE estimates against the Cramer-Rao Gaussian."""
    with plt.rc_context(style):
        fig, ax = plt.subplots()
        ax.hist(estimates_urad, bins=40, density=True, color=fisher_color, alpha=0.6, label="estimates")
        x = np.linspace(theta_true_urad - 4 * crb_sd_urad, theta_true_urad + 4 * crb_sd_urad, 400)
        pdf = np.exp(-0.5 * ((x - theta_true_urad) / crb_sd_urad) ** 2) / (crb_sd_urad * np.sqrt(2 * np.pi))
        ax.plot(x, pdf, "k--", lw=1, label="Cramer-Rao bound")
        ax.axvline(theta_true_urad, color=pair_color, lw=1)
        ax.set_xlabel(r"$\hat\theta$ ($\mu$rad)")
        ax.legend(loc="upper right")
        fig.tight_layout()
        save_svg(fig, path, description)
