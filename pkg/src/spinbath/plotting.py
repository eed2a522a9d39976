"""Figure rendering for CLI reports (PNG files next to the CSV outputs)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .curves import CurveSeries


def save_curve(
    series: CurveSeries,
    path,
    title="",
    xlabel=None,
    ylabel=None,
    logx=False,
    logy=False,
    fit_x=None,
    fit_y=None,
    fit_label="model",
):
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    if series.sigma is not None:
        ax.errorbar(series.x, series.y, yerr=series.sigma, fmt="o", ms=3, lw=1, capsize=2, label="data")
    else:
        ax.plot(series.x, series.y, "o", ms=3, label="data")
    if fit_x is not None and fit_y is not None:
        ax.plot(fit_x, fit_y, "-", lw=1.5, label=fit_label)
        ax.legend(frameon=False, fontsize=8)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel if xlabel is not None else series.x_unit)
    ax.set_ylabel(ylabel if ylabel is not None else series.y_unit)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_multicurve(curves, path, title="", xlabel="", ylabel="", logx=False):
    """Several labeled (label, CurveSeries) pairs on one axes."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, series in curves:
        ax.plot(series.x, series.y, "-o", ms=2.5, lw=1, label=label)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=8)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_heatmap(values, pitch, path, title="", unit="nm"):
    values = np.asarray(values, dtype=float)
    half = values.shape[0] * pitch / 2.0
    fig, ax = plt.subplots(figsize=(4.4, 3.8))
    vmax = np.max(np.abs(values))
    im = ax.imshow(
        values.T,
        origin="lower",
        extent=(-half, half, -half, half),
        cmap="RdBu_r",
        vmin=-vmax,
        vmax=vmax,
    )
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel(f"x ({unit})")
    ax.set_ylabel(f"y ({unit})")
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
