"""Figure rendering for CSV outputs (headless, written next to the data)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["render_csv", "render_squeezing_csv"]


def _load(csv_path):
    """Header names verbatim (half-integer block labels contain dots)."""
    with open(csv_path, "r", encoding="utf-8") as fh:
        names = fh.readline().strip().split(",")
    data = np.atleast_2d(np.genfromtxt(csv_path, delimiter=",", skip_header=1))
    return {name: data[:, i] for i, name in enumerate(names)}, names


def render_csv(csv_path, png_path, title=None, logy=False, ylabel=None):
    """Plot every column of a time-series CSV against its first column."""
    data, names = _load(csv_path)
    tname = names[0]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in names[1:]:
        ax.plot(data[tname], data[name], label=name, lw=1.2)
    ax.set_xlabel(tname)
    if ylabel:
        ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("log")
    if title:
        ax.set_title(title)
    if len(names) > 2:
        ax.legend(fontsize=8, ncol=1 + (len(names) > 8))
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return png_path


def render_squeezing_csv(csv_path, png_path, title=None):
    """Squeezing curves on a log scale; local dotted, collective dashed."""
    data, names = _load(csv_path)
    tname = names[0]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    styles = {"free": "-", "local": ":", "collective": "--"}
    for name in names[1:]:
        style = "-"
        for key, s in styles.items():
            if key in name:
                style = s
        ax.plot(data[tname], data[name], style, label=name, lw=1.3)
    ax.set_yscale("log")
    ax.set_xlabel(tname)
    ax.set_ylabel("squeezing parameter")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)
    return png_path
