"""Static SVG scatter figures for pipeline reports.

All figures render through the Agg backend with a fixed hash salt and no
embedded date metadata, so identical inputs produce byte-identical SVG.
"""

from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

log = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "hyperlex"
plt.rcParams["figure.max_open_warning"] = 0

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def save_feature_scatter(path: str | Path, xs, ys, colors, xlabel: str, ylabel: str,
                         color_label: str, title: str = "") -> None:
    """Feature-pair scatter colored by a third quantity (value or residual)."""
    fig, ax = plt.subplots(figsize=(6, 5))
    points = ax.scatter(xs, ys, c=colors, cmap="coolwarm", s=14, alpha=0.8,
                        linewidths=0)
    fig.colorbar(points, ax=ax, label=color_label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    log.info("wrote %s", path)


def save_moments_scatter(path: str | Path, panels: dict[str, tuple], xlabel: str = "context mean",
                         ylabel: str = "context std") -> None:
    """Mean-std scatter panels, one per labeled moment collection.

    panels maps a label to (means, stds) arrays; empirical and null
    collections side by side expose the compartmentalization pattern.
    """
    n = len(panels)
    fig, axes = plt.subplots(1, n, figsize=(5 * n, 4.2), squeeze=False)
    for ax, (label, (means, stds)) in zip(axes[0], panels.items()):
        ax.scatter(means, stds, s=10, alpha=0.6, linewidths=0, color="#3b6ea5")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(label)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    log.info("wrote %s", path)
