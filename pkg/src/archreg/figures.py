"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def sweep_figure(rows: list, path) -> None:
    """Accuracy and runtime versus cluster radius, averaged over seeds."""
    radii = sorted({row["radius_mm"] for row in rows})
    err = [np.mean([r["mean_error_mm"] for r in rows if r["radius_mm"] == rad])
           for rad in radii]
    run = [np.mean([r["runtime_s"] for r in rows if r["radius_mm"] == rad])
           for rad in radii]
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ax1.plot(radii, err, "o-", color="tab:red", label="mean landmark error")
    ax1.set_xlabel("cluster radius [mm]")
    ax1.set_ylabel("mean landmark error [mm]", color="tab:red")
    ax1.tick_params(axis="y", labelcolor="tab:red")
    ax2 = ax1.twinx()
    ax2.plot(radii, run, "s--", color="tab:blue", label="runtime")
    ax2.set_ylabel("runtime [s]", color="tab:blue")
    ax2.tick_params(axis="y", labelcolor="tab:blue")
    ax1.set_title("Cluster radius study")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def benchmark_figure(table: list, path) -> None:
    """Bar chart of per-method mean landmark errors.

    `table` rows are dicts with 'method' and 'mean_error_mm'.
    """
    methods = [row["method"] for row in table]
    errors = [row["mean_error_mm"] for row in table]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(methods, errors, color="tab:gray")
    ax.set_ylabel("mean landmark error [mm]")
    ax.set_title("Method comparison")
    for i, e in enumerate(errors):
        ax.text(i, e, f"{e:.2f}", ha="center", va="bottom")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def landmark_figure(per_landmark_mm: list, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(range(len(per_landmark_mm)), per_landmark_mm, color="tab:gray")
    ax.axhline(np.mean(per_landmark_mm), color="tab:red", linestyle="--",
               label=f"mean {np.mean(per_landmark_mm):.2f} mm")
    ax.set_xlabel("landmark")
    ax.set_ylabel("error [mm]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
