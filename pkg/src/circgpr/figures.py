"""Matplotlib renderings for the CLI report paths (written next to the data)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_bscan_figure(traces: np.ndarray, dt: float, path: str | Path,
                      title: str = "B-scan") -> None:
    """Trace-vs-time raster with a symmetric diverging scale."""
    fig, ax = plt.subplots(figsize=(6, 4))
    span = np.abs(traces).max() or 1.0
    ax.imshow(traces.T, aspect="auto", origin="lower", cmap="seismic",
              vmin=-span, vmax=span,
              extent=(0, traces.shape[0], 0, traces.shape[1] * dt * 1e9))
    ax.set_xlabel("trace index")
    ax.set_ylabel("time [ns]")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_image_figure(img: np.ndarray, path: str | Path, title: str = "",
                      extent: tuple | None = None) -> None:
    """Spatial intensity map ([ix, iy] array convention, y up)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(np.abs(img).T, origin="lower", cmap="inferno", extent=extent)
    if extent is not None:
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_aft_curves(curves: dict[str, list[tuple[float, float]]],
                    path: str | Path, selected: dict[str, float] | None = None) -> None:
    """Normalized autofocus score curves on one axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, curve in curves.items():
        eps = [e for e, _ in curve]
        score = np.array([s for _, s in curve], dtype=float)
        lo, hi = score.min(), score.max()
        norm = (score - lo) / (hi - lo) if hi > lo else score * 0
        line, = ax.plot(eps, norm, marker="o", ms=3, label=name)
        if selected and name in selected:
            ax.axvline(selected[name], color=line.get_color(), ls="--", lw=1)
    ax.set_xlabel("relative permittivity")
    ax.set_ylabel("normalized score")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_eps_histograms(label_sets: dict[str, list[float]], edges: np.ndarray,
                        path: str | Path) -> None:
    """Side-by-side histograms of the medium-permittivity estimates."""
    fig, ax = plt.subplots(figsize=(6, 4))
    width = (edges[1] - edges[0]) / (len(label_sets) + 1)
    for i, (name, values) in enumerate(label_sets.items()):
        counts, _ = np.histogram(values, bins=edges)
        ax.bar(edges[:-1] + i * width, counts, width=width, align="edge", label=name)
    ax.set_xlabel("relative permittivity")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_error_histogram(errors: dict[str, list[float]], path: str | Path,
                         xlabel: str = "error") -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for name, vals in errors.items():
        if len(vals):
            ax.hist(vals, bins=20, alpha=0.6, label=name)
            plotted = True
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    if plotted:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
