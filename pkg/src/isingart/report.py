"""Report rendering: trace heatmaps, hand-painting templates, CSV exports.

Figures are written straight to files; the module forces the Agg backend so
it works headless.
"""
from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.patheffects as patheffects
import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from .evolution import EvolutionTrace
from .imaging import TileGrid
from .pipeline import template_labels, template_legend
from .reorder import TransformPlan

__all__ = [
    "write_trace_csv",
    "read_trace_csv",
    "save_trace_heatmap",
    "save_template",
    "write_legend_csv",
]


def write_trace_csv(trace: EvolutionTrace, path) -> None:
    """Wide CSV: one row per time slice, one column per site."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slice"] + [f"site_{n}" for n in range(trace.num_sites)])
        for s in range(trace.num_slices):
            writer.writerow([s] + [repr(float(v)) for v in trace.expectations[s]])


def read_trace_csv(path) -> EvolutionTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        rows = [[float(v) for v in line[1:]] for line in reader]
    return EvolutionTrace(expectations=np.array(rows))


def save_trace_heatmap(trace: EvolutionTrace, path, title: str | None = None) -> None:
    """Slices-by-sites heatmap of the measured observable values."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    im = ax.imshow(
        trace.expectations,
        aspect="auto",
        origin="lower",
        cmap="magma",
        vmin=0.0,
        vmax=1.0,
        interpolation="nearest",
    )
    ax.set_xlabel("site")
    ax.set_ylabel("time slice")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="P(site reads 1)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_template(
    image: Image.Image, grid: TileGrid, plan: TransformPlan, path
) -> None:
    """Output image with grid overlay and per-tile source labels."""
    labels = template_labels(plan)
    fig_w = max(6.0, image.size[0] / 120)
    fig_h = fig_w * image.size[1] / image.size[0]
    fig, ax = plt.subplots(figsize=(fig_w, fig_h))
    ax.imshow(np.asarray(image))
    for x in grid.x_edges:
        ax.axvline(x - 0.5, color="white", lw=0.8, alpha=0.9)
        ax.axvline(x - 0.5, color="black", lw=0.3)
    for y in grid.y_edges:
        ax.axhline(y - 0.5, color="white", lw=0.8, alpha=0.9)
        ax.axhline(y - 0.5, color="black", lw=0.3)
    tile_w = grid.region.width / grid.columns
    fontsize = max(4.0, min(10.0, tile_w / 6))
    for row in range(grid.rows):
        for col in range(grid.columns):
            x0, y0, x1, y1 = grid.tile_box(row, col)
            ax.text(
                (x0 + x1) / 2,
                (y0 + y1) / 2,
                labels[row][col],
                ha="center",
                va="center",
                fontsize=fontsize,
                color="white",
                path_effects=[patheffects.withStroke(linewidth=1.5, foreground="black")],
            )
    ax.set_xlim(-0.5, image.size[0] - 0.5)
    ax.set_ylim(image.size[1] - 0.5, -0.5)
    ax.axis("off")
    fig.tight_layout(pad=0.2)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_legend_csv(plan: TransformPlan, path) -> None:
    """Delimited legend mapping every destination tile to its source."""
    legend = template_legend(plan)
    fields = list(legend[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(legend)
