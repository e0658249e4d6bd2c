"""Report artifacts: per-function comparison data and rendered figures.

For each probe function the report writes a delimited file with the kernel
output and the family average side by side, and renders the same curves to a
PNG so a run can be eyeballed without further tooling.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .grids import SampledFunction  # noqa: E402
from .kernels import MarkovKernel, apply  # noqa: E402


def write_plot_data(path, grid_points, kernel_vals, avg_vals):
    """Three-column CSV: y, kernel output at y, family average at y."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["y", "phi_f", "avg"])
        for y, p, a in zip(grid_points, kernel_vals, avg_vals):
            wr.writerow([f"{y:.12g}", f"{p:.12g}", f"{a:.12g}"])


def render_figure(path, grid_points, kernel_vals, avg_vals, title):
    fig, (ax, axd) = plt.subplots(
        2, 1, figsize=(6.4, 5.6), sharex=True, height_ratios=[3, 1]
    )
    ax.plot(grid_points, kernel_vals, label="kernel", lw=1.8)
    ax.plot(grid_points, avg_vals, label="family average", lw=1.2, ls="--")
    ax.set_ylabel("value")
    ax.set_title(title)
    ax.legend(loc="best", frameon=False)
    axd.plot(grid_points, avg_vals - kernel_vals, color="tab:red", lw=1.0)
    axd.axhline(0.0, color="gray", lw=0.6)
    axd.set_xlabel("y")
    axd.set_ylabel("difference")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def emit_report(
    out_dir,
    kernel: MarkovKernel,
    family,
    functions: Sequence[SampledFunction],
    names: Sequence[str],
) -> list:
    """Write plot-data CSV and PNG per probe function; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    pts = kernel.grid.points
    for f, name in zip(functions, names):
        target = apply(kernel, f).values
        avg = family.average(f).values
        csv_path = out_dir / f"plot_{name}.csv"
        png_path = out_dir / f"plot_{name}.png"
        write_plot_data(csv_path, pts, target, avg)
        render_figure(png_path, pts, target, avg, f"kernel vs. averaged family: {name}")
        written.extend([csv_path, png_path])
    return written
