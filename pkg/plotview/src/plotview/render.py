"""Rectangle-tiling renderers for subdomain maps and policy heatmaps.

Every rectangle is drawn verbatim from its CSV record; the only derived
artwork is the h = 0 contour on the map.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from matplotlib import cm, colors
from matplotlib.patches import Patch, Rectangle

from .hexpr import compile_expression
from .records import PlotviewError

# verified boxes green, infeasible ones red (the two terminal cases);
# anything still open at shutdown in muted grays
CASE_COLORS = {
    "A": "#2ca02c",
    "B": "#d62728",
    "C1": "#9467bd",
    "C2": "#c7c7c7",
    "terminal": "#8c8c8c",
}


def _require_planar(records, problem) -> None:
    dims = {len(r.lower) for r in records}
    if dims != {2} or problem["n"] != 2:
        raise PlotviewError(
            f"only 2-D problems can be rendered (got n = {problem['n']}, "
            f"CSV box dimensions {sorted(dims)})"
        )


def _add_boxes(ax, records, facecolors) -> None:
    for record, color in zip(records, facecolors):
        ax.add_patch(
            Rectangle(
                (record.lower[0], record.lower[1]),
                record.upper[0] - record.lower[0],
                record.upper[1] - record.lower[1],
                facecolor=color,
                edgecolor="white",
                linewidth=0.1,
            )
        )


def render_map(records, problem, out=None, contour_points=500):
    """Case-colored subdomain tiling with the h = 0 boundary overlaid."""
    if not records:
        raise PlotviewError("no records")
    _require_planar(records, problem)
    fig, ax = plt.subplots(figsize=(6.4, 6.0))
    _add_boxes(ax, records, [CASE_COLORS[r.case] for r in records])

    (x_lo, y_lo), (x_hi, y_hi) = problem["X"]
    xs = np.linspace(x_lo, x_hi, contour_points)
    ys = np.linspace(y_lo, y_hi, contour_points)
    X1, X2 = np.meshgrid(xs, ys)
    H = compile_expression(problem["h"])(x1=X1, x2=X2)
    ax.contour(X1, X2, H, levels=[0.0], colors="black", linewidths=1.4)

    ax.set_xlim(x_lo, x_hi)
    ax.set_ylim(y_lo, y_hi)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_aspect("equal")
    ax.legend(
        handles=[
            Patch(facecolor=CASE_COLORS["A"], label="verified (case A)"),
            Patch(facecolor=CASE_COLORS["B"], label="infeasible (case B)"),
        ],
        loc="upper right",
        fontsize=8,
    )
    if out is not None:
        fig.savefig(out, dpi=150, bbox_inches="tight")
    return fig


def render_policy(records, problem, j=1, out=None):
    """Heatmap of input component u_j over the verified subdomains."""
    if not records:
        raise PlotviewError("no records")
    _require_planar(records, problem)
    m = len(records[0].u)
    if not 1 <= j <= m:
        raise PlotviewError(f"input component j = {j} out of range (policy has m = {m})")

    # colorbar pinned to the admissible range, not the attained one
    u_lo, u_hi = problem["U"][0][j - 1], problem["U"][1][j - 1]
    norm = colors.Normalize(vmin=u_lo, vmax=u_hi)
    cmap = plt.get_cmap("viridis")

    fig, ax = plt.subplots(figsize=(7.2, 6.0))
    _add_boxes(ax, records, [cmap(norm(r.u[j - 1])) for r in records])
    fig.colorbar(cm.ScalarMappable(norm=norm, cmap=cmap), ax=ax, label=f"u{j}")

    (x_lo, y_lo), (x_hi, y_hi) = problem["X"]
    ax.set_xlim(x_lo, x_hi)
    ax.set_ylim(y_lo, y_hi)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_aspect("equal")
    if out is not None:
        fig.savefig(out, dpi=150, bbox_inches="tight")
    return fig
