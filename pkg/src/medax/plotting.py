"""Figures written to files: the planar strata overlay and box-count plots.

Figures are built on ``matplotlib.figure.Figure`` directly, so no GUI backend
or global pyplot state is involved. SVG output is made reproducible by
fixing the hash salt and dropping the date stamp.
"""

from __future__ import annotations

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Circle, Polygon as PolygonPatch

from medax import shapes
from medax.analysis.dimension import DimensionEstimate

matplotlib.rcParams["svg.hashsalt"] = "medax"
_SVG_META = {"Date": None, "Creator": None}
_STRATUM_COLORS = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e"]


def _draw_model(ax, model: shapes.ClosedSet) -> None:
    if isinstance(model, shapes.Union):
        for m in model.members:
            _draw_model(ax, m)
    elif isinstance(model, shapes.Polygon):
        ax.add_patch(PolygonPatch(model.vertices, closed=True, fc="0.85", ec="k", lw=1.0))
    elif isinstance(model, shapes.Polyline):
        V = model.vertices
        if model.closed:
            V = list(V) + [V[0]]
        xs, ys = zip(*V)
        ax.plot(xs, ys, "k-", lw=1.0)
    elif isinstance(model, shapes.Sphere):
        ax.add_patch(Circle(model.center, model.radius, fill=False, ec="k", lw=1.0))
    elif isinstance(model, shapes.Balls):
        for c, r in zip(model.centers, model.radii):
            ax.add_patch(Circle(c, r, fc="0.85", ec="k", lw=1.0))
    elif isinstance(model, shapes.PointCloud):
        ax.plot(model.points[:, 0], model.points[:, 1], "ko", ms=3)


def strata_overlay(path, model: shapes.ClosedSet, bbox, strata: dict) -> None:
    """E in black, stratum L_i points coloured by i, framed to the bounding box."""
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot()
    _draw_model(ax, model)
    for i, pts in sorted(strata.items(), reverse=True):
        if len(pts):
            ax.plot(pts[:, 0], pts[:, 1], ".", ms=2 if i else 6, zorder=3 + 1.0 / (1 + i),
                    color=_STRATUM_COLORS[i % len(_STRATUM_COLORS)], label=f"L_{i} ({len(pts)})")
    lo, hi = bbox
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    if any(len(p) for p in strata.values()):
        ax.legend(loc="upper right", fontsize=8)
    fig.savefig(path, format="svg", metadata=_SVG_META)


def box_count_plot(path, estimates: dict[int, DimensionEstimate]) -> None:
    """log N(s) against log(1/s) with the fitted slope, one series per k."""
    fig = Figure(figsize=(5, 4))
    ax = fig.add_subplot()
    drawn = False
    for k, est in estimates.items():
        if len(est.scales) == 0 or est.counts.sum() == 0:
            continue
        ax.loglog(1.0 / est.scales, est.counts, "o-", label=f"k={k}: slope {est.value:.3f}")
        drawn = True
    ax.set_xlabel("1 / box size")
    ax.set_ylabel("occupied boxes")
    if drawn:
        ax.legend(fontsize=8)
    else:
        ax.text(0.5, 0.5, "no piece with enough points to box-count", ha="center", transform=ax.transAxes)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
