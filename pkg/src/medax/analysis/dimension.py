"""Box-counting dimension, the computable stand-in for Hausdorff dimension."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from medax.geometry import merge_points

MIN_POINTS = 10
MIN_RATIO = 16.0


@dataclass
class DimensionEstimate:
    value: float
    scales: np.ndarray = field(default_factory=lambda: np.zeros(0))
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    fit_r2: float = 1.0
    n_points: int = 0


def box_dimension(points, min_scale: float, max_scale: float, n_scales: int = 8) -> DimensionEstimate:
    """Slope of log(occupied boxes) against log(1/scale) on a geometric scale ladder."""
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if len(P) < MIN_POINTS:
        raise ValueError(f"box counting needs at least {MIN_POINTS} points")
    if n_scales < 4:
        raise ValueError("box counting needs at least 4 scales")
    if not (0 < min_scale and max_scale / min_scale >= MIN_RATIO * (1 - 1e-12)):
        raise ValueError(f"scale range must span a factor of at least {MIN_RATIO:g}")
    scales = np.geomspace(min_scale, max_scale, n_scales)
    if np.all(P == P[0]):
        return DimensionEstimate(0.0, scales, np.ones(n_scales, dtype=int), 1.0, len(P))
    origin = P.min(axis=0)
    counts = np.array([len(np.unique(np.floor((P - origin) / s).astype(np.int64), axis=0)) for s in scales])
    x = np.log(1.0 / scales)
    y = np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 if total == 0 else float(1.0 - np.sum(resid ** 2) / total)
    return DimensionEstimate(float(slope), scales, counts, r2, len(P))


def default_scales(spacing: float, diameter: float) -> tuple[float, float]:
    """Scale ladder from diameter/256 to diameter/16, shifted up so the
    smallest box is at least one sampler spacing.

    Scales above about a sixteenth of the box see a network of curves or
    sheets as area-filling and bias the slope upward; boxes finer than the
    sampling leave gaps and bias it downward.
    """
    lo = max(diameter / MIN_RATIO ** 2, spacing)
    return lo, MIN_RATIO * lo


def set_dimension(points, spacing: float, diameter: float, merge_tol: float | None = None,
                  n_scales: int = 8) -> DimensionEstimate:
    """Dimension of a sampled set as the largest box dimension of its pieces.

    Points are split into clusters linked at twice the smallest box scale. A
    cluster with fewer than 10 distinct points is an isolated (finite) piece
    and counts as dimension 0; the others are box-counted. Box dimension is
    finitely stable, so the maximum over pieces is the dimension of the union.
    """
    P = np.asarray(points, dtype=float)
    lo, hi = default_scales(spacing, diameter)
    if len(P) == 0:
        return DimensionEstimate(0.0, n_points=0)
    tol = 1e-9 * diameter if merge_tol is None else merge_tol
    distinct = P[merge_points(P, tol)[0]]
    _, labels = merge_points(distinct, 2.0 * lo)
    best = DimensionEstimate(0.0, np.geomspace(lo, hi, n_scales), np.zeros(n_scales, dtype=int), 1.0, len(P))
    for lab in np.unique(labels):
        piece = distinct[labels == lab]
        if len(piece) < MIN_POINTS:
            continue
        est = box_dimension(piece, lo, hi, n_scales)
        if est.value > best.value:
            best = est
    best.n_points = len(P)
    return best
