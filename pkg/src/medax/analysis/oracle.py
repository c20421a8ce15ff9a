"""Brute-force k-medial axis of a finite point set.

For a k-subset S of E the points equidistant from all of S form an affine
flat cut out by k-1 linear equations; M_k is the union, over generic S, of
the parts of these flats where S is also nearest.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.spatial import cKDTree

from medax.geometry import DEFAULT_SIGMA_TOL, as_points, is_generic

MAX_POINTS = 64


def equidistance_system(S) -> tuple[np.ndarray, np.ndarray]:
    """Rows 2 (p_i - p_1) and right-hand side |p_i|^2 - |p_1|^2, i = 2..k."""
    S = as_points(S)
    A = 2.0 * (S[1:] - S[0])
    b = np.einsum("ij,ij->i", S[1:], S[1:]) - S[0] @ S[0]
    return A, b


def _flat(S):
    A, b = equidistance_system(S)
    x0, *_ = np.linalg.lstsq(A, b, rcond=None)
    _, _, vt = np.linalg.svd(A)
    null = vt[A.shape[0]:]
    return x0, null


def _sample_flat(x0, null, lo, hi, spacing):
    m = len(null)
    if m == 0:
        inside = np.all((x0 >= lo) & (x0 <= hi))
        return x0[None, :] if inside else np.zeros((0, len(x0)))
    if m == 1:
        v = null[0]
        t_lo, t_hi = -np.inf, np.inf
        for i in range(len(v)):
            if abs(v[i]) < 1e-15:
                if not lo[i] <= x0[i] <= hi[i]:
                    return np.zeros((0, len(x0)))
                continue
            a, b = (lo[i] - x0[i]) / v[i], (hi[i] - x0[i]) / v[i]
            t_lo, t_hi = max(t_lo, min(a, b)), min(t_hi, max(a, b))
        if t_lo > t_hi:
            return np.zeros((0, len(x0)))
        count = int(np.floor((t_hi - t_lo) / spacing)) + 1
        t = t_lo + spacing * np.arange(count)
        return x0 + t[:, None] * v
    center = (lo + hi) / 2
    radius = np.linalg.norm(hi - lo) / 2
    t0 = null @ (center - x0)
    ticks = np.arange(-radius, radius + spacing, spacing)
    grids = np.meshgrid(*([ticks] * m), indexing="ij")
    T = np.stack([g.ravel() for g in grids], axis=1) + t0
    X = x0 + T @ null
    inside = np.all((X >= lo) & (X <= hi), axis=1)
    return X[inside]


def voronoi_mk_oracle(E, k: int, region, spacing: float, sigma_tol: float = DEFAULT_SIGMA_TOL,
                      tol: float = 1e-9) -> np.ndarray:
    """Samples of M_k(E) for a finite E, taken on the equidistance flats.

    ``region`` is a (lo, hi) box; each flat is sampled at ``spacing`` and a
    sample is kept when the common distance to the subset equals d(x, E)
    within ``tol``. Non-generic subsets are skipped.
    """
    E = as_points(E)
    n = E.shape[1]
    if len(E) > MAX_POINTS:
        raise ValueError(f"oracle limited to {MAX_POINTS} points")
    if not 2 <= k <= n + 1:
        raise ValueError(f"k must lie in [2, {n + 1}]")
    lo, hi = (np.asarray(c, dtype=float) for c in region)
    tree = cKDTree(E)
    out = []
    for combo in itertools.combinations(range(len(E)), k):
        S = E[list(combo)]
        if not is_generic(S, sigma_tol):
            continue
        x0, null = _flat(S)
        X = _sample_flat(x0, null, lo, hi, spacing)
        if len(X) == 0:
            continue
        common = np.linalg.norm(X - S[0], axis=1)
        d, _ = tree.query(X)
        out.append(X[common <= d + tol])
    if not out:
        return np.zeros((0, n))
    return np.vstack(out)
