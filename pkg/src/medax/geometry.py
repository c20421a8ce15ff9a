"""Euclidean primitives: angles, affine rank and generic position."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_SIGMA_TOL = 1e-6
UNIT_TOL = 1e-9


class GeometryError(ValueError):
    """Raised when a geometric quantity is undefined for the given input."""


def as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise GeometryError(f"expected a list of points, got array of shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("point coordinates must be finite")
    return arr


def angle_at(x, y, z) -> float:
    """Angle at vertex ``y`` between the rays toward ``x`` and ``z``, in [0, pi].

    Uses 2 atan2(|u - w|, |u + w|) on the unit rays, which stays accurate
    near 0 and pi where arccos of the cosine loses half the digits.
    """
    x, y, z = (np.asarray(p, dtype=float) for p in (x, y, z))
    u = x - y
    w = z - y
    nu = np.linalg.norm(u)
    nw = np.linalg.norm(w)
    if nu == 0.0 or nw == 0.0:
        raise GeometryError("angle undefined: an endpoint coincides with the vertex")
    u, w = u / nu, w / nw
    return float(2.0 * np.arctan2(np.linalg.norm(u - w), np.linalg.norm(u + w)))


def singular_values(points) -> np.ndarray:
    pts = as_points(points)
    centered = pts - pts.mean(axis=0)
    return np.linalg.svd(centered, compute_uv=False)


def affine_rank(points, sigma_tol: float = DEFAULT_SIGMA_TOL) -> int:
    """Dimension of the affine hull of ``points``.

    Singular values of the centred point matrix are counted when they exceed
    ``sigma_tol`` times the largest one (or ``sigma_tol`` itself when every
    singular value vanishes).
    """
    if sigma_tol <= 0:
        raise GeometryError("sigma_tol must be positive")
    if len(points) == 0:
        raise GeometryError("affine_rank of an empty point list")
    sv = singular_values(points)
    if sv.size == 0:
        return 0
    scale = sv[0] if sv[0] > 0 else 1.0
    return int(np.count_nonzero(sv > sigma_tol * scale))


def is_generic(points, sigma_tol: float = DEFAULT_SIGMA_TOL) -> bool:
    """True iff the k given points span a (k-1)-dimensional affine plane."""
    k = len(points)
    if k < 1:
        raise GeometryError("is_generic needs at least one point")
    return affine_rank(points, sigma_tol) == k - 1


def merge_points(points, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Collapse points closer than ``tol`` (single linkage).

    Returns ``(keep, labels)``: ``keep`` holds the first index of every
    cluster in input order and ``labels[i]`` is the cluster of point i.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components
    from scipy.spatial import cKDTree

    pts = np.asarray(points, dtype=float)
    m = len(pts)
    if m == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray") if tol > 0 else np.zeros((0, 2), int)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, labels = connected_components(graph, directed=False)
    _, first = np.unique(labels, return_index=True)
    keep = np.sort(first)
    # Renumber clusters in order of their first member.
    return keep, np.searchsorted(keep, first[labels])


@dataclass(frozen=True)
class DirectionSet:
    """Unit directions from a point toward (near-)nearest points of E."""

    dirs: np.ndarray
    tol: float = UNIT_TOL

    def __post_init__(self):
        dirs = as_points(self.dirs)
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > self.tol):
            raise GeometryError("direction set contains non-unit vectors")
        dirs.setflags(write=False)
        object.__setattr__(self, "dirs", dirs)

    def __len__(self) -> int:
        return len(self.dirs)

    def __getitem__(self, i):
        return self.dirs[i]

    @classmethod
    def from_vectors(cls, vectors: Sequence, tol: float = UNIT_TOL) -> "DirectionSet":
        v = as_points(vectors)
        return cls(v / np.linalg.norm(v, axis=1, keepdims=True), tol)
