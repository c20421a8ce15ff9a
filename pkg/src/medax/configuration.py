"""Generic k-point configurations on the unit sphere and the cone machinery
built on them: the frame (P, Q, h), the spread functional f, the separation
constant c, cone membership and the cosine-gap check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog
from scipy.stats import norm, qmc

from medax.geometry import DEFAULT_SIGMA_TOL, GeometryError, as_points, is_generic, singular_values

UNIT_TOL = 1e-9
FRAME_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Configuration:
    """k unit directions in generic position (an element of the space A)."""

    dirs: np.ndarray
    sigma_tol: float = DEFAULT_SIGMA_TOL

    def __post_init__(self):
        dirs = as_points(self.dirs).copy()
        k, n = dirs.shape
        if not 2 <= k <= n + 1:
            raise GeometryError(f"configuration size k={k} outside [2, {n + 1}] for n={n}")
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise GeometryError("configuration directions must be unit vectors")
        if not is_generic(dirs, self.sigma_tol):
            raise GeometryError("configuration is not in generic position")
        dirs.setflags(write=False)
        object.__setattr__(self, "dirs", dirs)

    @property
    def k(self) -> int:
        return self.dirs.shape[0]

    @property
    def n(self) -> int:
        return self.dirs.shape[1]

    @classmethod
    def from_vectors(cls, vectors, sigma_tol: float = DEFAULT_SIGMA_TOL) -> "Configuration":
        """Normalise arbitrary nonzero vectors onto the sphere first."""
        v = as_points(vectors)
        return cls(v / np.linalg.norm(v, axis=1, keepdims=True), sigma_tol)


@dataclass(frozen=True, eq=False)
class Frame:
    """Orthonormal bases of P (parallel to the affine span of a) and its
    orthogonal complement Q, plus the common Q-projection h of the a_i."""

    basis_P: np.ndarray
    basis_Q: np.ndarray
    h: np.ndarray

    def coords_P(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.basis_P.T

    def coords_Q(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.basis_Q.T

    def proj_P(self, v) -> np.ndarray:
        return self.coords_P(v) @ self.basis_P

    def proj_Q(self, v) -> np.ndarray:
        return self.coords_Q(v) @ self.basis_Q


def config_distance(a: Configuration, b: Configuration) -> float:
    """Bottleneck distance: min over relabelings of the worst pairwise gap.

    Exhaustive over all k! permutations. For k well beyond 7 a bottleneck
    assignment (threshold search + bipartite matching) would be the way to go.
    """
    if a.k != b.k:
        raise GeometryError(f"cannot compare configurations of sizes {a.k} and {b.k}")
    cost = np.linalg.norm(a.dirs[:, None, :] - b.dirs[None, :, :], axis=2)
    perms = _permutations(a.k)
    return float(cost[np.arange(a.k), perms].max(axis=1).min())


@lru_cache(maxsize=None)
def _permutations(k: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(k))), dtype=int)


def _gram_schmidt(vectors: np.ndarray, against: np.ndarray | None = None) -> np.ndarray:
    # two passes of modified Gram-Schmidt ("twice is enough")
    basis = [] if against is None else list(against)
    out = []
    for v in vectors:
        w = np.array(v, dtype=float)
        for _ in range(2):
            for b in basis:
                w -= np.dot(w, b) * b
        nw = np.linalg.norm(w)
        if nw == 0.0:
            raise GeometryError("Gram-Schmidt met a dependent vector")
        w /= nw
        basis.append(w)
        out.append(w)
    return np.array(out).reshape(len(out), -1)


def build_frame(a: Configuration) -> Frame:
    """Orthonormal frame (P, Q, h) attached to a generic configuration."""
    dirs = a.dirs
    k, n = dirs.shape
    diffs = dirs[1:] - dirs[0]
    sv = singular_values(dirs)
    if sv[k - 2] <= a.sigma_tol * max(sv[0], 1.0):
        raise GeometryError("configuration is too close to degenerate to build a frame")
    basis_P = _gram_schmidt(diffs)

    # complete with the standard basis vectors that stick out of P the most
    remaining = list(np.eye(n))
    comp: list[np.ndarray] = []
    while len(comp) < n - (k - 1):
        current = np.vstack([basis_P] + ([np.array(comp)] if comp else []))
        resid = [np.linalg.norm(e - current.T @ (current @ e)) for e in remaining]
        j = int(np.argmax(resid))
        comp.append(_gram_schmidt(remaining.pop(j)[None, :], current)[0])
    basis_Q = np.array(comp).reshape(n - k + 1, n)

    proj_Q = (dirs @ basis_Q.T) @ basis_Q
    h = proj_Q[0].copy()
    frame = Frame(basis_P, basis_Q, h)
    _validate_frame(frame, dirs)
    for arr in (basis_P, basis_Q, h):
        arr.setflags(write=False)
    return frame


def _validate_frame(frame: Frame, dirs: np.ndarray) -> None:
    if frame.basis_Q.size and np.max(np.abs(frame.basis_P @ frame.basis_Q.T)) > UNIT_TOL:
        raise GeometryError("frame bases are not orthogonal")
    proj_Q = frame.proj_Q(dirs)
    if np.max(np.abs(proj_Q - frame.h)) > FRAME_TOL:
        raise GeometryError("Q-projections of the configuration differ")
    if np.linalg.norm(frame.h) >= 1.0:
        raise GeometryError("common Q-projection has norm >= 1")
    lengths = np.linalg.norm(frame.coords_P(dirs), axis=1)
    if np.ptp(lengths) > FRAME_TOL:
        raise GeometryError("P-projections of the configuration have unequal lengths")


def _difference_vectors(a: Configuration, frame: Frame) -> np.ndarray:
    p = frame.coords_P(a.dirs)
    i, j = np.where(~np.eye(a.k, dtype=bool))
    return p[i] - p[j]


def f_of_w(w, a: Configuration, frame: Frame | None = None) -> float:
    """Spread max_i <w, pi_P(a_i)> - min_i <w, pi_P(a_i)> for nonzero w in P."""
    frame = frame or build_frame(a)
    w = np.asarray(w, dtype=float)
    nw = np.linalg.norm(w)
    if nw == 0.0:
        raise GeometryError("f is evaluated on nonzero vectors only")
    if np.linalg.norm(frame.coords_Q(w)) > 1e-9 * max(1.0, nw):
        raise GeometryError("w does not lie in the plane P")
    dots = frame.proj_P(a.dirs) @ w
    return float(dots.max() - dots.min())


def _sphere_seeds(m: int, count: int) -> np.ndarray:
    if m == 1:
        return np.array([[1.0], [-1.0]])
    halton = qmc.Halton(d=m, scramble=False)
    halton.fast_forward(1)
    pts = norm.ppf(halton.random(count))
    pts = np.vstack([pts, np.eye(m), -np.eye(m)])
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def _tangent_plane_step(u: np.ndarray, diffs: np.ndarray) -> np.ndarray | None:
    # minimise the (convex, homogeneous) spread over the plane <w, u> = 1
    m = u.size
    cost = np.zeros(m + 1)
    cost[-1] = 1.0
    A_ub = np.hstack([diffs, -np.ones((len(diffs), 1))])
    A_eq = np.append(u, 0.0)[None, :]
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(len(diffs)), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(None, None)] * (m + 1), method="highs")
    if res.status != 0:
        return None
    w = res.x[:m]
    return w / np.linalg.norm(w)


def _snap_to_facet(u: np.ndarray, diffs: np.ndarray) -> np.ndarray | None:
    # the minimiser is the normal of a facet of conv(diffs); recover it exactly
    vals = diffs @ u
    active = diffs[vals >= vals.max() - 1e-7 * max(1.0, abs(vals.max()))]
    m = u.size
    if len(active) < m:
        return None
    _, sv, vt = np.linalg.svd(active - active[0])
    if sv.size >= m - 1 and m > 1 and sv[m - 2] <= 1e-9 * max(1.0, sv[0]):
        return None
    normal = vt[-1]
    if np.dot(normal, active[0]) < 0:
        normal = -normal
    return normal


def separation_constant(a: Configuration, frame: Frame | None = None,
                        n_polish: int = 8, max_steps: int = 50) -> float:
    """c = inf{ f(w) : w in P, 1/2 <= |w| <= 1 } = (1/2) min over unit w of f(w).

    A deterministic Halton grid of 2^(k-1)*32 directions on the unit sphere of
    P is scored; the best ``n_polish`` seeds are then pushed downhill by
    repeatedly minimising f over the tangent plane at the current point (an LP,
    f being a max of linear forms) and finally snapped to the exact facet normal
    of the difference polytope.
    """
    frame = frame or build_frame(a)
    diffs = _difference_vectors(a, frame)
    m = a.k - 1
    seeds = _sphere_seeds(m, 2 ** m * 32)
    values = (seeds @ diffs.T).max(axis=1)
    best = float(values.min())
    if m == 1:
        return 0.5 * best

    order = np.argsort(values, kind="stable")
    starts: list[np.ndarray] = []
    for idx in order:
        if all(np.linalg.norm(seeds[idx] - s) > 1e-3 for s in starts):
            starts.append(seeds[idx])
        if len(starts) == n_polish:
            break

    for u in starts:
        fu = float((diffs @ u).max())
        for _ in range(max_steps):
            nxt = _tangent_plane_step(u, diffs)
            if nxt is None:
                break
            fn = float((diffs @ nxt).max())
            if fn >= fu - 1e-15:
                break
            u, fu = nxt, fn
        snapped = _snap_to_facet(u, diffs)
        if snapped is not None:
            fu = min(fu, float((diffs @ snapped).max()))
        best = min(best, fu)
    c = 0.5 * best
    if not c > 0:
        raise GeometryError("separation constant is not positive; configuration degenerate")
    return c


def in_cone(v, frame: Frame, r: float) -> bool:
    """Membership of v in the open cone {dist(v, P) / |v| < r}."""
    if not 0 < r < 1:
        raise GeometryError("cone aperture r must lie in (0, 1)")
    v = np.asarray(v, dtype=float)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise GeometryError("the cone excludes the origin")
    return bool(np.linalg.norm(frame.coords_Q(v)) / nv < r)


def separation_check(v, a: Configuration, frame: Frame, c: float, r: float = 0.5):
    """Indices of the largest and smallest cos(angle(v, 0, a_i)) and their gap.

    ``v`` must lie in the cone of aperture ``r <= 1/2``; the gap then exceeds c.
    """
    if r > 0.5:
        raise GeometryError("separation check requires r <= 1/2")
    v = np.asarray(v, dtype=float)
    if not in_cone(v, frame, r):
        raise GeometryError("v is outside the cone around P")
    cosines = a.dirs @ v / np.linalg.norm(v)
    i_max = int(np.argmax(cosines))
    i_min = int(np.argmin(cosines))
    return i_max, i_min, float(cosines[i_max] - cosines[i_min])
