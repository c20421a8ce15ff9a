"""Closed sets E with distance and near-nearest-point queries.

Every model exposes a finite list of *primitives* (points, segments, balls,
net points of a sphere ...). ``nearest_primitives`` returns, per query point,
the nearest point of E on each primitive; ``primitive_distances`` evaluates the
distance to chosen primitives, which is what local refinement tracks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from medax.geometry import as_points

CHUNK = 4096


class ModelError(ValueError):
    pass


@dataclass
class NearSet:
    """Points y of E with |x - y| <= d(x) + tau."""

    points: np.ndarray
    d: float
    tau: float
    handles: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __len__(self) -> int:
        return len(self.points)


def _dedupe(points: np.ndarray, handles: np.ndarray, tol: float):
    keep: list[int] = []
    for i, p in enumerate(points):
        if all(np.linalg.norm(p - points[j]) > tol for j in keep):
            keep.append(i)
    return points[keep], handles[keep]


class ClosedSet:
    """Base class; subclasses fill in the primitive queries."""

    kind = "closed_set"
    dim: int

    # -- primitive interface -------------------------------------------------
    @property
    def n_primitives(self) -> int:
        raise NotImplementedError

    def nearest_primitives(self, X: np.ndarray, q: int | None = None):
        """Return ``(ids, Y, D)`` of shapes (m, p), (m, p, n), (m, p).

        ``q`` caps the number of primitives considered per query point where
        the model can cheaply restrict to the nearest ones; other models
        return all primitives.
        """
        raise NotImplementedError

    def _primitive_distances_flat(self, ids: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _primitive_nearest_flat(self, ids: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def primitive_distances(self, ids, X) -> np.ndarray:
        ids = np.asarray(ids, dtype=int)
        X = np.asarray(X, dtype=float)
        m, k = ids.shape
        flat = self._primitive_distances_flat(ids.ravel(), np.repeat(X, k, axis=0))
        return flat.reshape(m, k)

    def primitive_nearest(self, ids, X) -> np.ndarray:
        """Nearest point of each chosen primitive: ids (m, k), X (m, n) -> (m, k, n)."""
        ids = np.asarray(ids, dtype=int)
        X = np.asarray(X, dtype=float)
        m, k = ids.shape
        flat = self._primitive_nearest_flat(ids.ravel(), np.repeat(X, k, axis=0))
        return flat.reshape(m, k, X.shape[1])

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def char_radius(self) -> float:
        return 0.0

    # -- public queries ------------------------------------------------------
    def distances(self, X) -> np.ndarray:
        X = as_points(X)
        out = np.empty(len(X))
        for s in range(0, len(X), CHUNK):
            _, _, D = self.nearest_primitives(X[s:s + CHUNK], q=1)
            out[s:s + CHUNK] = D.min(axis=1)
        return out

    def distance(self, x) -> float:
        return float(self.distances(np.asarray(x, dtype=float)[None, :])[0])

    def near_set(self, x, tau: float = 0.0) -> NearSet:
        if tau < 0:
            raise ModelError("slack tau must be nonnegative")
        x = np.asarray(x, dtype=float)
        d = self.distance(x)
        if d == 0.0:
            return NearSet(x[None, :].copy(), 0.0, tau, np.array([-1]))
        ids, Y, D = self.nearest_primitives(x[None, :], q=None)
        ids, Y, D = ids[0], Y[0], D[0]
        sel = D <= d + tau + _slack_eps(x, d)
        order = np.argsort(D[sel], kind="stable")
        pts, hds = _dedupe(Y[sel][order], ids[sel][order], _slack_eps(x, d))
        return NearSet(pts, d, tau, hds)

    def near_arrays(self, X, tau, q: int | None = None):
        """Batched near sets: ``(ids, Y, D, near, d)``.

        ``near[i, j]`` flags primitive j as offering a point within
        d(x_i) + tau_i; ``tau`` is a scalar or one slack per point. Duplicate
        points are not removed.
        """
        X = as_points(X)
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (len(X),))
        ids, Y, D = self.nearest_primitives(X, q)
        d = self.distances(X)
        near = D <= (d + tau + _slack_eps(X, d))[:, None]
        return ids, Y, D, near, d

    def candidate_mask(self, X, tau: float, k: int = 2, sigma_tol: float = 1e-6) -> np.ndarray:
        """Cheap necessary test for having k distinct near-nearest points.

        A point passes when, counting its nearest point once, at least k-1
        further primitives offer a near-nearest point whose direction differs
        from the nearest one by more than ``sigma_tol``.
        """
        X = as_points(X)
        mask = np.zeros(len(X), dtype=bool)
        for s in range(0, len(X), CHUNK):
            Xc = X[s:s + CHUNK]
            ids, Y, D = self.nearest_primitives(Xc, q=k + 1)
            d = D.min(axis=1)
            best = Y[np.arange(len(Xc)), D.argmin(axis=1)]
            eps = _slack_eps(Xc, d)
            near = D <= (d + tau + eps)[:, None]
            far = np.linalg.norm(Y - best[:, None, :], axis=2) > (sigma_tol * d)[:, None]
            count = 1 + np.count_nonzero(near & far, axis=1)
            mask[s:s + CHUNK] = (count >= k) & (d > 0)
        return mask


def _slack_eps(x, d):
    return 1e-12 * (1.0 + np.max(np.abs(x), axis=-1) + d)


class PointCloud(ClosedSet):
    """Finite point set. Nearest queries go through a k-d tree unless
    ``brute_force`` is set, in which case every point is scanned."""

    kind = "point_cloud"

    def __init__(self, points, brute_force: bool = False):
        pts = as_points(points)
        if len(pts) == 0:
            raise ModelError("point cloud is empty")
        self.points = pts
        self.dim = pts.shape[1]
        self.brute_force = brute_force
        self._tree = None if brute_force else cKDTree(pts)

    @property
    def n_primitives(self) -> int:
        return len(self.points)

    def nearest_primitives(self, X, q=None):
        X = as_points(X)
        N = len(self.points)
        if self.brute_force or q is None or q >= N:
            D = np.linalg.norm(X[:, None, :] - self.points[None, :, :], axis=2)
            ids = np.broadcast_to(np.arange(N), D.shape)
            if q is not None and q < N:
                ids = np.argsort(D, axis=1, kind="stable")[:, :q]
                D = np.take_along_axis(D, ids, axis=1)
        else:
            D, ids = self._tree.query(X, k=q)
            D = D.reshape(len(X), q)
            ids = ids.reshape(len(X), q)
        return ids, self.points[ids], D

    def _primitive_distances_flat(self, ids, X):
        return np.linalg.norm(X - self.points[ids], axis=1)

    def _primitive_nearest_flat(self, ids, X):
        return self.points[ids]

    def near_set(self, x, tau: float = 0.0) -> NearSet:
        if tau < 0:
            raise ModelError("slack tau must be nonnegative")
        x = np.asarray(x, dtype=float)
        if self.brute_force:
            return super().near_set(x, tau)
        d, _ = self._tree.query(x)
        if d == 0.0:
            return NearSet(x[None, :].copy(), 0.0, tau, np.array([-1]))
        ids = np.array(sorted(self._tree.query_ball_point(x, d + tau + _slack_eps(x, d))), dtype=int)
        D = np.linalg.norm(self.points[ids] - x, axis=1)
        ids = ids[np.argsort(D, kind="stable")]
        pts, hds = _dedupe(self.points[ids], ids, _slack_eps(x, d))
        return NearSet(pts, float(d), tau, hds)

    def bounds(self):
        return self.points.min(axis=0), self.points.max(axis=0)


def _segment_nearest(X, A, B):
    """Nearest points on segments [A_j, B_j] for every x: shapes (m, s, n)."""
    AB = B - A
    L2 = np.einsum("ij,ij->i", AB, AB)
    AX = X[:, None, :] - A[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("msn,sn->ms", AX, AB) / L2
    t = np.where(L2 > 0, np.clip(np.nan_to_num(t), 0.0, 1.0), 0.0)
    Y = A[None] + t[..., None] * AB[None]
    Y = np.where((t == 1.0)[..., None], B[None], Y)
    return Y


class Polyline(ClosedSet):
    """Union of the segments joining consecutive vertices (a curve)."""

    kind = "polyline"

    def __init__(self, vertices, closed: bool = False):
        V = as_points(vertices)
        if len(V) < 2:
            raise ModelError("polyline needs at least two vertices")
        self.vertices = V
        self.closed = closed
        self.dim = V.shape[1]
        self.A = V if closed else V[:-1]
        self.B = np.roll(V, -1, axis=0) if closed else V[1:]

    @property
    def n_primitives(self) -> int:
        return len(self.A)

    def nearest_primitives(self, X, q=None):
        X = as_points(X)
        Y = _segment_nearest(X, self.A, self.B)
        D = np.linalg.norm(Y - X[:, None, :], axis=2)
        ids = np.broadcast_to(np.arange(len(self.A)), D.shape)
        return ids, Y, D

    def _primitive_nearest_flat(self, ids, X):
        A, B = self.A[ids], self.B[ids]
        AB = B - A
        L2 = np.einsum("ij,ij->i", AB, AB)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.einsum("ij,ij->i", X - A, AB) / L2
        t = np.where(L2 > 0, np.clip(np.nan_to_num(t), 0.0, 1.0), 0.0)
        return np.where((t == 1.0)[:, None], B, A + t[:, None] * AB)

    def _primitive_distances_flat(self, ids, X):
        return np.linalg.norm(self._primitive_nearest_flat(ids, X) - X, axis=1)

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


class Polygon(Polyline):
    """Closed filled polygon in the plane (boundary plus interior)."""

    kind = "polygon"

    def __init__(self, vertices):
        super().__init__(vertices, closed=True)
        if self.dim != 2:
            raise ModelError("polygons live in the plane")
        if len(self.vertices) < 3:
            raise ModelError("polygon needs at least three vertices")
        from matplotlib.path import Path

        self._path = Path(self.vertices)

    def inside(self, X) -> np.ndarray:
        return self._path.contains_points(as_points(X))

    def distances(self, X):
        X = as_points(X)
        d = super().distances(X)
        d[self.inside(X)] = 0.0
        return d

    def is_convex(self) -> bool:
        e = self.B - self.A
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        return bool(np.all(cross >= 0) or np.all(cross <= 0))


def _sphere_net(dim: int, count: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.c_[np.cos(t), np.sin(t)]
    if dim == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        phi = np.pi * (3 - np.sqrt(5)) * i
        rho = np.sqrt(1 - z ** 2)
        return np.c_[rho * np.cos(phi), rho * np.sin(phi), z]
    from scipy.stats import norm, qmc

    halton = qmc.Halton(d=dim, scramble=False)
    halton.fast_forward(1)
    pts = norm.ppf(halton.random(count))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


class Sphere(ClosedSet):
    """Round sphere (a circle when n = 2); the surface only.

    Primitive ids ``0..net_size-1`` are fixed net points, id ``net_size`` is
    the whole surface. The net stands in for the continuum of nearest points
    at the centre: a near set is the net when the whole sphere is within the
    slack (2|x - c| <= tau), and the exact nearest point otherwise.
    """

    kind = "circle_or_sphere"

    def __init__(self, center, radius: float, net_size: int = 16):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if not self.radius > 0:
            raise ModelError("radius must be positive")
        self.dim = self.center.size
        self.net_size = net_size
        self.net = self.center + self.radius * _sphere_net(self.dim, net_size)

    @property
    def n_primitives(self) -> int:
        return self.net_size + 1

    def _surface_point(self, X):
        V = X - self.center
        r = np.linalg.norm(V, axis=1)
        safe = np.where(r > 0, r, 1.0)[:, None]
        Y = self.center + self.radius * V / safe
        return np.where((r > 0)[:, None], Y, self.net[0]), np.abs(r - self.radius)

    def nearest_primitives(self, X, q=None):
        X = as_points(X)
        Ys, Ds = self._surface_point(X)
        Yn = np.broadcast_to(self.net, (len(X),) + self.net.shape)
        Dn = np.linalg.norm(Yn - X[:, None, :], axis=2)
        Y = np.concatenate([Yn, Ys[:, None, :]], axis=1)
        D = np.concatenate([Dn, Ds[:, None]], axis=1)
        ids = np.broadcast_to(np.arange(self.net_size + 1), D.shape)
        return ids, Y, D

    def distances(self, X):
        X = as_points(X)
        return np.abs(np.linalg.norm(X - self.center, axis=1) - self.radius)

    def _whole_sphere_near(self, X, tau):
        r = np.linalg.norm(as_points(X) - self.center, axis=1)
        return 2.0 * r <= tau + _slack_eps(self.center, self.radius)

    def near_set(self, x, tau: float = 0.0) -> NearSet:
        if tau < 0:
            raise ModelError("slack tau must be nonnegative")
        x = np.asarray(x, dtype=float)
        Ys, Ds = self._surface_point(x[None, :])
        d = float(Ds[0])
        if d == 0.0:
            return NearSet(x[None, :].copy(), 0.0, tau, np.array([-1]))
        if not self._whole_sphere_near(x[None, :], tau)[0]:
            return NearSet(Ys, d, tau, np.array([self.net_size]))
        return NearSet(self.net.copy(), d, tau, np.arange(self.net_size))

    def candidate_mask(self, X, tau, k=2, sigma_tol=1e-6):
        X = as_points(X)
        return self._whole_sphere_near(X, tau) & (self.distances(X) > 0)

    def _primitive_distances_flat(self, ids, X):
        out = np.abs(np.linalg.norm(X - self.center, axis=1) - self.radius)
        on_net = ids < self.net_size
        out[on_net] = np.linalg.norm(X[on_net] - self.net[ids[on_net]], axis=1)
        return out

    def _primitive_nearest_flat(self, ids, X):
        Y, _ = self._surface_point(X)
        on_net = ids < self.net_size
        Y[on_net] = self.net[ids[on_net]]
        return Y

    def near_arrays(self, X, tau, q=None):
        X = as_points(X)
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (len(X),))
        ids, Y, D = self.nearest_primitives(X)
        d = D[:, -1]
        whole = self._whole_sphere_near(X, tau)
        near = np.zeros(D.shape, dtype=bool)
        near[whole, :-1] = True
        near[~whole, -1] = True
        return ids, Y, D, near, d

    def bounds(self):
        return self.center - self.radius, self.center + self.radius

    def char_radius(self):
        return self.radius


class Balls(ClosedSet):
    """Union of closed (filled) balls."""

    kind = "union_of_balls"

    def __init__(self, centers, radii):
        self.centers = as_points(centers)
        self.radii = np.asarray(radii, dtype=float).ravel()
        if len(self.centers) == 0:
            raise ModelError("no balls given")
        if len(self.radii) != len(self.centers):
            raise ModelError("one radius per centre is required")
        if np.any(self.radii < 0):
            raise ModelError("radii must be nonnegative")
        self.dim = self.centers.shape[1]

    @property
    def n_primitives(self) -> int:
        return len(self.centers)

    def nearest_primitives(self, X, q=None):
        X = as_points(X)
        V = X[:, None, :] - self.centers[None]
        r = np.linalg.norm(V, axis=2)
        inside = r <= self.radii
        safe = np.where(r > 0, r, 1.0)[..., None]
        Y = self.centers[None] + self.radii[None, :, None] * V / safe
        Y = np.where(inside[..., None], X[:, None, :], Y)
        D = np.maximum(r - self.radii, 0.0)
        ids = np.broadcast_to(np.arange(len(self.centers)), D.shape)
        return ids, Y, D

    def _primitive_distances_flat(self, ids, X):
        return np.maximum(np.linalg.norm(X - self.centers[ids], axis=1) - self.radii[ids], 0.0)

    def _primitive_nearest_flat(self, ids, X):
        V = X - self.centers[ids]
        r = np.linalg.norm(V, axis=1)
        inside = r <= self.radii[ids]
        safe = np.where(r > 0, r, 1.0)[:, None]
        Y = self.centers[ids] + self.radii[ids, None] * V / safe
        return np.where(inside[:, None], X, Y)

    def bounds(self):
        return (self.centers - self.radii[:, None]).min(axis=0), (self.centers + self.radii[:, None]).max(axis=0)

    def char_radius(self):
        return float(self.radii.max())


class SampledImplicit(PointCloud):
    """Zero set of ``func`` sampled on a regular grid, treated as E itself.

    The stored points are the linear-interpolation crossings of grid edges,
    so the distance is to this finite set, an outer approximation of the
    ideal level set.
    """

    kind = "sampled_implicit"

    def __init__(self, func, lo, hi, resolution: int = 64):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        axes = [np.linspace(a, b, resolution + 1) for a, b in zip(lo, hi)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = np.asarray(func(mesh.reshape(-1, lo.size)), dtype=float).reshape(mesh.shape[:-1])
        crossings = []
        for ax in range(lo.size):
            a = [slice(None)] * lo.size
            b = [slice(None)] * lo.size
            a[ax] = slice(0, -1)
            b[ax] = slice(1, None)
            f0, f1 = vals[tuple(a)], vals[tuple(b)]
            hit = (f0 == 0) | (np.sign(f0) * np.sign(f1) < 0)
            with np.errstate(invalid="ignore", divide="ignore"):
                s = np.where(f0 == f1, 0.0, f0 / (f0 - f1))
            p0, p1 = mesh[tuple(a)], mesh[tuple(b)]
            crossings.append((p0 + s[..., None] * (p1 - p0))[hit])
        pts = np.unique(np.vstack(crossings), axis=0)
        if len(pts) == 0:
            raise ModelError("implicit function has no sampled zero crossing")
        super().__init__(pts)


class Union(ClosedSet):
    """Union of models; distance is the minimum over members."""

    kind = "union"

    def __init__(self, members):
        self.members = list(members)
        if not self.members:
            raise ModelError("empty union")
        dims = {m.dim for m in self.members}
        if len(dims) != 1:
            raise ModelError(f"union members disagree on dimension: {sorted(dims)}")
        self.dim = dims.pop()
        self.offsets = np.cumsum([0] + [m.n_primitives for m in self.members])

    @property
    def n_primitives(self) -> int:
        return int(self.offsets[-1])

    def nearest_primitives(self, X, q=None):
        X = as_points(X)
        parts = [m.nearest_primitives(X, q) for m in self.members]
        ids = np.concatenate([p[0] + off for p, off in zip(parts, self.offsets)], axis=1)
        Y = np.concatenate([p[1] for p in parts], axis=1)
        D = np.concatenate([p[2] for p in parts], axis=1)
        return ids, Y, D

    def distances(self, X):
        return np.min([m.distances(X) for m in self.members], axis=0)

    def _primitive_distances_flat(self, ids, X):
        out = np.empty(len(ids))
        for m, lo, hi in zip(self.members, self.offsets[:-1], self.offsets[1:]):
            sel = (ids >= lo) & (ids < hi)
            if np.any(sel):
                out[sel] = m._primitive_distances_flat(ids[sel] - lo, X[sel])
        return out

    def _primitive_nearest_flat(self, ids, X):
        out = np.empty(X.shape)
        for m, lo, hi in zip(self.members, self.offsets[:-1], self.offsets[1:]):
            sel = (ids >= lo) & (ids < hi)
            if np.any(sel):
                out[sel] = m._primitive_nearest_flat(ids[sel] - lo, X[sel])
        return out

    def near_arrays(self, X, tau, q=None):
        X = as_points(X)
        tau = np.broadcast_to(np.asarray(tau, dtype=float), (len(X),))
        dm = np.array([m.distances(X) for m in self.members])
        d = dm.min(axis=0)
        parts = []
        for m, off, dj in zip(self.members, self.offsets, dm):
            ids, Y, D, near, _ = m.near_arrays(X, np.maximum(tau + d - dj, 0.0), q)
            near &= (dj <= d + tau + _slack_eps(X, d))[:, None]
            parts.append((ids + off, Y, D, near))
        ids, Y, D, near = (np.concatenate(p, axis=1) for p in zip(*parts))
        return ids, Y, D, near, d

    def near_set(self, x, tau: float = 0.0) -> NearSet:
        x = np.asarray(x, dtype=float)
        d = self.distance(x)
        if d == 0.0:
            return NearSet(x[None, :].copy(), 0.0, tau, np.array([-1]))
        pts, hds, dist = [], [], []
        for m, off in zip(self.members, self.offsets):
            if m.distance(x) <= d + tau + _slack_eps(x, d):
                ns = m.near_set(x, tau + d - m.distance(x))
                pts.append(ns.points)
                hds.append(ns.handles + off)
                dist.append(np.linalg.norm(ns.points - x, axis=1))
        P, H, D = np.vstack(pts), np.concatenate(hds), np.concatenate(dist)
        keep = D <= d + tau + _slack_eps(x, d)
        order = np.argsort(D[keep], kind="stable")
        P, H = _dedupe(P[keep][order], H[keep][order], _slack_eps(x, d))
        return NearSet(P, d, tau, H)

    def bounds(self):
        los, his = zip(*(m.bounds() for m in self.members))
        return np.min(los, axis=0), np.max(his, axis=0)

    def char_radius(self):
        return max(m.char_radius() for m in self.members)
