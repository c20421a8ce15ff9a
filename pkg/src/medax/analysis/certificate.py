"""Chart certificates: the (eps, delta, t, r) schedule under which a chart
M(a, d, eps, delta) avoids translated cones around P, the audit that checks
it on samples, and the Lipschitz-graph fit over Q that it implies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from medax.configuration import Configuration, Frame, build_frame, separation_constant
from medax.extractor import ChartKey, MedialSample
from medax.geometry import GeometryError

CONE_R = 0.25
SAME_POINT_RATIO = 1e-6


@dataclass(frozen=True, eq=False)
class Certificate:
    a: Configuration
    d: float
    c: float
    eps: float
    delta: float
    t: float
    r: float

    @cached_property
    def frame(self) -> Frame:
        return build_frame(self.a)

    @property
    def lipschitz_bound(self) -> float:
        return float(np.sqrt(1.0 - self.r ** 2) / self.r)

    def as_dict(self, violations=()) -> dict:
        return {
            "a": self.a.dirs.tolist(),
            "d": self.d,
            "c": self.c,
            "eps": self.eps,
            "delta": self.delta,
            "t": self.t,
            "r": self.r,
            "violations": [{"i": int(i), "j": int(j)} for i, j in violations],
        }


def make_certificate(a: Configuration, d: float) -> Certificate:
    """eps = c/4, delta = min(d/2, c d/8), t = c d/16, r = 1/4.

    With these, moving by v in the cone (|v| < t) from a chart point changes
    the cosine gap of the two extreme directions by at most 2 eps <= c/2, and
    c d(x) |v| - 4 |v|^2 >= (c d / 2) |v| once d(x) >= d/2, so x + v sees no
    nearest direction within eps of the minimising a_i.
    """
    if not d > 0:
        raise GeometryError("chart distance d must be positive")
    c = separation_constant(a)
    return Certificate(a, float(d), c, c / 4.0, min(d / 2.0, c * d / 8.0), c * d / 16.0, CONE_R)


def chart_key(a: Configuration, d: float) -> ChartKey:
    cert = make_certificate(a, d)
    return ChartKey(a, cert.d, cert.eps, cert.delta)


def _positions(samples) -> np.ndarray:
    if len(samples) and isinstance(samples[0], MedialSample):
        return np.array([s.x for s in samples])
    X = np.asarray(samples, dtype=float)
    return X.reshape(len(X), -1) if len(X) else np.zeros((0, 1))


def _close_pairs(X: np.ndarray, radius: float):
    if len(X) < 2:
        return np.zeros((0, 2), dtype=int)
    pairs = cKDTree(X).query_pairs(radius, output_type="ndarray")
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))] if len(pairs) else pairs


def cone_avoidance_audit(samples, cert: Certificate, merge_tol: float | None = None) -> list[tuple[int, int]]:
    """Ordered pairs (i, j) with merge_tol < |x_j - x_i| < t and x_j - x_i in the cone.

    The cone is symmetric, so violations come in both orders. Pairs closer
    than ``merge_tol`` (default 1e-6 t) are treated as one point: seeds that
    refine to the same point differ by rounding noise with no direction.
    """
    X = _positions(samples)
    if merge_tol is None:
        merge_tol = SAME_POINT_RATIO * cert.t
    pairs = _close_pairs(X, cert.t)
    if len(pairs) == 0:
        return []
    V = X[pairs[:, 1]] - X[pairs[:, 0]]
    lengths = np.linalg.norm(V, axis=1)
    ok = (lengths > merge_tol) & (lengths < cert.t)
    off_plane = np.linalg.norm(cert.frame.coords_Q(V), axis=1)
    hit = ok & (off_plane < cert.r * lengths)
    out = []
    for i, j in pairs[hit]:
        out.extend([(int(i), int(j)), (int(j), int(i))])
    return sorted(out)


@dataclass
class LipschitzFit:
    L: float
    witness: tuple[int, int] | None
    bound: float
    injectivity_violations: list[tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.L <= self.bound and not self.injectivity_violations


def lipschitz_graph_fit(samples, frame: Frame, r: float = CONE_R, t: float = np.inf,
                        merge_tol: float | None = None) -> LipschitzFit:
    """Largest |pi_P(dx)| / |pi_Q(dx)| over sample pairs closer than t.

    The chart is then a graph over Q with that Lipschitz constant; a pair with
    (numerically) equal Q-projections but distinct P-projections is recorded
    as an injectivity violation instead of dividing by zero. Pairs closer
    than ``merge_tol`` (default 1e-6 t, 0 for unbounded t) are skipped.
    """
    X = _positions(samples)
    if merge_tol is None:
        merge_tol = SAME_POINT_RATIO * t if np.isfinite(t) else 0.0
    bound = float(np.sqrt(1.0 - r ** 2) / r)
    radius = t if np.isfinite(t) else np.inf
    if len(X) < 2:
        return LipschitzFit(0.0, None, bound)
    if np.isfinite(radius):
        pairs = _close_pairs(X, radius)
    else:
        pairs = np.array(np.triu_indices(len(X), 1)).T
    if len(pairs) == 0:
        return LipschitzFit(0.0, None, bound)
    V = X[pairs[:, 1]] - X[pairs[:, 0]]
    keep = (np.linalg.norm(V, axis=1) > merge_tol) & (np.linalg.norm(V, axis=1) < radius)
    pairs, V = pairs[keep], V[keep]
    if len(pairs) == 0:
        return LipschitzFit(0.0, None, bound)
    along_P = np.linalg.norm(frame.coords_P(V), axis=1)
    along_Q = np.linalg.norm(frame.coords_Q(V), axis=1)
    flat = along_Q < 1e-12
    bad = flat & (along_P > 1e-9)
    violations = [(int(i), int(j)) for i, j in pairs[bad]]
    ratio = np.where(flat, 0.0, along_P / np.where(flat, 1.0, along_Q))
    w = int(np.argmax(ratio))
    L = float(ratio[w])
    witness = (int(pairs[w, 0]), int(pairs[w, 1])) if L > 0 else None
    return LipschitzFit(L, witness, bound, violations)
