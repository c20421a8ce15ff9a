"""Sampling of the k-medial axis.

Pipeline: sample the bounding box, keep points with at least k distinct
near-nearest points under a detection slack, refine each candidate onto the
locus where k tracked primitives are all nearest, re-classify under a tight
slack, and finally group the survivors into charts M(a, d, eps, delta).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from medax.configuration import Configuration, config_distance
from medax.geometry import DEFAULT_SIGMA_TOL, DirectionSet, affine_rank, is_generic
from medax.parallel import ordered_map
from medax.shapes import CHUNK, ClosedSet

EXACT_SUBSET_MAX = 12
MAX_HALVINGS = 64
TANGENCY_RATIO = 1e-3
COARSE_FLOOR = 1e-3
# Samples closer than this fraction of the box diameter are one point.
MERGE_RATIO = 1e-6


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class Sampler:
    """Regular grid of cell centres (``grid`` per axis) or seeded uniform draws."""

    lo: np.ndarray
    hi: np.ndarray
    grid: int | None = None
    random: int | None = None
    seed: int = 0

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ExtractionError("empty bounding box")
        if not (self.grid or self.random):
            raise ExtractionError("sampler needs a grid resolution or a random sample count")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def spacing(self) -> float:
        side = float(np.max(self.hi - self.lo))
        if self.grid:
            return side / self.grid
        return side * self.random ** (-1.0 / self.dim)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def points(self) -> np.ndarray:
        if self.grid:
            axes = [lo + (np.arange(self.grid) + 0.5) * (hi - lo) / self.grid
                    for lo, hi in zip(self.lo, self.hi)]
            mesh = np.meshgrid(*axes, indexing="ij")
            return np.stack([m.ravel() for m in mesh], axis=1)
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.lo, self.hi, size=(self.random, self.dim))


@dataclass
class MedialSample:
    x: np.ndarray
    d: float
    B: DirectionSet
    k_max: int
    chart_config: Configuration | None
    residual: float = 0.0
    handles: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    chart_id: int = -1


@dataclass(frozen=True)
class ChartKey:
    a: Configuration
    d: float
    eps: float
    delta: float

    def __post_init__(self):
        if not (self.eps > 0 and self.delta > 0 and self.d > 0):
            raise ExtractionError("chart key needs positive d, eps and delta")


class RefineResult(NamedTuple):
    x: np.ndarray
    residual: float
    refined: bool


# -- classification -----------------------------------------------------------

def _unique_directions(vectors: np.ndarray, handles: np.ndarray, tol: float):
    dirs = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
    if len(dirs) < 2:
        return dirs, handles
    close = np.linalg.norm(dirs[:, None, :] - dirs[None, :, :], axis=2) <= tol
    keep: list[int] = []
    for i in range(len(dirs)):
        if not close[i, keep].any():
            keep.append(i)
    return dirs[keep], handles[keep]


def _lex_order(dirs: np.ndarray) -> np.ndarray:
    return np.lexsort(dirs.T[::-1])


def generic_subset(dirs: np.ndarray, k: int, sigma_tol: float = DEFAULT_SIGMA_TOL):
    """Indices of the lexicographically first generic k-subset, or None.

    Exhaustive over combinations when there are at most 12 directions,
    greedy (add a direction whenever it raises the affine rank) beyond.
    """
    if k > len(dirs):
        return None
    order = _lex_order(dirs)
    if len(dirs) <= EXACT_SUBSET_MAX:
        for combo in itertools.combinations(order, k):
            if is_generic(dirs[list(combo)], sigma_tol):
                return list(combo)
        return None
    chosen: list[int] = []
    for i in order:
        trial = chosen + [int(i)]
        if affine_rank(dirs[trial], sigma_tol) == len(trial) - 1:
            chosen = trial
            if len(chosen) == k:
                return chosen
    return None


def classify_point(model: ClosedSet, x, tau: float, sigma_tol: float = DEFAULT_SIGMA_TOL,
                   k: int | None = None) -> MedialSample:
    """Nearest-direction set B(x), its largest generic size k_max, and a chart.

    The chart configuration has ``k`` directions when ``k`` is given (None if
    k exceeds k_max), otherwise k_max directions.
    """
    x = np.asarray(x, dtype=float)
    ns = model.near_set(x, tau)
    if ns.d <= 0.0:
        raise ExtractionError("x lies in E: the direction set is undefined")
    dirs, handles = _unique_directions(ns.points - x, ns.handles, sigma_tol)
    k_max = min(affine_rank(dirs, sigma_tol) + 1, x.size + 1)
    idx = generic_subset(dirs, k_max, sigma_tol)
    while k_max > 1 and idx is None:
        k_max -= 1
        idx = generic_subset(dirs, k_max, sigma_tol)
    size = k_max if k is None else k
    config = None
    if 2 <= size <= k_max:
        if size != k_max:
            idx = generic_subset(dirs, size, sigma_tol)
        config = Configuration(dirs[idx], sigma_tol)
    return MedialSample(x, ns.d, DirectionSet(dirs, 1e-6), k_max, config, 0.0, handles)


def tracked_handles(sample: MedialSample, k: int, sigma_tol: float = DEFAULT_SIGMA_TOL):
    """Primitives behind k well-spread generic directions of B(x), or None.

    Starts from the nearest direction and repeatedly adds the direction
    farthest from the affine hull of those chosen. Spread-out tracked points
    give the refinement a wide valley to descend.
    """
    dirs = sample.B.dirs
    if len(dirs) < k:
        return None
    chosen = [0]
    while len(chosen) < k:
        base = dirs[chosen]
        span = base[1:] - base[0]
        rel = dirs - base[0]
        if len(span):
            q, _ = np.linalg.qr(span.T)
            rel = rel - (rel @ q) @ q.T
        gap = np.linalg.norm(rel, axis=1)
        gap[chosen] = -1.0
        j = int(np.argmax(gap))
        if gap[j] <= sigma_tol:
            return None
        chosen.append(j)
    if not is_generic(dirs[chosen], sigma_tol):
        return None
    return sample.handles[chosen]


def tracked_handles_batch(X, ids, Y, D, near, k: int, sigma_tol: float = DEFAULT_SIGMA_TOL,
                          nearest_first: bool = False):
    """Vectorised ``tracked_handles`` over many points at once.

    Inputs are the arrays of ``ClosedSet.near_arrays``. Returns ``(handles,
    ok)`` with handles of shape (m, k); rows with ``ok`` False have fewer
    than k well-spread near directions. With ``nearest_first`` each step
    takes the nearest primitive that raises the affine rank instead of the
    most distant direction.
    """
    X = np.asarray(X, dtype=float)
    m, p, n = Y.shape
    V = Y - X[:, None, :]
    r = np.linalg.norm(V, axis=2)
    U = V / np.where(r > 0, r, 1.0)[..., None]
    first = np.argmin(np.where(near, D, np.inf), axis=1)
    rows = np.arange(m)
    # Far primitives are replaced by the nearest direction: zero spread, never chosen.
    U = np.where(near[..., None], U, U[rows, first][:, None, :])
    rel = U - U[rows, first][:, None, :]
    chosen = [first]
    basis = np.zeros((m, n, 0))
    ok = np.ones(m, dtype=bool)
    for _ in range(k - 1):
        res = rel - np.einsum("mpj,mnj->mpn", np.einsum("mpn,mnj->mpj", rel, basis), basis)
        gap = np.linalg.norm(res, axis=2)
        gap[rows[:, None], np.stack(chosen, axis=1)] = -1.0
        if nearest_first:
            j = np.argmin(np.where(gap > sigma_tol, D, np.inf), axis=1)
        else:
            j = np.argmax(gap, axis=1)
        g = gap[rows, j]
        ok &= g > sigma_tol
        chosen.append(j)
        new = res[rows, j] / np.where(g > 0, g, 1.0)[:, None]
        basis = np.concatenate([basis, new[..., None]], axis=2)
    sel = np.stack(chosen, axis=1)
    pts = U[rows[:, None], sel]
    sv = np.linalg.svd(pts - pts.mean(axis=1, keepdims=True), compute_uv=False)
    if k > 1:
        ok &= sv[:, k - 2] > sigma_tol * np.maximum(sv[:, 0], np.finfo(float).tiny)
    return ids[rows[:, None], sel], ok


def matches_chart(sample: MedialSample, key: ChartKey) -> bool:
    """|d(x) - d| < delta and some generic k-subset of B(x) is eps-close to a."""
    if abs(sample.d - key.d) >= key.delta:
        return False
    k = key.a.k
    dirs = sample.B.dirs
    if len(dirs) < k:
        return False
    close = np.linalg.norm(dirs[:, None, :] - key.a.dirs[None, :, :], axis=2) < key.eps
    if not np.all(close.any(axis=0)):
        return False
    if len(dirs) <= EXACT_SUBSET_MAX:
        candidates = itertools.combinations(range(len(dirs)), k)
    else:
        candidates = [np.argmin(np.linalg.norm(dirs[:, None, :] - key.a.dirs[None], axis=2), axis=0)]
    for combo in candidates:
        combo = list(combo)
        if len(set(combo)) < k or not np.all(close[combo].any(axis=1)):
            continue
        sub = dirs[combo]
        if not is_generic(sub, key.a.sigma_tol):
            continue
        if config_distance(Configuration(sub, key.a.sigma_tol), key.a) < key.eps:
            return True
    return False


# -- refinement ---------------------------------------------------------------

def _search_directions(n: int) -> np.ndarray:
    dirs = [e for e in np.eye(n)]
    if n <= 4:
        for i, j in itertools.combinations(range(n), 2):
            for s in (1.0, -1.0):
                v = np.zeros(n)
                v[i], v[j] = 1.0, s
                dirs.append(v / np.sqrt(2.0))
    dirs = np.array(dirs)
    return np.vstack([dirs, -dirs])


def excess(model: ClosedSet, ids: np.ndarray, X: np.ndarray) -> np.ndarray:
    """max_i dist(x, tracked primitive i) - d(x): zero iff all tracked primitives are nearest."""
    return model.primitive_distances(ids, X).max(axis=1) - model.distances(X)


def refine_batch(model: ClosedSet, X0, ids, step: float, max_halvings: int = MAX_HALVINGS,
                 step_floor: float = 0.0, max_shift: float | None = None, max_sweeps: int = 2000):
    """Pattern search on the excess for many start points at once.

    Each sweep tries every search direction at the current step and moves to
    the best strict improvement (then doubles the step, never above the
    initial one), otherwise halves the step. Moves may not
    carry a point farther than ``max_shift`` (default 4 * step) from its
    start, which stops the slow slide along directions where the excess
    merely decays (far out along a bisector). A start point stops once
    its step has been halved ``max_halvings`` times below the initial one,
    once the step is below ``step_floor``, or after ``max_sweeps`` sweeps.
    Returns (X, residual, moved).
    """
    X0 = np.asarray(X0, dtype=float)
    X = X0.copy()
    ids = np.asarray(ids, dtype=int)
    m, n = X.shape
    shift = 4.0 * step if max_shift is None else max_shift
    dirs = _search_directions(n)
    f = excess(model, ids, X)
    f0 = f.copy()
    steps = np.full(m, float(step))
    level = np.zeros(m, dtype=int)
    active = np.ones(m, dtype=bool)
    for _ in range(max_sweeps):
        active &= (level < max_halvings) & (steps > step_floor) & (f > 0)
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        trial = X[idx, None, :] + steps[idx, None, None] * dirs[None]
        ft = excess(model, np.repeat(ids[idx], len(dirs), axis=0), trial.reshape(-1, n)).reshape(idx.size, len(dirs))
        ft[np.linalg.norm(trial - X0[idx, None, :], axis=2) > shift] = np.inf
        j = np.argmin(ft, axis=1)
        best = ft[np.arange(idx.size), j]
        better = best < f[idx]
        mv = idx[better]
        X[mv] = trial[better, j[better]]
        f[mv] = best[better]
        grow = mv[level[mv] > 0]
        steps[grow] *= 2.0
        level[grow] -= 1
        stay = idx[~better]
        steps[stay] *= 0.5
        level[stay] += 1
    return X, f, f < f0


def newton_polish(model: ClosedSet, X, ids, f, iters: int = 8, X0=None, max_shift: float = np.inf):
    """Gauss-Newton on the equal-distance equations of the tracked primitives.

    Solves dist_i(x) = dist_1(x) (i > 1) by minimum-norm linearised steps,
    keeping a step only when it lowers the excess. Converges quickly near a
    solution where pattern search only creeps. Returns (X, residual).
    """
    X = np.array(X, dtype=float)
    f = np.array(f, dtype=float)
    ids = np.asarray(ids, dtype=int)
    X0 = X.copy() if X0 is None else np.asarray(X0, dtype=float)
    if ids.shape[1] < 2:
        return X, f
    active = f > 0
    for _ in range(iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        V = X[idx, None, :] - model.primitive_nearest(ids[idx], X[idx])
        r = np.linalg.norm(V, axis=2)
        U = V / np.where(r > 0, r, 1.0)[..., None]
        J = U[:, 1:] - U[:, :1]
        g = r[:, 1:] - r[:, :1]
        step = -np.einsum("mnk,mk->mn", np.linalg.pinv(J, rcond=1e-10), g)
        trial = X[idx] + step
        ft = excess(model, ids[idx], trial)
        better = (ft < f[idx]) & (np.linalg.norm(trial - X0[idx], axis=1) <= max_shift)
        X[idx[better]] = trial[better]
        f[idx[better]] = ft[better]
        active[idx[~better]] = False
        active &= f > 0
    return X, f


def refine_sample(model: ClosedSet, x0, k: int, tau: float, sigma_tol: float = DEFAULT_SIGMA_TOL,
                  step: float | None = None) -> RefineResult:
    """Move x0 onto the set where its k tracked near-nearest primitives are all nearest.

    Runs the same stages as ``extract_mk`` with initial step ``step``
    (default tau / 2). Returns x0 flagged unrefined when fewer than k generic
    near-nearest points exist or the excess does not decrease.
    """
    x0 = np.asarray(x0, dtype=float)
    try:
        sample = classify_point(model, x0, tau, sigma_tol)
    except ExtractionError:
        return RefineResult(x0, float("inf"), False)
    ids = tracked_handles(sample, k, sigma_tol)
    if ids is None:
        return RefineResult(x0, float("inf"), False)
    h = step if step else max(tau / 2.0, 1e-12)
    f0 = float(excess(model, ids[None, :], x0[None, :])[0])
    scale = max(1.0, float(np.max(np.abs(x0))), sample.d)
    X, f = _refine_stages(model, x0[None, :], ids[None, :], h, 0.0, scale, 4.0 * h)
    if not f[0] < f0:
        return RefineResult(x0, f0, False)
    return RefineResult(X[0], float(f[0]), True)


# -- extraction ---------------------------------------------------------------

def extract_mk(model: ClosedSet, sampler: Sampler, k: int, tau: float | None = None,
               sigma_tol: float = DEFAULT_SIGMA_TOL, threads: int | None = None,
               accept_tol: float | None = None) -> list[MedialSample]:
    """Refined samples of M_k, ordered by the index of their seed point.

    ``tau`` is the detection slack (default twice the sampler spacing). A
    refined point is kept when its excess is below ``accept_tol`` (default
    1e-8 of the box diameter), it lies within one spacing of the box, and a
    re-classification with slack of twice the excess still finds k generic
    nearest directions. A point is also dropped when its excess is not small
    against d * theta^2 (theta the smallest angle between chart directions):
    two near-nearest points that merely touch tangentially leave a residual
    of about d * theta^2 / 2, a true equidistant point none.
    """
    n = model.dim
    if sampler.dim != n:
        raise ExtractionError("sampler and model dimensions differ")
    if not 2 <= k <= n + 1:
        raise ExtractionError(f"k must lie in [2, {n + 1}]")
    h = sampler.spacing
    scale = sampler.diameter
    tau_detect = 2.0 * h if tau is None else tau
    accept = 1e-8 * scale if accept_tol is None else accept_tol

    X = sampler.points()
    cand = X[model.candidate_mask(X, tau_detect, k, sigma_tol)]
    q = n + 4

    def track(C, nearest_first):
        out = []
        for s in range(0, len(C), CHUNK):
            ids, Y, D, near, d = model.near_arrays(C[s:s + CHUNK], tau_detect, q)
            handles, ok = tracked_handles_batch(C[s:s + CHUNK], ids, Y, D, near, k, sigma_tol,
                                                nearest_first)
            out.append((handles, ok & (d > 0)))
        return np.vstack([o[0] for o in out]), np.concatenate([o[1] for o in out])

    if len(cand) == 0:
        return []
    tracked, ok = track(cand, False)
    seeds, tracked = cand[ok], tracked[ok]
    if len(seeds) == 0:
        return []
    shift = 4.0 * h
    Xr, resid = _refine_stages(model, seeds, tracked, h, accept, scale, shift)
    # A seed whose spread-out choice includes a primitive that is not nearest
    # at the solution gets a second try with the nearest generic choice.
    retry = np.flatnonzero(resid > accept)
    if retry.size:
        alt, ok = track(seeds[retry], True)
        redo = ok & np.any(alt != tracked[retry], axis=1)
        retry = retry[redo]
        if retry.size:
            Xa, ra = _refine_stages(model, seeds[retry], alt[redo], h, accept, scale, shift)
            better = ra < resid[retry]
            Xr[retry[better]] = Xa[better]
            resid[retry[better]] = ra[better]

    lo, hi = sampler.lo - h, sampler.hi + h
    good = (resid <= accept) & np.all(Xr >= lo, axis=1) & np.all(Xr <= hi, axis=1)
    keep = np.flatnonzero(good)
    if keep.size:
        tight = 2.0 * resid[keep] + 1e-10 * scale
        ids, Y, D, near, d = model.near_arrays(Xr[keep], tight, q)
        _, ok = tracked_handles_batch(Xr[keep], ids, Y, D, near, k, sigma_tol)
        keep = keep[ok & (d > 1e-9 * scale)]

    def verify(i):
        x, r = Xr[i], float(resid[i])
        try:
            s = classify_point(model, x, 2.0 * r + 1e-10 * scale, sigma_tol, k=k)
        except ExtractionError:
            return None
        if s.k_max < k or s.chart_config is None or s.d <= 1e-9 * scale:
            return None
        if r > TANGENCY_RATIO * s.d * _min_separation(s.chart_config.dirs) ** 2:
            return None
        s.residual = r
        return s

    return [s for s in ordered_map(verify, keep, threads) if s is not None]


def _refine_stages(model, seeds, tracked, h, accept, scale, shift):
    """Gauss-Newton projection from the seeds; for seeds it cannot finish,
    coarse pattern search, another polish, then a fine pattern search.

    The projection comes first because it moves a seed straight across the
    equidistant set. Pattern search on the excess alone tends to slide along
    the set toward where the excess grows slowest, which leaves gaps. Seeds
    whose excess stays large are blocked by another primitive and are left
    as they are.
    """
    f0 = excess(model, tracked, seeds)
    Xr, resid = newton_polish(model, seeds, tracked, f0, X0=seeds, max_shift=shift)
    todo = np.flatnonzero(resid > accept)
    if todo.size == 0:
        return Xr, resid
    coarse = COARSE_FLOOR * h
    S, T = seeds[todo], tracked[todo]
    Xp, rp, _ = refine_batch(model, S, T, h, step_floor=coarse, max_shift=shift)
    Xp, rp = newton_polish(model, Xp, T, rp, X0=S, max_shift=shift)
    rest = np.flatnonzero((rp > accept) & (rp <= 10 * coarse))
    if rest.size:
        Xf, rf, _ = refine_batch(model, Xp[rest], T[rest], coarse,
                                 step_floor=1e-15 * scale, max_shift=shift)
        better = rf < rp[rest]
        Xp[rest[better]] = Xf[better]
        rp[rest[better]] = rf[better]
    better = rp < resid[todo]
    Xr[todo[better]] = Xp[better]
    resid[todo[better]] = rp[better]
    return Xr, resid


def _min_separation(dirs: np.ndarray) -> float:
    i, j = np.triu_indices(len(dirs), 1)
    return float(np.min(np.linalg.norm(dirs[i] - dirs[j], axis=1)))


def assign_charts(samples: list[MedialSample], make_key) -> list[ChartKey]:
    """Greedy countable cover: each sample joins the first chart it matches,
    otherwise opens a new chart keyed on its own (a(x), d(x)).

    ``make_key(a, d)`` returns the ChartKey used for a new chart.
    """
    keys: list[ChartKey] = []
    d_arr = np.zeros(0)
    delta_arr = np.zeros(0)
    for s in samples:
        hit = -1
        for j in np.flatnonzero(np.abs(d_arr - s.d) < delta_arr):
            if keys[j].a.k == s.chart_config.k and matches_chart(s, keys[j]):
                hit = int(j)
                break
        if hit < 0:
            keys.append(make_key(s.chart_config, s.d))
            d_arr = np.append(d_arr, keys[-1].d)
            delta_arr = np.append(delta_arr, keys[-1].delta)
            hit = len(keys) - 1
        s.chart_id = hit
    return keys
