"""Acceptance criteria 1-11, one PASS/FAIL line each (repeated in the run summary)."""

import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from conftest import ACCEPTANCE, equilateral, random_configuration
from medax import cli, shapes
from medax.analysis import (
    chart_key,
    cone_avoidance_audit,
    equidistance_system,
    lipschitz_graph_fit,
    make_certificate,
    set_dimension,
    stratification_report,
    voronoi_mk_oracle,
)
from medax.configuration import Configuration, build_frame, in_cone, separation_check, separation_constant
from medax.extractor import MERGE_RATIO, Sampler, assign_charts, extract_mk
from medax.geometry import is_generic, merge_points
from medax.scene import bundled_scenes, default_bbox, load_scene

SCENES = bundled_scenes()
SQRT15 = np.sqrt(15.0)


def verdict(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


def distinct(points, diameter):
    points = np.asarray(points).reshape(-1, 2)
    return points[merge_points(points, MERGE_RATIO * diameter)[0]] if len(points) else points


@pytest.fixture(scope="module")
def random_clouds():
    """Ten clouds of 10-20 points in the unit square, extracted at k = 2 and 3 on a 256 grid."""
    rng = np.random.default_rng(2024)
    out = []
    for _ in range(10):
        E = rng.uniform(0, 1, (int(rng.integers(10, 21)), 2))
        model = shapes.PointCloud(E)
        sampler = Sampler(*default_bbox(model), grid=256)
        start = time.perf_counter()
        m2 = extract_mk(model, sampler, 2)
        elapsed = time.perf_counter() - start
        m3 = extract_mk(model, sampler, 3)
        out.append({"E": E, "sampler": sampler, "m2": m2, "m3": m3, "seconds": elapsed})
    return out


@pytest.fixture(scope="module")
def bundled_charts():
    """Every bundled scene at every level k, with its chart cover."""
    out = []
    for name, path in sorted(SCENES.items()):
        scene = load_scene(path)
        sampler = cli.scene_sampler(scene)
        for k in range(2, scene.model.dim + 2):
            samples = extract_mk(scene.model, sampler, k)
            keys = assign_charts(samples, chart_key)
            X = np.array([s.x for s in samples]).reshape(len(samples), scene.model.dim)
            out.append((name, k, samples, keys, X))
    return out


def test_criterion_01_oracle_equivalence(random_clouds):
    worst_dist, worst_cov, slowest = 0.0, 1.0, 0.0
    for c in random_clouds:
        h = c["sampler"].spacing
        X = np.array([s.x for s in c["m2"]])
        O = voronoi_mk_oracle(c["E"], 2, (c["sampler"].lo, c["sampler"].hi), h / 4)
        to_oracle = cKDTree(O).query(X)[0].max() / h
        coverage = float(np.mean(cKDTree(X).query(O)[0] <= 2 * h))
        worst_dist = max(worst_dist, to_oracle)
        worst_cov = min(worst_cov, coverage)
        slowest = max(slowest, c["seconds"])
    ok = worst_dist <= 2.0 and worst_cov >= 0.95 and slowest < 30.0
    verdict(1, ok, f"max distance to oracle {worst_dist:.3f} cells, min coverage {worst_cov:.4f}, "
                   f"slowest scene {slowest:.1f} s")


def test_criterion_02_dimension_bound(random_clouds):
    dims2 = [set_dimension([s.x for s in c["m2"]], c["sampler"].spacing, c["sampler"].diameter).value
             for c in random_clouds]
    dims3 = [set_dimension(np.array([s.x for s in c["m3"]]).reshape(-1, 2), c["sampler"].spacing,
                           c["sampler"].diameter).value for c in random_clouds]
    scene = load_scene(SCENES["cloud_3d"])
    assert len(scene.model.points) == 12
    sampler = cli.scene_sampler(scene, random=200_000, seed=7)
    X = np.array([s.x for s in extract_mk(scene.model, sampler, 2)])
    dim3d = set_dimension(X, sampler.spacing, sampler.diameter).value
    ok = all(0.8 <= v <= 1.25 for v in dims2) and dim3d <= 2.25 and max(dims3) <= 0.1
    verdict(2, ok, f"2D M_2 in [{min(dims2):.3f}, {max(dims2):.3f}], 3D M_2 {dim3d:.3f}, "
                   f"2D M_3 max {max(dims3):.3f}")


def _analytic_m3():
    return {
        "circle": np.array([[0.0, 0.0]]),
        "rectangle_outline": np.array([[0.5, 0.5], [1.5, 0.5]]),
        "two_balls": np.zeros((0, 2)),
        "disk": np.zeros((0, 2)),
        "convex_polygon": np.zeros((0, 2)),
    }


def test_criterion_03_countable_m3(random_clouds):
    cases = []
    for c in random_clouds:
        lo, hi = c["sampler"].lo, c["sampler"].hi
        cases.append(("random", c["E"], c["m3"], voronoi_mk_oracle(c["E"], 3, (lo, hi), 1.0), c["sampler"]))
    analytic = _analytic_m3()
    for name, path in sorted(SCENES.items()):
        scene = load_scene(path)
        if scene.model.dim != 2:
            continue
        sampler = cli.scene_sampler(scene)
        if isinstance(scene.model, shapes.PointCloud):
            E = scene.model.points
            oracle = voronoi_mk_oracle(E, 3, scene.bbox, 1.0)
        else:
            E, oracle = None, analytic[name]
        cases.append((name, E, extract_mk(scene.model, sampler, 3), oracle, sampler))
    worst, bound_ok, missed = 0.0, True, 0
    for name, E, samples, oracle, sampler in cases:
        pts = distinct([s.x for s in samples], sampler.diameter)
        if E is not None:
            bound_ok &= len(pts) <= len(E) ** 3
        if len(pts):
            if len(oracle) == 0:
                worst = np.inf
                continue
            worst = max(worst, float(cKDTree(oracle).query(pts)[0].max()))
        if len(oracle):
            missed += int(np.sum(cKDTree(pts).query(oracle)[0] > 1e-4)) if len(pts) else len(oracle)
    ok = bound_ok and worst <= 1e-4
    verdict(3, ok, f"{len(cases)} planar scenes, max distance to oracle vertex {worst:.2e}, "
                   f"oracle vertices not found {missed}")


def test_criterion_04_convex_sets_have_empty_m2():
    counts = {}
    for name in ("disk", "convex_polygon"):
        scene = load_scene(SCENES[name])
        counts[name] = len(extract_mk(scene.model, cli.scene_sampler(scene), 2))
    verdict(4, all(v == 0 for v in counts.values()), f"M_2 sample counts {counts}")


def _angular_grid_c(a: Configuration, n_angles: int = 1_000_000) -> float:
    theta = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    frame = build_frame(a)
    W = np.c_[np.cos(theta), np.sin(theta)] @ frame.basis_P
    dots = W @ frame.proj_P(a.dirs).T
    return 0.5 * float((dots.max(axis=1) - dots.min(axis=1)).min())


def test_criterion_05_separation_constant():
    rng = np.random.default_rng(5)
    smallest = np.inf
    for i in range(100):
        n = (2, 3, 4)[i % 3]
        k = int(rng.integers(2, n + 2))
        smallest = min(smallest, separation_constant(random_configuration(rng, n, k)))
    tri = equilateral()
    c_tri, oracle_tri = separation_constant(tri), _angular_grid_c(tri)
    c_quarter = separation_constant(Configuration(np.eye(2)))
    ok = (smallest > 1e-8 and abs(c_tri - oracle_tri) <= 1e-6 and abs(c_tri - 0.75) <= 1e-6
          and abs(c_quarter - np.sqrt(2) / 2) <= 1e-6)
    verdict(5, ok, f"min c over 100 configurations {smallest:.4g}, equilateral {c_tri:.12f} "
                   f"(grid oracle {oracle_tri:.12f}), orthonormal pair {c_quarter:.12f}")


def test_criterion_06_separation_gap():
    rng = np.random.default_rng(6)
    r = 0.25
    worst, checked = np.inf, 0
    configs = []
    for i in range(100):
        n = (2, 3, 4)[i % 3]
        a = random_configuration(rng, n, int(rng.integers(2, n + 2)))
        frame = build_frame(a)
        configs.append((a, frame, separation_constant(a, frame)))
    while checked < 10_000:
        a, frame, c = configs[checked % len(configs)]
        p = rng.normal(size=a.k - 1) @ frame.basis_P
        v = p / np.linalg.norm(p)
        if frame.basis_Q.shape[0]:
            q = rng.normal(size=frame.basis_Q.shape[0]) @ frame.basis_Q
            v = v + rng.uniform(0, 0.25) * q / np.linalg.norm(q)
        v = v * rng.uniform(0.1, 10.0)
        assert in_cone(v, frame, r)
        _, _, gap = separation_check(v, a, frame, c, r)
        worst = min(worst, gap - c)
        checked += 1
    verdict(6, worst > 0, f"{checked} pairs, smallest gap - c = {worst:.4g}")


def test_criterion_07_cone_avoidance(bundled_charts):
    total, charts = 0, 0
    for name, k, samples, keys, X in bundled_charts:
        ids = np.array([s.chart_id for s in samples])
        for cid, key in enumerate(keys):
            total += len(cone_avoidance_audit(X[ids == cid], make_certificate(key.a, key.d)))
            charts += 1
    two = next(entry for entry in bundled_charts if entry[0] == "two_points" and entry[1] == 2)
    samples, keys = two[2], two[3]
    cert = make_certificate(keys[0].a, keys[0].d)
    X = np.array([s.x for s in samples if s.chart_id == 0])
    X = X[merge_points(X, 1e-9)[0]]
    planted = np.vstack([X, X[0] + cert.frame.basis_P[0] * cert.t / 2])
    found = cone_avoidance_audit(planted, cert)
    expect = [(0, len(X)), (len(X), 0)]
    verdict(7, total == 0 and found == expect,
            f"{charts} charts over all scenes and levels, {total} violations; planted pair found {found}")


def test_criterion_08_lipschitz(bundled_charts):
    worst, charts, injective = 0.0, 0, True
    for name, k, samples, keys, X in bundled_charts:
        ids = np.array([s.chart_id for s in samples])
        for cid, key in enumerate(keys):
            cert = make_certificate(key.a, key.d)
            fit = lipschitz_graph_fit(X[ids == cid], cert.frame, r=cert.r, t=cert.t)
            worst = max(worst, fit.L)
            injective &= not fit.injectivity_violations
            charts += 1
    frame = build_frame(Configuration(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])))
    rng = np.random.default_rng(8)
    tilt_err = 0.0
    for theta in (0.05, 0.4, 0.9, 1.2, 1.3):
        # a line in the (Q, P) plane at angle theta to Q, sampled unevenly
        q = rng.normal(size=2) @ frame.basis_Q
        q /= np.linalg.norm(q)
        s = np.sort(rng.uniform(-1, 1, 60))[:, None]
        X = s * (np.cos(theta) * q + np.sin(theta) * frame.basis_P[0])
        fit = lipschitz_graph_fit(X, frame, t=0.2)
        tilt_err = max(tilt_err, abs(fit.L - np.tan(theta)))
    ok = worst <= SQRT15 and injective and tilt_err <= 1e-6
    verdict(8, ok, f"{charts} charts, max L {worst:.4g} (bound {SQRT15:.4f}), tilted-graph error {tilt_err:.2e}")


def test_criterion_09_equidistance_rank():
    rng = np.random.default_rng(9)
    exact, flats = 0, set()
    for i in range(1000):
        n = (2, 3, 4)[i % 3]
        k = int(rng.integers(2, n + 2))
        S = rng.normal(size=(k, n))
        if not is_generic(S):
            continue
        A, _ = equidistance_system(S)
        rank = np.linalg.matrix_rank(A)
        exact += rank == k - 1
        flats.add((n, k, int(n - rank)))
    ok = exact == 1000 and all(dim == n - k + 1 for n, k, dim in flats)
    verdict(9, ok, f"{exact}/1000 systems of rank k-1; flat dimensions {sorted(flats)}")


def test_criterion_10_circle():
    scene = load_scene(SCENES["circle"])
    sampler = cli.scene_sampler(scene)
    X = np.array([s.x for s in extract_mk(scene.model, sampler, 2)])
    offset = float(np.linalg.norm(X.mean(axis=0) - scene.model.center)) / sampler.spacing
    report = stratification_report(scene.model, sampler)
    counts = report.stratum_counts()
    ok = len(X) > 0 and offset <= 2.0 and counts[0] > 0 and all(v == 0 for i, v in counts.items() if i)
    verdict(10, ok, f"centroid {offset:.2e} cells from centre, strata counts {counts}")


def test_criterion_11_determinism(tmp_path):
    differ = []
    for name, path in sorted(SCENES.items()):
        outs = []
        for run in ("a", "b"):
            out = tmp_path / name / run
            assert cli.main(["extract", "--scene", str(path), "--k", "2", "--seed", "11", "--out", str(out)]) == 0
            outs.append((out / "samples.csv").read_bytes())
        if outs[0] != outs[1]:
            differ.append(name)
    verdict(11, not differ, f"{len(SCENES)} scenes, differing samples.csv: {differ or 'none'}")
