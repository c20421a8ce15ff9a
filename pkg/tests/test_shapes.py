import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from medax import shapes
from medax.scene import SceneError, bundled_scenes, default_bbox, load_scene, parse_scene

SQRT2 = np.sqrt(2.0)


def models():
    rng = np.random.default_rng(3)
    return {
        "cloud": shapes.PointCloud(rng.uniform(-1, 1, (20, 2))),
        "cloud_brute": shapes.PointCloud(rng.uniform(-1, 1, (20, 3)), brute_force=True),
        "polyline": shapes.Polyline([[0, 0], [1, 0], [1, 1], [3, 2]]),
        "polygon": shapes.Polygon([[0, 0], [2, 0], [2.5, 1], [1, 2], [-0.5, 1]]),
        "circle": shapes.Sphere([0.5, -0.5], 1.3),
        "sphere": shapes.Sphere([0, 0, 0], 1.0),
        "balls": shapes.Balls([[0, 0], [3, 0]], [1.0, 0.5]),
        "union": shapes.Union([shapes.Sphere([0, 0], 1.0), shapes.PointCloud([[3.0, 0.0], [0.0, 3.0]])]),
    }


MODELS = models()


def test_distance_examples():
    assert shapes.Sphere([0, 0], 1).distance([2, 0]) == 1.0
    assert shapes.PointCloud([[0, 0], [2, 0]]).distance([1, 1]) == pytest.approx(SQRT2, abs=1e-15)
    assert shapes.Polyline([[0, 0], [1, 0]]).distance([2, 1]) == pytest.approx(SQRT2, abs=1e-15)
    assert MODELS["polygon"].distance([1, 1]) == 0.0
    assert MODELS["balls"].distance([0.5, 0]) == 0.0


def test_near_set_examples():
    ns = shapes.PointCloud([[-1, 0], [1, 0]]).near_set([0, 0.7], 0.0)
    assert len(ns) == 2
    circle = shapes.Sphere([0, 0], 1)
    ns = circle.near_set([0, 0], 0.0)
    assert len(ns) == 16
    assert np.allclose(np.linalg.norm(ns.points, axis=1), 1.0)
    ns = circle.near_set([0.5, 0], 0.0)
    assert np.allclose(ns.points, [[1.0, 0.0]])
    assert ns.d == 0.5


def test_near_set_inside_E_is_the_point_itself():
    ns = MODELS["polygon"].near_set([1, 1], 0.1)
    assert ns.d == 0.0
    assert np.allclose(ns.points, [[1, 1]])


def test_near_set_rejects_negative_slack():
    with pytest.raises(shapes.ModelError):
        MODELS["cloud"].near_set([0, 0], -1.0)


def test_sphere_net_size_and_rejects_bad_radius():
    assert len(shapes.Sphere([0, 0, 0], 2.0, net_size=32).near_set([0, 0, 0]).points) == 32
    with pytest.raises(shapes.ModelError):
        shapes.Sphere([0, 0], 0.0)


def test_polygon_needs_plane_and_three_vertices():
    with pytest.raises(shapes.ModelError):
        shapes.Polygon([[0, 0], [1, 0]])
    with pytest.raises(shapes.ModelError):
        shapes.Polygon([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
    assert MODELS["polygon"].is_convex()
    assert not shapes.Polygon([[0, 0], [2, 0], [1, 0.5], [1, 2]]).is_convex()


def test_union_dimension_mismatch():
    with pytest.raises(shapes.ModelError):
        shapes.Union([shapes.Sphere([0, 0], 1), shapes.Sphere([0, 0, 0], 1)])


def test_sampled_implicit_is_a_point_set_on_the_level_set():
    m = shapes.SampledImplicit(lambda X: np.linalg.norm(X, axis=1) - 1.0, [-2, -2], [2, 2], resolution=40)
    assert np.all(np.abs(np.linalg.norm(m.points, axis=1) - 1.0) < 0.01)
    assert m.distance([0, 0]) == pytest.approx(1.0, abs=0.01)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_distance_is_1_lipschitz(name):
    m = MODELS[name]
    rng = np.random.default_rng(7)
    X = rng.uniform(-3, 3, (10_000, m.dim))
    Y = X + rng.normal(scale=0.5, size=X.shape)
    lhs = np.abs(m.distances(X) - m.distances(Y))
    assert np.all(lhs <= np.linalg.norm(X - Y, axis=1) + 1e-9)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_near_set_realises_distance(name):
    m = MODELS[name]
    rng = np.random.default_rng(8)
    for x in rng.uniform(-3, 3, (200, m.dim)):
        ns = m.near_set(x, 0.0)
        dists = np.linalg.norm(ns.points - x, axis=1)
        assert len(ns) >= 1
        assert abs(dists.min() - m.distance(x)) <= 1e-9
        assert np.all(dists <= ns.d + 1e-9)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_near_arrays_agree_with_near_set(name):
    m = MODELS[name]
    rng = np.random.default_rng(9)
    X = rng.uniform(-3, 3, (100, m.dim))
    ids, Y, D, near, d = m.near_arrays(X, 0.05)
    assert np.allclose(d, m.distances(X))
    for i, x in enumerate(X):
        if d[i] == 0:
            continue
        ns = m.near_set(x, 0.05)
        got = {tuple(np.round(y, 9)) for y in Y[i][near[i]]}
        assert got == {tuple(np.round(y, 9)) for y in ns.points}


@pytest.mark.parametrize("name", sorted(MODELS))
def test_primitive_queries_are_consistent(name):
    m = MODELS[name]
    rng = np.random.default_rng(10)
    X = rng.uniform(-3, 3, (50, m.dim))
    ids = rng.integers(0, m.n_primitives, (50, 2))
    Y = m.primitive_nearest(ids, X)
    assert np.allclose(np.linalg.norm(Y - X[:, None, :], axis=2), m.primitive_distances(ids, X))


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=6), st.integers(0, 2**31))
def test_union_distance_is_member_minimum(pts, seed):
    members = [shapes.PointCloud(np.array(pts)), shapes.Sphere([0.0, 0.0], 1.0), shapes.Polyline([[2, 2], [3, -1]])]
    u = shapes.Union(members)
    X = np.random.default_rng(seed).uniform(-6, 6, (50, 2))
    assert np.array_equal(u.distances(X), np.min([m.distances(X) for m in members], axis=0))


# -- scene files ---------------------------------------------------------------

def test_scene_points():
    sc = parse_scene({"dim": 2, "shapes": [{"kind": "points", "coords": [[0, 0], [1, 0], [0, 1]]}]})
    assert isinstance(sc.model, shapes.PointCloud)
    assert sc.model.dim == 2


def test_scene_circle_default_bbox():
    sc = parse_scene({"dim": 2, "shapes": [{"kind": "circle", "center": [1, 2], "radius": 0.5}]})
    lo, hi = sc.bbox
    assert np.allclose(lo, [1 - 1.5, 2 - 1.5])
    assert np.allclose(hi, [1 + 1.5, 2 + 1.5])


def test_scene_union_and_explicit_bbox():
    sc = parse_scene({"dim": 2, "bbox": [[-1, -1], [4, 4]], "sampling": {"grid": 32, "seed": 3},
                      "shapes": [{"kind": "polygon", "vertices": [[0, 0], [1, 0], [0, 1]]},
                                 {"kind": "balls", "centers": [[3, 3]], "radii": [0.5]}]})
    assert isinstance(sc.model, shapes.Union)
    assert sc.sampling.grid == 32 and sc.sampling.seed == 3
    assert np.allclose(sc.bbox[1], [4, 4])


@pytest.mark.parametrize("doc, where", [
    ({"dim": 2, "shapes": [{"kind": "points", "coords": [[0, 0], [1, 0, 0]]}]}, "shapes[0].coords"),
    ({"dim": 2, "shapes": [{"kind": "blob"}]}, "shapes[0].kind"),
    ({"dim": 2, "shapes": []}, "shapes"),
    ({"dim": 3, "shapes": [{"kind": "circle", "center": [0, 0], "radius": 1}]}, "shapes[0].center"),
    ({"dim": 2, "shapes": [{"kind": "circle", "center": [0, 0], "radius": -1}]}, "shapes[0].radius"),
    ({"dim": 2, "bbox": [[0, 0], [0, 1]], "shapes": [{"kind": "points", "coords": [[0, 0]]}]}, "bbox"),
    ({"dim": 2, "sampling": {"grid": -4}, "shapes": [{"kind": "points", "coords": [[0, 0]]}]}, "sampling.grid"),
])
def test_scene_errors_name_the_field(doc, where):
    with pytest.raises(SceneError) as exc:
        parse_scene(doc)
    assert exc.value.where.startswith(where)


def test_scene_file_errors(tmp_path):
    with pytest.raises(SceneError):
        load_scene(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 2,\n "shapes": [}')
    with pytest.raises(SceneError) as exc:
        load_scene(bad)
    assert "line 2" in str(exc.value)


def test_bundled_scenes_load():
    scenes = bundled_scenes()
    assert {"two_points", "triangle", "circle", "disk", "convex_polygon"} <= set(scenes)
    for path in scenes.values():
        sc = load_scene(path)
        assert sc.model.dim == len(sc.bbox[0])
        json.loads(path.read_text())


def test_default_bbox_contains_geometry():
    for m in MODELS.values():
        lo, hi = default_bbox(m)
        blo, bhi = m.bounds()
        assert np.all(lo < blo) and np.all(hi > bhi)
