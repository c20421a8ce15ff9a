"""JSON scene files describing E, the bounding box and the sampler."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from medax import shapes


class SceneError(ValueError):
    """Scene file problem; ``where`` names the offending field or line."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class SamplingSettings:
    grid: int | None = None
    random: int | None = None
    seed: int = 0


class Scene(NamedTuple):
    model: shapes.ClosedSet
    bbox: tuple[np.ndarray, np.ndarray]
    sampling: SamplingSettings


def _vector(value, where: str, dim: int | None) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in value):
        raise SceneError("expected a list of numbers", where)
    v = np.asarray(value, dtype=float)
    if dim is not None and v.size != dim:
        raise SceneError(f"dimension mismatch: got {v.size} coordinates, scene dim is {dim}", where)
    if not np.all(np.isfinite(v)):
        raise SceneError("coordinates must be finite", where)
    return v


def _vectors(value, where: str, dim: int | None) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise SceneError("expected a nonempty list of coordinate vectors", where)
    rows = [_vector(v, f"{where}[{i}]", dim) for i, v in enumerate(value)]
    lengths = {r.size for r in rows}
    if len(lengths) > 1:
        raise SceneError(f"dimension mismatch: mixed coordinate lengths {sorted(lengths)}", where)
    return np.vstack(rows)


def _positive(value, where: str, allow_zero: bool = False) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SceneError("expected a number", where)
    if value < 0 or (value == 0 and not allow_zero):
        raise SceneError("expected a positive number", where)
    return float(value)


def _shape(rec, where: str, dim: int) -> shapes.ClosedSet:
    if not isinstance(rec, dict) or "kind" not in rec:
        raise SceneError("shape record needs a 'kind' field", where)
    kind = rec["kind"]
    try:
        if kind == "points":
            return shapes.PointCloud(_vectors(rec.get("coords"), f"{where}.coords", dim))
        if kind in ("circle", "sphere"):
            center = _vector(rec.get("center"), f"{where}.center", dim)
            radius = _positive(rec.get("radius"), f"{where}.radius")
            return shapes.Sphere(center, radius, int(rec.get("net", 16)))
        if kind == "polyline":
            V = _vectors(rec.get("vertices"), f"{where}.vertices", dim)
            return shapes.Polyline(V, closed=bool(rec.get("closed", False)))
        if kind == "polygon":
            if dim != 2:
                raise SceneError("polygons require dim = 2", where)
            return shapes.Polygon(_vectors(rec.get("vertices"), f"{where}.vertices", dim))
        if kind == "balls":
            C = _vectors(rec.get("centers"), f"{where}.centers", dim)
            radii = rec.get("radii")
            if not isinstance(radii, list) or len(radii) != len(C):
                raise SceneError("need one radius per centre", f"{where}.radii")
            R = [_positive(r, f"{where}.radii[{i}]", allow_zero=True) for i, r in enumerate(radii)]
            return shapes.Balls(C, R)
    except shapes.ModelError as exc:
        raise SceneError(str(exc), where) from exc
    raise SceneError(f"unknown shape kind {kind!r}", f"{where}.kind")


def default_bbox(model: shapes.ClosedSet) -> tuple[np.ndarray, np.ndarray]:
    """Geometry bounds padded by max(2 * largest radius, half the largest extent)."""
    lo, hi = model.bounds()
    extent = float(np.max(hi - lo))
    pad = max(2.0 * model.char_radius(), 0.5 * extent)
    if pad == 0.0:
        pad = 1.0
    return lo - pad, hi + pad


def parse_scene(doc) -> Scene:
    if not isinstance(doc, dict):
        raise SceneError("scene must be a JSON object")
    dim = doc.get("dim")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise SceneError("expected a positive integer", "dim")
    recs = doc.get("shapes")
    if not isinstance(recs, list) or not recs:
        raise SceneError("empty geometry: need at least one shape", "shapes")
    members = [_shape(r, f"shapes[{i}]", dim) for i, r in enumerate(recs)]
    model = members[0] if len(members) == 1 else shapes.Union(members)

    if "bbox" in doc:
        box = doc["bbox"]
        if not isinstance(box, list) or len(box) != 2:
            raise SceneError("bbox must be a pair of corner vectors", "bbox")
        lo = _vector(box[0], "bbox[0]", dim)
        hi = _vector(box[1], "bbox[1]", dim)
        if np.any(hi <= lo):
            raise SceneError("bbox is empty: upper corner must exceed lower corner", "bbox")
        bbox = (lo, hi)
    else:
        bbox = default_bbox(model)

    samp = doc.get("sampling", {})
    if not isinstance(samp, dict):
        raise SceneError("sampling must be an object", "sampling")
    for key in ("grid", "random", "seed"):
        val = samp.get(key)
        if val is not None and (not isinstance(val, int) or isinstance(val, bool) or val < 0):
            raise SceneError("expected a nonnegative integer", f"sampling.{key}")
    sampling = SamplingSettings(samp.get("grid"), samp.get("random"), samp.get("seed", 0))
    return Scene(model, bbox, sampling)


def bundled_scenes() -> dict[str, Path]:
    """Name -> path of the example scenes shipped with the package."""
    root = Path(__file__).parent / "scenes"
    return {p.stem: p for p in sorted(root.glob("*.json"))}


def load_scene(path) -> Scene:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SceneError(f"cannot read scene file: {exc.strerror}", str(path)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneError(exc.msg, f"{path.name}:line {exc.lineno}:col {exc.colno}") from exc
    return parse_scene(doc)
