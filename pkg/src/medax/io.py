"""Run-directory files: samples and chart CSVs, JSON records, the manifest.

Floats are written with ``repr`` (shortest round-trip form), so identical
runs give byte-identical files and reading a file back recovers every value
exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from medax import __version__
from medax.extractor import ChartKey, MedialSample

SAMPLES = "samples.csv"
CHARTS = "charts.csv"
MANIFEST = "manifest.json"


class RunError(ValueError):
    """A run directory is missing files or holds malformed ones."""


def _num(v) -> str:
    return repr(float(v))


@dataclass
class SampleTable:
    """Samples as read back from ``samples.csv``."""

    index: np.ndarray
    x: np.ndarray
    d: np.ndarray
    k_max: np.ndarray
    residual: np.ndarray
    chart_id: np.ndarray

    def __len__(self) -> int:
        return len(self.index)

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def write_samples(path, samples: list[MedialSample], dim: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", *[f"x_{i}" for i in range(dim)], "d", "k_max", "residual", "chart_id"])
        for i, s in enumerate(samples):
            w.writerow([i, *map(_num, s.x), _num(s.d), s.k_max, _num(s.residual), s.chart_id])


def read_samples(path) -> SampleTable:
    path = Path(path)
    if not path.is_file():
        raise RunError(f"missing {path.name} in {path.parent}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RunError(f"{path.name} has no header")
    header = rows[0]
    dim = sum(1 for h in header if h.startswith("x_"))
    expected = ["index", *[f"x_{i}" for i in range(dim)], "d", "k_max", "residual", "chart_id"]
    if header != expected or dim == 0:
        raise RunError(f"{path.name}: unexpected header {','.join(header)}")
    body = rows[1:]
    try:
        arr = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    except ValueError as exc:
        raise RunError(f"{path.name}: {exc}") from exc
    return SampleTable(
        index=arr[:, 0].astype(int),
        x=arr[:, 1:1 + dim],
        d=arr[:, 1 + dim],
        k_max=arr[:, 2 + dim].astype(int),
        residual=arr[:, 3 + dim],
        chart_id=arr[:, 4 + dim].astype(int),
    )


def write_charts(path, keys: list[ChartKey], dim: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chart_id", "dir_index", *[f"u_{i}" for i in range(dim)]])
        for cid, key in enumerate(keys):
            for j, u in enumerate(key.a.dirs):
                w.writerow([cid, j, *map(_num, u)])


def read_charts(path) -> dict[int, np.ndarray]:
    """Chart id -> (k, n) array of its configuration directions."""
    path = Path(path)
    if not path.is_file():
        raise RunError(f"missing {path.name} in {path.parent}")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["chart_id", "dir_index"]:
        raise RunError(f"{path.name}: unexpected header")
    charts: dict[int, list] = {}
    for r in rows[1:]:
        charts.setdefault(int(r[0]), []).append([float(v) for v in r[2:]])
    return {cid: np.array(dirs) for cid, dirs in charts.items()}


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n")


def write_rows(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in r])


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / MANIFEST
    if not path.is_file():
        return {}
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise RunError(f"{MANIFEST}: {exc.msg}") from exc


def record_run(run_dir, command: str, scene, params: dict, outputs: list[str], duration: float) -> None:
    """Add or replace this command's entry in ``manifest.json``."""
    run_dir = Path(run_dir)
    missing = [o for o in outputs if not (run_dir / o).is_file()]
    if missing:
        raise RunError(f"declared outputs not written: {', '.join(missing)}")
    doc = read_manifest(run_dir)
    doc[command] = {
        "scene": None if scene is None else str(scene),
        "command": command,
        "params": params,
        "version": __version__,
        "outputs": sorted(outputs + [MANIFEST]),
        "duration_s": round(duration, 3),
    }
    write_json(run_dir / MANIFEST, doc)
