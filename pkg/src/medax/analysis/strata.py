"""Stratification M_k = L_0 u ... u L_{n-k+1} with L_i = M_{n-i+1} minus M_{n-i+2}."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from medax.analysis.certificate import chart_key
from medax.analysis.dimension import DimensionEstimate, set_dimension
from medax.extractor import MERGE_RATIO, MedialSample, Sampler, assign_charts, extract_mk
from medax.geometry import merge_points
from medax.shapes import ClosedSet


@dataclass
class Level:
    k: int
    samples: list[MedialSample]
    n_charts: int
    dimension: DimensionEstimate


@dataclass
class StratumReport:
    n: int
    levels: dict[int, Level] = field(default_factory=dict)
    strata: dict[int, np.ndarray] = field(default_factory=dict)
    strata_dims: dict[int, DimensionEstimate] = field(default_factory=dict)

    def stratum_counts(self) -> dict[int, int]:
        return {i: len(p) for i, p in self.strata.items()}

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "levels": [
                {"k": lv.k, "samples": len(lv.samples), "charts": lv.n_charts,
                 "dimension": lv.dimension.value, "fit_r2": lv.dimension.fit_r2,
                 "bound": self.n - lv.k + 1}
                for lv in self.levels.values()
            ],
            "strata": [
                {"i": i, "count": len(pts), "dimension": self.strata_dims[i].value,
                 "fit_r2": self.strata_dims[i].fit_r2}
                for i, pts in self.strata.items()
            ],
        }


def stratification_report(model: ClosedSet, sampler: Sampler, tau: float | None = None,
                          sigma_tol: float = 1e-6, threads: int | None = None) -> StratumReport:
    """Extract every level k = 2..n+1 and split the samples into strata.

    A level-k sample belongs to M_{k+1} when a level-(k+1) sample lies within
    half a sampler spacing of it. Strata hold distinct points: samples
    within 1e-6 of the box diameter of each other are merged.
    """
    n = model.dim
    h = sampler.spacing
    report = StratumReport(n)
    for k in range(2, n + 2):
        samples = extract_mk(model, sampler, k, tau, sigma_tol, threads)
        keys = assign_charts(samples, chart_key)
        pts = np.array([s.x for s in samples]).reshape(len(samples), n)
        report.levels[k] = Level(k, samples, len(keys), set_dimension(pts, h, sampler.diameter))
    for k in range(n + 1, 1, -1):
        i = n - k + 1
        pts = np.array([s.x for s in report.levels[k].samples]).reshape(-1, n)
        upper = report.levels.get(k + 1)
        if upper is not None and upper.samples and len(pts):
            above = np.array([s.x for s in upper.samples])
            dist, _ = cKDTree(above).query(pts)
            pts = pts[dist > h / 2]
        if len(pts):
            pts = pts[merge_points(pts, MERGE_RATIO * sampler.diameter)[0]]
        report.strata[i] = pts
        report.strata_dims[i] = set_dimension(pts, h, sampler.diameter)
    report.strata = dict(sorted(report.strata.items()))
    report.strata_dims = dict(sorted(report.strata_dims.items()))
    return report
