"""Command-line interface: extract, certify, dim and report.

Exit codes: 0 success, 2 bad input (scene or run directory), 3 internal
error, 4 certification found violations.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from medax import __version__, io, plotting
from medax.analysis.certificate import (
    chart_key,
    cone_avoidance_audit,
    lipschitz_graph_fit,
    make_certificate,
)
from medax.analysis.dimension import set_dimension
from medax.analysis.strata import stratification_report
from medax.configuration import Configuration
from medax.extractor import MERGE_RATIO, ExtractionError, Sampler, assign_charts, extract_mk
from medax.geometry import DEFAULT_SIGMA_TOL, GeometryError, merge_points
from medax.scene import SceneError, load_scene

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL, EXIT_VIOLATION = 0, 2, 3, 4
DEFAULT_GRID_2D = 128
DEFAULT_RANDOM = 50_000


def scene_sampler(scene, grid: int | None = None, random: int | None = None,
                  seed: int | None = None) -> Sampler:
    """Sampler for a scene: explicit values override the scene's own settings.

    Without any sampling choice, 2D scenes use a 128 grid and others 50000
    uniform random points.
    """
    lo, hi = scene.bbox
    if grid is not None and random is not None:
        raise SceneError("choose either a grid or a random sample count, not both", "sampling")
    if grid is None and random is None:
        grid, random = scene.sampling.grid, scene.sampling.random
    if seed is None:
        seed = scene.sampling.seed
    if grid and random:
        raise SceneError("choose either a grid or a random sample count, not both", "sampling")
    if not grid and not random:
        if lo.size <= 2:
            grid = DEFAULT_GRID_2D
        else:
            random = DEFAULT_RANDOM
    return Sampler(lo, hi, grid=grid, random=random, seed=seed)


def _sampler(scene, args) -> Sampler:
    return scene_sampler(scene, args.grid, args.random, args.seed)


def _sampler_params(sampler: Sampler) -> dict:
    return {
        "grid": sampler.grid,
        "random": sampler.random,
        "seed": sampler.seed,
        "spacing": sampler.spacing,
        "diameter": sampler.diameter,
        "bbox": [sampler.lo.tolist(), sampler.hi.tolist()],
    }


def cmd_extract(args) -> int:
    start = time.perf_counter()
    scene = load_scene(args.scene)
    sampler = _sampler(scene, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = extract_mk(scene.model, sampler, args.k, args.tau, args.sigma_tol)
    keys = assign_charts(samples, chart_key)
    n = scene.model.dim
    io.write_samples(out / io.SAMPLES, samples, n)
    io.write_charts(out / io.CHARTS, keys, n)
    params = {"k": args.k, "tau": args.tau, "sigma_tol": args.sigma_tol, "dim": n, **_sampler_params(sampler)}
    io.record_run(out, "extract", args.scene, params, [io.SAMPLES, io.CHARTS], time.perf_counter() - start)
    print(f"extract: {len(samples)} samples of M_{args.k} in {len(keys)} charts -> {out}")
    return EXIT_OK


def _merge_tol(manifest: dict, table: io.SampleTable) -> float:
    params = manifest.get("extract", {}).get("params", {})
    if "diameter" in params:
        return MERGE_RATIO * float(params["diameter"])
    if len(table):
        return MERGE_RATIO * max(float(np.ptp(table.x, axis=0).max()), 1.0)
    return 0.0


def audit_run(table: io.SampleTable, charts: dict, merge_tol: float):
    """Certificate, cone audit and Lipschitz fit for every chart of a run.

    Coincident samples (closer than ``merge_tol``) are audited once, and
    violations are unordered pairs of sample indices.
    """
    certificates, records = [], []
    for cid in sorted(charts):
        members = np.flatnonzero(table.chart_id == cid)
        if members.size == 0:
            continue
        cert = make_certificate(Configuration(charts[cid]), float(table.d[members[0]]))
        reps = members[merge_points(table.x[members], merge_tol)[0]]
        ordered = cone_avoidance_audit(table.x[reps], cert)
        pairs = sorted({(int(table.index[reps[min(i, j)]]), int(table.index[reps[max(i, j)]]))
                        for i, j in ordered})
        fit = lipschitz_graph_fit(table.x[reps], cert.frame, r=cert.r, t=cert.t)
        certificates.append({"chart_id": cid, **cert.as_dict(pairs)})
        records.append({
            "chart_id": cid,
            "samples": int(members.size),
            "distinct": int(reps.size),
            "violations": [{"i": i, "j": j} for i, j in pairs],
            "L": fit.L,
            "L_bound": fit.bound,
            "witness": None if fit.witness is None else [int(table.index[reps[w]]) for w in fit.witness],
            "injectivity_violations": [[int(table.index[reps[i]]), int(table.index[reps[j]])]
                                       for i, j in fit.injectivity_violations],
            "ok": not pairs and fit.ok,
        })
    return certificates, records


def cmd_certify(args) -> int:
    start = time.perf_counter()
    run = Path(args.run)
    table = io.read_samples(run / io.SAMPLES)
    charts = io.read_charts(run / io.CHARTS)
    manifest = io.read_manifest(run)
    certificates, records = audit_run(table, charts, _merge_tol(manifest, table))
    n_viol = sum(len(r["violations"]) for r in records)
    ok = all(r["ok"] for r in records)
    io.write_json(run / "certificates.json", certificates)
    io.write_json(run / "audit.json", {
        "charts": records,
        "total_violations": n_viol,
        "max_L": max((r["L"] for r in records), default=0.0),
        "ok": ok,
    })
    scene = manifest.get("extract", {}).get("scene")
    io.record_run(run, "certify", scene, {"charts": len(records)}, ["certificates.json", "audit.json"],
                  time.perf_counter() - start)
    print(f"certify: {len(records)} charts, {n_viol} violations, "
          f"max L {max((r['L'] for r in records), default=0.0):.3g}")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_dim(args) -> int:
    start = time.perf_counter()
    run = Path(args.run)
    table = io.read_samples(run / io.SAMPLES)
    manifest = io.read_manifest(run)
    params = manifest.get("extract", {}).get("params")
    if not params:
        raise io.RunError(f"missing extract entry in {io.MANIFEST}; run extract first")
    k = int(params["k"])
    est = set_dimension(table.x, float(params["spacing"]), float(params["diameter"]))
    io.write_rows(run / "dim.csv", ["k", "value", "fit_r2", "n_points"], [[k, est.value, est.fit_r2, est.n_points]])
    plotting.box_count_plot(run / "boxcount.svg", {k: est})
    io.record_run(run, "dim", manifest["extract"].get("scene"), {"k": k}, ["dim.csv", "boxcount.svg"],
                  time.perf_counter() - start)
    print(f"dim: k={k} box dimension {est.value:.4f} (r2 {est.fit_r2:.4f}, {est.n_points} points)")
    return EXIT_OK


def cmd_report(args) -> int:
    start = time.perf_counter()
    scene = load_scene(args.scene)
    sampler = _sampler(scene, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = stratification_report(scene.model, sampler, args.tau, args.sigma_tol)
    n = scene.model.dim
    doc = {"scene": str(args.scene), **report.as_dict()}
    io.write_json(out / "report.json", doc)
    rows = [[i, *p] for i, pts in report.strata.items() for p in pts]
    io.write_rows(out / "strata.csv", ["i", *[f"x_{j}" for j in range(n)]], rows)
    outputs = ["report.json", "strata.csv"]
    if n == 2:
        plotting.strata_overlay(out / "overlay.svg", scene.model, scene.bbox, report.strata)
        outputs.append("overlay.svg")
    params = {"tau": args.tau, "sigma_tol": args.sigma_tol, "dim": n, **_sampler_params(sampler)}
    io.record_run(out, "report", args.scene, params, outputs, time.perf_counter() - start)
    counts = ", ".join(f"L_{i}: {c}" for i, c in report.stratum_counts().items())
    print(f"report: {counts} -> {out}")
    return EXIT_OK


def _add_sampling(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--grid", type=int, default=None, help="grid cells per axis")
    p.add_argument("--random", type=int, default=None, help="number of uniform random samples")
    p.add_argument("--seed", type=int, default=None, help="seed for random sampling")
    p.add_argument("--tau", type=float, default=None, help="detection slack (default: twice the spacing)")
    p.add_argument("--sigma-tol", type=float, default=DEFAULT_SIGMA_TOL, dest="sigma_tol",
                   help="relative singular-value threshold for generic position")
    p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="medax", description="Sample and certify k-medial axes of closed sets.")
    parser.add_argument("--version", action="version", version=f"medax {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="sample M_k and write samples.csv, charts.csv")
    _add_sampling(p)
    p.add_argument("--k", type=int, required=True, help="number of generic nearest points")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("certify", help="audit the charts of an extract run")
    p.add_argument("run", help="run directory written by extract")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("dim", help="box-counting dimension of an extract run")
    p.add_argument("run", help="run directory written by extract")
    p.set_defaults(func=cmd_dim)

    p = sub.add_parser("report", help="extract every k and split into strata")
    _add_sampling(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SceneError, io.RunError, ExtractionError, GeometryError) as exc:
        print(f"medax {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - mapped to the internal-error exit code
        print(f"medax {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
