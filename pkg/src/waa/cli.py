"""Command-line entry point: ``waa solve | solve1d | landscape | sample | compare``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import data as D
from .geometry import ConvexPolygon, GeometryError, area, centroid
from .oned import DegenerateMeasure, Empirical1D, solve_1d, w2_1d
from .ot import DiscreteMeasure, discrete_ot_oracle, quantize_triangle
from .shape_opt import DegeneratePolygon, SolverConfig, initialize_polygon, solve
from .svg import Figure, heatmap

SCHEMA = "waa/1"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("waa")


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    input_hashes: dict = field(default_factory=dict)
    seed: Optional[int] = None
    outputs: list = field(default_factory=list)
    wall_time: Optional[float] = None

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, **asdict(self)}

    def write(self, path: Path) -> None:
        _write_json(path, self.to_dict())


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _workers() -> int:
    raw = os.environ.get("WAA_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"WAA_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _map(fn, items):
    n = min(_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _number_list(text: str, cast=float) -> list:
    """``"3"``, ``"3,5,8"`` or an inclusive integer range ``"3..8"``."""
    try:
        if ".." in text and cast is int:
            lo, hi = (int(s) for s in text.split(".."))
            vals = list(range(lo, hi + 1))
        else:
            vals = [cast(s) for s in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse {text!r}") from None
    if not vals:
        raise UsageError(f"empty list {text!r}")
    return vals


def _grid_range(text: str) -> np.ndarray:
    """``lo:hi:count`` inclusive grid."""
    try:
        lo, hi, cnt = text.split(":")
        lo, hi, cnt = float(lo), float(hi), int(cnt)
    except ValueError:
        raise UsageError(f"range {text!r} must look like lo:hi:count") from None
    if cnt < 2 or not hi > lo or not (np.isfinite(lo) and np.isfinite(hi)):
        raise UsageError(f"range {text!r} needs lo < hi and count >= 2")
    return np.linspace(lo, hi, cnt)


def _polygon_stats(poly: ConvexPolygon) -> dict:
    c = centroid(poly)
    sides = poly.side_lengths()
    return {
        "area": area(poly),
        "centroid": c.tolist(),
        "circumradius": float(np.hypot(*(poly.vertices - c).T).mean()),
        "side_lengths": sides.tolist(),
        "side_ratio": float(sides.max() / sides.min()),
    }


# -- solve ---------------------------------------------------------------------

def _load_measure(args) -> DiscreteMeasure:
    if args.bin:
        return D.bin_to_measure(D.read_points_csv(args.input), D.BinningSpec.parse(args.bin))
    return D.read_measure_csv(args.input)


def _solve_chain(job):
    """Solve a run of configs sharing k, in increasing epsilon.

    With ``warm`` set, each solve starts from the previous polygon and
    potential (a continuation in epsilon); otherwise every solve starts from
    the initial polygon.
    """
    mu, cfgs, warm = job
    omega, phi = initialize_polygon(mu, cfgs[0].k, cfgs[0].seed), None
    out = []
    for cfg in cfgs:
        if not warm:
            omega, phi = initialize_polygon(mu, cfg.k, cfg.seed), None
        try:
            trace = solve(mu, omega, cfg, phi0=phi)
        except DegeneratePolygon as exc:
            out.append((None, str(exc)))
            break
        out.append((trace, None))
        omega, phi = trace.polygon, trace.phi
    return out


def _solve_one(job):
    mu, cfg = job
    return _solve_chain((mu, [cfg], False))[0]


def _solve_figure(mu: DiscreteMeasure, trace) -> Figure:
    hist = np.array([r.vertices for r in trace.records] + [trace.polygon.vertices])
    fig = Figure.fit(mu.points, hist.reshape(-1, 2))
    fig.atoms(mu.points, mu.masses)
    for j in range(hist.shape[1]):
        fig.polyline(hist[:, j], stroke="#999999", width=0.8, dash="3,2")
    fig.polyline(trace.polygon.vertices, stroke="#cc3311", width=2.0, closed=True)
    for v in trace.polygon.vertices:
        fig.circle(v, 4.0, fill="#cc3311", opacity=1.0)
    return fig


def cmd_solve(args) -> int:
    mu = _load_measure(args)
    ks = _number_list(args.k, int)
    eps = sorted(set(_number_list(args.epsilon, float)))
    chains = [[SolverConfig(k=k, epsilon=e, m_exponent=args.m, tau1=args.tau1, tau2=args.tau2,
                            delta1=args.delta1, delta2=args.delta2, max_outer=args.max_outer,
                            max_inner=args.max_inner, seed=args.seed) for e in eps]
              for k in ks]
    cfgs = [c for chain in chains for c in chain]
    results = [r for chain in _map(_solve_chain, [(mu, c, args.continuation) for c in chains])
               for r in chain]
    failures = [msg for _, msg in results if msg is not None]
    if failures:
        for msg in failures:
            print(f"waa: degenerate polygon: {msg}", file=sys.stderr)
        return EXIT_NUMERIC

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    sweep = len(cfgs) > 1
    summary = []
    for cfg, (trace, _) in zip(cfgs, results):
        sub = out / f"k{cfg.k}_eps{cfg.epsilon:g}" if sweep else out
        sub.mkdir(exist_ok=True)
        doc = {"schema": SCHEMA, "config": cfg.to_dict(), **trace.to_dict(),
               "final": _polygon_stats(trace.polygon)}
        _write_json(sub / "trace.json", doc)
        D.write_points_csv(sub / "polygon.csv", trace.polygon.vertices)
        _solve_figure(mu, trace).save(sub / "figure.svg")
        written += [str(sub / n) for n in ("trace.json", "polygon.csv", "figure.svg")]
        st = _polygon_stats(trace.polygon)
        summary.append((cfg.k, cfg.epsilon, trace.objective, st["area"], st["circumradius"],
                        st["side_ratio"], trace.converged, len(trace.records)))
    if sweep:
        with open(out / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "epsilon", "objective", "area", "circumradius", "side_ratio",
                        "converged", "outer_iterations"])
            for row in summary:
                w.writerow([row[0], repr(row[1])] + [repr(float(v)) for v in row[2:6]]
                           + [int(row[6]), row[7]])
        written.append(str(out / "summary.csv"))
    _finish(args, out / "manifest.json", written, {"input": args.input})
    return EXIT_OK


# -- solve1d -------------------------------------------------------------------

def cmd_solve1d(args) -> int:
    x = D.read_column_csv(args.input)
    mu = Empirical1D.from_samples(x)
    iv = solve_1d(mu)
    doc = {"schema": SCHEMA, "a": iv.a, "b": iv.b, "w2": w2_1d(mu, iv)}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        _finish(args, Path(args.out).with_suffix(".manifest.json"), [args.out], {"input": args.input})
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- landscape -----------------------------------------------------------------

def landscape_triangle(p1: float, p2: float) -> np.ndarray:
    """Triangle with signed height p1, base width p2 and centroid at the origin.

    Negative p1 puts the apex below the base. Vertices are counterclockwise.
    """
    apex = (0.0, 2.0 * p1 / 3.0)
    left, right = (-p2 / 2.0, -p1 / 3.0), (p2 / 2.0, -p1 / 3.0)
    tri = [left, right, apex] if p1 > 0 else [right, left, apex]
    return np.array(tri)


def _landscape_cell(job):
    target, p1, p2, levels = job
    if p1 == 0 or p2 <= 0:
        return float("nan")
    nu = quantize_triangle(landscape_triangle(p1, p2), levels)
    return float(np.sqrt(max(discrete_ot_oracle(target, nu), 0.0)))


def run_landscape(p1s, p2s, resolution: int, target=(1.0, 2.0)) -> np.ndarray:
    levels = int(round(np.log(resolution) / np.log(4)))
    if resolution < 1 or 4**levels != resolution:
        raise UsageError("--resolution must be a power of 4 (1, 4, 16, ..., 1024, 4096)")
    mu = quantize_triangle(landscape_triangle(*target), levels)
    jobs = [(mu, p1, p2, levels) for p1 in p1s for p2 in p2s]
    return np.array(_map(_landscape_cell, jobs)).reshape(len(p1s), len(p2s))


def cmd_landscape(args) -> int:
    p1s = _grid_range(args.p1_range)
    p2s = _grid_range(args.p2_range)
    if np.any(p2s <= 0):
        raise UsageError("base widths (p2) must be positive")
    W = run_landscape(p1s, p2s, args.resolution)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "landscape.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p1", "p2", "w2"])
        for i, p1 in enumerate(p1s):
            for j, p2 in enumerate(p2s):
                w.writerow([repr(float(p1)), repr(float(p2)), repr(float(W[i, j]))])
    with open(out / "landscape_grid.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p1\\p2"] + [repr(float(v)) for v in p2s])
        for p1, row in zip(p1s, W):
            w.writerow([repr(float(p1))] + [repr(float(v)) for v in row])
    (out / "landscape.svg").write_text(heatmap(W, p2s, p1s))
    written = [str(out / n) for n in ("landscape.csv", "landscape_grid.csv", "landscape.svg")]
    _finish(args, out / "manifest.json", written, {})
    return EXIT_OK


# -- sample --------------------------------------------------------------------

def cmd_sample(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be positive")
    if args.dist == "disk":
        pts = D.sample_uniform_disk(args.n, args.seed)
    else:
        mean = _number_list(args.mean)
        cov = _number_list(args.cov)
        if len(mean) != 2 or len(cov) != 4:
            raise UsageError("--mean needs 2 numbers and --cov 4 (row major)")
        try:
            pts = D.sample_gaussian(args.n, mean, np.reshape(cov, (2, 2)), args.seed)
        except np.linalg.LinAlgError:
            raise UsageError("--cov must be symmetric positive definite") from None
    if args.bin:
        mu = D.bin_to_measure(pts, D.BinningSpec.parse(args.bin))
        D.write_points_csv(args.out, mu.points, mu.masses)
    else:
        D.write_points_csv(args.out, pts)
    _finish(args, Path(args.out).with_suffix(".manifest.json"), [args.out], {})
    return EXIT_OK


# -- compare -------------------------------------------------------------------

def cmd_compare(args) -> int:
    raw = D.read_rows_csv(args.input)
    if raw.shape[1] < 2 or raw.shape[0] < max(args.k, 3):
        raise UsageError(f"need at least {max(args.k, 3)} rows and 2 columns, got {raw.shape}")
    smooth = D.moving_average_centered(raw.rows, args.window)
    scores, ratios = D.pca_reduce(smooth, 2)
    explained = float(ratios.sum())
    if explained < args.min_explained:
        print(f"waa: first two components explain {explained:.4f} < {args.min_explained}",
              file=sys.stderr)
        return EXIT_NUMERIC
    mu = D.bin_to_measure(scores, D.BinningSpec.parse(args.bin))
    cfg = SolverConfig(k=args.k, epsilon=args.epsilon, m_exponent=args.m, seed=args.seed,
                       max_outer=args.max_outer)
    trace, err = _solve_one((mu, cfg))
    if err:
        print(f"waa: degenerate polygon: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    centers = D.kmeans(scores, args.k, args.seed)
    inside = float(mu.masses[trace.polygon.contains(mu.points, tol=1e-9)].sum())

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"schema": SCHEMA, "explained_variance_ratio": ratios.tolist(),
           "archetypes": trace.polygon.vertices.tolist(), "kmeans_centers": centers.tolist(),
           "mass_inside_polygon": inside, "converged": trace.converged,
           "labels": list(raw.labels or ())}
    _write_json(out / "compare.json", doc)
    fig = Figure.fit(mu.points, trace.polygon.vertices, centers)
    fig.atoms(mu.points, mu.masses)
    fig.polyline(trace.polygon.vertices, stroke="#3355cc", width=2.0, closed=True)
    for v in trace.polygon.vertices:
        fig.circle(v, 5.0, fill="#dd2222", opacity=1.0)
    for c in centers:
        fig.square(c, 5.0)
    fig.save(out / "compare.svg")
    _finish(args, out / "manifest.json", [str(out / "compare.json"), str(out / "compare.svg")],
            {"input": args.input})
    return EXIT_OK


# -- plumbing ------------------------------------------------------------------

def _finish(args, path: Path, outputs, inputs: dict) -> None:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "_t0")}
    man = RunManifest(command=args.command, config=cfg,
                      input_hashes={k: _sha256(v) for k, v in inputs.items()},
                      seed=getattr(args, "seed", None), outputs=list(outputs) + [str(path)],
                      wall_time=(time.perf_counter() - args._t0) if args.record_time else None)
    man.write(path)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="waa", description="Wasserstein archetypal analysis")
    p.add_argument("--record-time", action="store_true",
                   help="store wall time in manifests (breaks byte-identical reruns)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="fit a k-gon to 2D data")
    s.add_argument("--input", required=True, help="CSV of x,y[,mass] (or raw x,y with --bin)")
    s.add_argument("--bin", help="bin raw samples on an NXxNY grid first, e.g. 15x15")
    s.add_argument("--k", default="3", help="vertex count, list 3,4 or range 3..8")
    s.add_argument("--epsilon", default="0", help="regularisation weight or comma list")
    s.add_argument("--m", type=float, default=2.0)
    s.add_argument("--tau1", type=float, default=0.5)
    s.add_argument("--tau2", type=float, default=0.1)
    s.add_argument("--delta1", type=float, default=1e-3)
    s.add_argument("--delta2", type=float, default=1e-5)
    s.add_argument("--max-outer", type=int, default=SolverConfig.max_outer)
    s.add_argument("--max-inner", type=int, default=SolverConfig.max_inner)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--continuation", action="store_true",
                   help="warm-start each epsilon of a sweep from the previous solution")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("solve1d", help="optimal interval for 1D data")
    s.add_argument("--input", required=True, help="one-column CSV")
    s.add_argument("--out", help="JSON output path (stdout if omitted)")
    s.set_defaults(func=cmd_solve1d)

    s = sub.add_parser("landscape", help="W2 over a two-parameter triangle family")
    s.add_argument("--p1-range", default="-2:2:9", help="signed heights lo:hi:count")
    s.add_argument("--p2-range", default="0.5:4:8", help="base widths lo:hi:count")
    s.add_argument("--resolution", type=int, default=1024, help="atoms per quantised triangle")
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_landscape)

    s = sub.add_parser("sample", help="draw synthetic samples")
    s.add_argument("--dist", choices=("disk", "gaussian"), default="disk")
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--mean", default="0,0")
    s.add_argument("--cov", default="1,0,0,1")
    s.add_argument("--bin", help="write the binned measure instead, e.g. 15x15")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("compare", help="WAA versus k-means on time-series rows")
    s.add_argument("--input", required=True, help="CSV rows label,v1,...,vD")
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--epsilon", type=float, default=0.0)
    s.add_argument("--m", type=float, default=2.0)
    s.add_argument("--window", type=int, default=5)
    s.add_argument("--bin", default="15x15")
    s.add_argument("--min-explained", type=float, default=0.0,
                   help="fail (exit 3) if the first two PCs explain less than this")
    s.add_argument("--max-outer", type=int, default=SolverConfig.max_outer)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args._t0 = time.perf_counter()
    try:
        return args.func(args)
    except (UsageError, D.DataFormatError, OSError, ValueError) as exc:
        if isinstance(exc, DegenerateMeasure):
            print(f"waa: degenerate measure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        if isinstance(exc, D.RankError):
            print(f"waa: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        print(f"waa: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegeneratePolygon, GeometryError, FloatingPointError) as exc:
        print(f"waa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
