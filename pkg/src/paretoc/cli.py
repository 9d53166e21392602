"""Command-line interface.

Subcommands: run | iterate | distance | plot-data | list-problems |
check-derivatives.  Exit codes: 0 success, 1 usage error, 2 numerical
failure.  ``--threads`` (or the PARETOC_THREADS environment variable) caps
the parallel cell-analysis width.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from .constrained import analyze_constrained, icosphere, ManifoldMesh
from .continuation import Analyzer, STRATUM_STABLE
from .complex_io import load_complex, load_mesh, save_complex
from .errors import ParetocError
from .metrics import hausdorff
from .problems import (
    ConstrainedProblem,
    check_derivatives,
    registry_get,
    registry_names,
    sample_domain,
)
from .refinement import initial_state, iterate
from .tessellation import NodeSet, build_delaunay, kuhn_tessellation


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("PARETOC_THREADS")
    if env:
        return int(env)
    return os.cpu_count()


def _parse_grid(spec: str, box: np.ndarray, default_seed: int):
    """Grid spec: 'AxB[xC...]' node counts, 'h:0.25' spacing, or
    'random:N[:seed=S]' uniform points."""
    spec = spec.strip()
    if spec.startswith("random:"):
        parts = spec.split(":")
        count = int(parts[1])
        seed = default_seed
        for extra in parts[2:]:
            k, _, v = extra.partition("=")
            if k == "seed":
                seed = int(v)
            else:
                raise ValueError(f"unknown random-grid option {extra!r}")
        rng = np.random.default_rng(seed)
        pts = rng.uniform(box[:, 0], box[:, 1], size=(count, box.shape[0]))
        return build_delaunay(NodeSet(pts))
    if spec.startswith("h:"):
        h = float(spec[2:])
        counts = [int(round((hi - lo) / h)) + 1 for lo, hi in box]
        return kuhn_tessellation(box, counts)
    counts = [int(tok) for tok in spec.lower().split("x")]
    if len(counts) != box.shape[0]:
        raise ValueError(
            f"grid spec {spec!r} has {len(counts)} axes, problem has {box.shape[0]}"
        )
    return kuhn_tessellation(box, counts)


def _run_problem(problem, args):
    """Build the tessellation/mesh and analyze; returns (complex, meta)."""
    threads = _threads(args)
    if isinstance(problem, ConstrainedProblem):
        if args.manifold_mesh:
            pts, cells, d, _emb = load_mesh(args.manifold_mesh)
            mesh = ManifoldMesh(points=pts, cells=cells, d=d)
            meta = f"mesh:{args.manifold_mesh}"
        else:
            mesh = icosphere(args.subdiv)
            meta = f"icosphere:{args.subdiv}"
        cx = analyze_constrained(problem, mesh, threads=threads)
        return cx, meta
    tess = _parse_grid(args.grid, problem.domain_box, args.seed)
    cx = Analyzer(
        problem,
        tess,
        order=args.order,
        hessian_mode=args.hessians,
    ).run(threads=threads)
    return cx, args.grid


def _print_summary(cx, meta) -> None:
    counts = cx.strata_counts()
    cusps = len(cx.markers_of_kind("cusp"))
    bounds = len(cx.markers_of_kind("criticality_boundary"))
    print(f"grid            {meta}")
    print(f"vertices        {cx.num_vertices}")
    print(f"singular-only   {counts.get('singular_only', 0)}")
    print(f"critical        {counts.get('critical_unstable', 0)}")
    print(f"stable          {counts.get('critical_stable', 0)}")
    print(f"markers         {bounds} criticality boundaries, {cusps} cusps")
    print(f"components      {len(cx.components())}")


def cmd_run(args) -> int:
    problem = registry_get(args.problem)
    cx, meta = _run_problem(problem, args)
    prov = {"problem": args.problem, "grid": meta, "iterations": 0}
    if args.out:
        save_complex(args.out, cx, prov)
        print(f"wrote {args.out}")
    _print_summary(cx, meta)
    return 0


def cmd_iterate(args) -> int:
    problem = registry_get(args.problem)
    if isinstance(problem, ConstrainedProblem):
        raise ParetocError("iterate supports unconstrained problems only")
    threads = _threads(args)
    tess = _parse_grid(args.grid, problem.domain_box, args.seed)
    state = initial_state(
        problem,
        tess,
        order=args.order,
        threads=threads,
    )
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    reference = load_complex(args.reference) if args.reference else None
    save_complex(
        outdir / "complex_iter_00.json",
        state.complex,
        {"problem": args.problem, "grid": args.grid, "iterations": 0},
    )
    for k in range(args.iterations):
        state = iterate(
            state,
            scheme=args.scheme,
            budget=args.budget,
            reference=reference,
            threads=threads,
        )
        stats = state.history[-1]
        save_complex(
            outdir / f"complex_iter_{stats.iteration:02d}.json",
            state.complex,
            {"problem": args.problem, "grid": args.grid, "iterations": stats.iteration},
        )
        print(
            f"iteration {stats.iteration}: nodes={stats.nodes} "
            f"max_minor={stats.max_minor!r} mean_minor={stats.mean_minor!r}"
        )
    with open(outdir / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "nodes", "max_minor", "mean_minor", "hausdorff_to_ref"])
        for s in state.history:
            writer.writerow(
                [
                    s.iteration,
                    s.nodes,
                    repr(s.max_minor),
                    repr(s.mean_minor),
                    "" if s.hausdorff_to_ref is None else repr(s.hausdorff_to_ref),
                ]
            )
    print(f"wrote {outdir / 'history.csv'}")
    return 0


def cmd_distance(args) -> int:
    a = load_complex(args.file_a)
    b = load_complex(args.file_b)
    report = hausdorff(a, b, density=args.density)
    print(str(report))
    if args.json:
        import json

        with open(args.json, "w") as fh:
            json.dump(
                {
                    "hausdorff": report.hausdorff,
                    "mean_a_to_b": report.mean_a_to_b,
                    "mean_b_to_a": report.mean_b_to_a,
                    "sample_count": report.sample_count,
                },
                fh,
                indent=1,
            )
            fh.write("\n")
    return 0


def cmd_plot_data(args) -> int:
    cx = load_complex(args.file)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    strata = [STRATUM_STABLE] if args.stable_only else list(cx.strata_counts())
    if cx.is_empty():
        print("warning: empty complex, writing headers only", file=sys.stderr)
    header = (
        ["component_id", "vertex_index"]
        + [f"x{i}" for i in range(cx.n)]
        + [f"u{j}" for j in range(cx.m)]
        + ["stratum"]
    )
    for stratum in sorted(set(strata)):
        path = outdir / f"plot_{args.space}_{stratum}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            comps = cx.components(strata=[stratum])
            ids = cx.simplex_ids([stratum])
            for comp_id, comp in enumerate(comps):
                rows = _component_rows(cx, comp, ids)
                for vertex_index, vid in enumerate(rows):
                    writer.writerow(
                        [comp_id, vertex_index]
                        + [repr(float(v)) for v in cx.positions[vid]]
                        + [repr(float(v)) for v in cx.u_values[vid]]
                        + [stratum]
                    )
        print(f"wrote {path}")
    mpath = outdir / "markers.csv"
    with open(mpath, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(cx.n)] + [f"u{j}" for j in range(cx.m)] + ["kind"])
        for vid, kind in cx.markers:
            writer.writerow(
                [repr(float(v)) for v in cx.positions[vid]]
                + [repr(float(v)) for v in cx.u_values[vid]]
                + [kind]
            )
    print(f"wrote {mpath}")
    return 0


def _component_rows(cx, comp, simplex_ids):
    """Vertex order for one component: chained for segments, soup for triangles."""
    segs = [cx.simplices[i][0] for i in simplex_ids if cx.simplices[i][0][0] in comp or cx.simplices[i][0][-1] in comp]
    if all(len(s) == 2 for s in segs):
        adj: dict[int, list] = {}
        for a, b in segs:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        ends = sorted(v for v, nb in adj.items() if len(nb) == 1)
        start = ends[0] if ends else min(adj)
        order = [start]
        seen = {start}
        cur = start
        while True:
            nxt = [v for v in sorted(adj[cur]) if v not in seen]
            if not nxt:
                break
            cur = nxt[0]
            order.append(cur)
            seen.add(cur)
        if not ends and len(order) > 1:
            order.append(start)  # close the loop
        return order
    out = []
    for s in segs:
        out.extend(s)
    return out


def cmd_list_problems(args) -> int:
    for name in registry_names():
        p = registry_get(name)
        base = p.base if isinstance(p, ConstrainedProblem) else p
        kind = "constrained" if isinstance(p, ConstrainedProblem) else "unconstrained"
        print(f"{name:20s} n={base.n} m={base.m} {kind:14s} {base.description}")
    return 0


def cmd_check_derivatives(args) -> int:
    problem = registry_get(args.problem)
    base = problem.base if isinstance(problem, ConstrainedProblem) else problem
    samples = sample_domain(base, args.samples, seed=args.seed)
    if isinstance(problem, ConstrainedProblem):
        samples = samples / np.linalg.norm(samples, axis=1, keepdims=True)
    report = check_derivatives(problem, samples)
    print(
        f"{args.problem}: jacobian {report.max_jacobian_error:.3e} "
        f"hessians {report.max_hessian_error:.3e} "
        f"constraint {report.max_constraint_error:.3e} "
        f"-> {'PASS' if report.passed else 'FAIL'}"
    )
    return 0 if report.passed else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="paretoc",
        description="Piecewise-linear approximation of singular, critical and "
        "stable Pareto critical sets by simplicial continuation.",
    )
    ap.add_argument("--threads", type=int, default=None,
                    help="parallel cell-analysis width (default: PARETOC_THREADS or CPU count)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--problem", required=True, help="registered problem name")
        p.add_argument("--grid", default="40x40",
                       help="'AxB[xC..]' node counts, 'h:SPACING', or 'random:N[:seed=S]'")
        p.add_argument("--order", type=int, choices=(1, 2), default=2,
                       help="1: critical set only; 2: stability clip too")
        p.add_argument("--seed", type=int, default=0, help="seed for random grids")
        p.add_argument("--hessians", choices=("analytic", "fd"), default="analytic",
                       help="second-derivative source for the stability clip")

    rp = sub.add_parser("run", help="analyze one tessellation and write a complex file")
    common(rp)
    rp.add_argument("--subdiv", type=int, default=1,
                    help="icosphere subdivisions for constrained problems")
    rp.add_argument("--manifold-mesh", default=None,
                    help="manifold mesh JSON for constrained problems")
    rp.add_argument("--out", default=None, help="output complex JSON path")
    rp.set_defaults(func=cmd_run)

    ip = sub.add_parser("iterate", help="refinement iterations with per-step output")
    common(ip)
    ip.add_argument("--scheme", choices=("polyline", "maximin"), default="polyline")
    ip.add_argument("--iterations", type=int, default=4)
    ip.add_argument("--budget", type=int, default=None,
                    help="keep only the top-B candidates ranked by minor magnitude")
    ip.add_argument("--reference", default=None,
                    help="complex file for the hausdorff_to_ref history column")
    ip.add_argument("--out-dir", required=True)
    ip.set_defaults(func=cmd_iterate)

    dp = sub.add_parser("distance", help="Hausdorff distance between two complex files")
    dp.add_argument("file_a")
    dp.add_argument("file_b")
    dp.add_argument("--density", type=int, default=20)
    dp.add_argument("--json", default=None, help="also write a JSON report")
    dp.set_defaults(func=cmd_distance)

    pp = sub.add_parser("plot-data", help="emit plot-ready CSV polylines")
    pp.add_argument("--file", required=True)
    pp.add_argument("--space", choices=("input", "output"), default="input")
    pp.add_argument("--out-dir", required=True)
    pp.add_argument("--stable-only", action="store_true")
    pp.set_defaults(func=cmd_plot_data)

    lp = sub.add_parser("list-problems", help="print the problem registry")
    lp.set_defaults(func=cmd_list_problems)

    cp = sub.add_parser("check-derivatives", help="finite-difference derivative audit")
    cp.add_argument("--problem", required=True)
    cp.add_argument("--samples", type=int, default=20)
    cp.add_argument("--seed", type=int, default=0)
    cp.set_defaults(func=cmd_check_derivatives)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except (ParetocError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
